//! Experiment configuration.
//!
//! Config files are flat text, one `key = value` per line. Blank lines and
//! anything after `#` are ignored. Keys:
//!
//! | key | value |
//! |-----|-------|
//! | `scenario` | `localization`, `least_squares` or `raw_system` |
//! | `n` | number of agents |
//! | `dim` | 2 or 3 |
//! | `anchors` | anchor count for localization, default `dim + 1` |
//! | `reception_range` | communication radius in the unit cube |
//! | `seed` | RNG seed |
//! | `solvers` | comma list of `dcg`, `richardson`, `jacobi`, `gauss_seidel` |
//! | `epsilon` | squared-residual threshold |
//! | `t_max` | iteration cap for every solver |
//! | `dcg_mode` | `strict` or `cached` |
//! | `matrix` | `identity` or `shifted_laplacian` (raw_system only) |
//! | `noise_matrix_scale`, `noise_rhs_scale` | noise magnitudes; noise is off when both are 0 |
//! | `noise_seed`, `noise_distribution` | `uniform` or `gaussian` |
//! | `output_dir` | where artifacts are written |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dcg_core::apps::noise::{NoiseDistribution, NoiseModel};
use dcg_core::DcgMode;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Localization,
    LeastSquares,
    RawSystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Dcg,
    Richardson,
    Jacobi,
    GaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RawMatrix {
    Identity,
    ShiftedLaplacian,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Dcg => "dcg",
            SolverKind::Richardson => "richardson",
            SolverKind::Jacobi => "jacobi",
            SolverKind::GaussSeidel => "gauss_seidel",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn bad(key: &str, value: &str) -> CliError {
    CliError::Config(format!("invalid value for {key}: {value:?}"))
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "localization" => Ok(Scenario::Localization),
            "least_squares" => Ok(Scenario::LeastSquares),
            "raw_system" => Ok(Scenario::RawSystem),
            _ => Err(bad("scenario", s)),
        }
    }
}

impl FromStr for SolverKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "dcg" => Ok(SolverKind::Dcg),
            "richardson" => Ok(SolverKind::Richardson),
            "jacobi" => Ok(SolverKind::Jacobi),
            "gauss_seidel" => Ok(SolverKind::GaussSeidel),
            _ => Err(bad("solvers", s)),
        }
    }
}

impl FromStr for RawMatrix {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "identity" => Ok(RawMatrix::Identity),
            "shifted_laplacian" => Ok(RawMatrix::ShiftedLaplacian),
            _ => Err(bad("matrix", s)),
        }
    }
}

pub fn parse_mode(s: &str) -> Result<DcgMode, CliError> {
    match s {
        "strict" => Ok(DcgMode::Strict),
        "cached" => Ok(DcgMode::Cached),
        _ => Err(bad("dcg_mode", s)),
    }
}

pub fn parse_distribution(s: &str) -> Result<NoiseDistribution, CliError> {
    match s {
        "uniform" => Ok(NoiseDistribution::Uniform),
        "gaussian" => Ok(NoiseDistribution::Gaussian),
        _ => Err(bad("noise_distribution", s)),
    }
}

pub fn parse_solvers(s: &str) -> Result<Vec<SolverKind>, CliError> {
    let solvers = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(SolverKind::from_str)
        .collect::<Result<Vec<_>, _>>()?;
    if solvers.is_empty() {
        return Err(bad("solvers", s));
    }
    Ok(solvers)
}

/// Raw `key = value` settings, later entries overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    entries: Vec<(String, String)>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut settings = Settings::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            settings.set(key.trim(), value.trim());
        }
        Ok(settings)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.to_string(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }
}

const KEYS: &[&str] = &[
    "scenario",
    "n",
    "dim",
    "anchors",
    "reception_range",
    "seed",
    "solvers",
    "epsilon",
    "t_max",
    "dcg_mode",
    "matrix",
    "noise_matrix_scale",
    "noise_rhs_scale",
    "noise_seed",
    "noise_distribution",
    "output_dir",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub dim: usize,
    pub anchors: usize,
    pub reception_range: f64,
    pub seed: u64,
    pub solvers: Vec<SolverKind>,
    pub epsilon: Option<f64>,
    pub t_max: Option<usize>,
    pub dcg_mode: DcgMode,
    pub matrix: RawMatrix,
    pub noise: Option<NoiseModel>,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Localization,
            n: 30,
            dim: 2,
            anchors: 3,
            reception_range: 0.5,
            seed: 7,
            solvers: vec![SolverKind::Dcg, SolverKind::Richardson],
            epsilon: None,
            t_max: None,
            dcg_mode: DcgMode::Strict,
            matrix: RawMatrix::ShiftedLaplacian,
            noise: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| bad(key, value))
}

impl ExperimentConfig {
    pub fn from_settings(settings: &Settings) -> Result<Self, CliError> {
        if let Some(key) = settings.keys().find(|k| !KEYS.contains(k)) {
            return Err(CliError::Config(format!("unknown key {key:?}")));
        }
        let mut cfg = ExperimentConfig::default();
        if let Some(v) = settings.get("scenario") {
            cfg.scenario = v.parse()?;
        }
        if let Some(v) = settings.get("n") {
            cfg.n = num("n", v)?;
        }
        if let Some(v) = settings.get("dim") {
            cfg.dim = num("dim", v)?;
        }
        cfg.anchors = match settings.get("anchors") {
            Some(v) => num("anchors", v)?,
            None => cfg.dim + 1,
        };
        if let Some(v) = settings.get("reception_range") {
            cfg.reception_range = num("reception_range", v)?;
        }
        if let Some(v) = settings.get("seed") {
            cfg.seed = num("seed", v)?;
        }
        if let Some(v) = settings.get("solvers") {
            cfg.solvers = parse_solvers(v)?;
        }
        if let Some(v) = settings.get("epsilon") {
            cfg.epsilon = Some(num("epsilon", v)?);
        }
        if let Some(v) = settings.get("t_max") {
            cfg.t_max = Some(num("t_max", v)?);
        }
        if let Some(v) = settings.get("dcg_mode") {
            cfg.dcg_mode = parse_mode(v)?;
        }
        if let Some(v) = settings.get("matrix") {
            cfg.matrix = v.parse()?;
        }
        let matrix_scale: f64 = settings.get("noise_matrix_scale").map_or(Ok(0.0), |v| num("noise_matrix_scale", v))?;
        let rhs_scale: f64 = settings.get("noise_rhs_scale").map_or(Ok(0.0), |v| num("noise_rhs_scale", v))?;
        if matrix_scale != 0.0 || rhs_scale != 0.0 {
            cfg.noise = Some(NoiseModel {
                matrix_noise_scale: matrix_scale,
                rhs_noise_scale: rhs_scale,
                seed: settings.get("noise_seed").map_or(Ok(cfg.seed), |v| num("noise_seed", v))?,
                distribution: settings
                    .get("noise_distribution")
                    .map_or(Ok(NoiseDistribution::Uniform), parse_distribution)?,
            });
        }
        if let Some(v) = settings.get("output_dir") {
            cfg.output_dir = PathBuf::from(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.dim == 2 || self.dim == 3) {
            return Err(CliError::Config(format!("dim must be 2 or 3, got {}", self.dim)));
        }
        if self.n < self.dim + 2 {
            return Err(CliError::Config(format!("n must be at least dim + 2, got {}", self.n)));
        }
        if !(self.reception_range > 0.0 && self.reception_range.is_finite()) {
            return Err(CliError::Config(format!(
                "reception_range must be positive, got {}",
                self.reception_range
            )));
        }
        if self.scenario == Scenario::Localization && (self.anchors < self.dim + 1 || self.anchors >= self.n) {
            return Err(CliError::Config(format!(
                "localization needs dim + 1 <= anchors < n, got {} anchors for n = {}",
                self.anchors, self.n
            )));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(CliError::Config(format!("epsilon must be positive, got {eps}")));
            }
        }
        if self.t_max == Some(0) {
            return Err(CliError::Config("t_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_with_comments() {
        let text = "# experiment\nscenario = raw_system  # trailing\n\nn = 12\nsolvers = dcg, jacobi\nmatrix=identity\n";
        let cfg = ExperimentConfig::from_settings(&Settings::parse(text).unwrap()).unwrap();
        assert_eq!(cfg.scenario, Scenario::RawSystem);
        assert_eq!(cfg.n, 12);
        assert_eq!(cfg.solvers, vec![SolverKind::Dcg, SolverKind::Jacobi]);
        assert_eq!(cfg.matrix, RawMatrix::Identity);
        assert_eq!(cfg.anchors, 3);
    }

    #[test]
    fn later_entries_override() {
        let mut s = Settings::parse("n = 5\ndim = 3").unwrap();
        s.set("n", "9");
        let cfg = ExperimentConfig::from_settings(&s).unwrap();
        assert_eq!(cfg.n, 9);
        assert_eq!(cfg.anchors, 4);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Settings::parse("just words").is_err());
        assert!(ExperimentConfig::from_settings(&Settings::parse("colour = red").unwrap()).is_err());
        assert!(ExperimentConfig::from_settings(&Settings::parse("dim = 4").unwrap()).is_err());
        assert!(ExperimentConfig::from_settings(&Settings::parse("anchors = 2").unwrap()).is_err());
        assert!(ExperimentConfig::from_settings(&Settings::parse("solvers = cg").unwrap()).is_err());
        assert!(ExperimentConfig::from_settings(&Settings::parse("epsilon = -1").unwrap()).is_err());
    }

    #[test]
    fn noise_only_when_scaled() {
        let cfg = ExperimentConfig::from_settings(&Settings::parse("noise_seed = 3").unwrap()).unwrap();
        assert!(cfg.noise.is_none());
        let cfg = ExperimentConfig::from_settings(
            &Settings::parse("noise_matrix_scale = 0.01\nnoise_distribution = gaussian").unwrap(),
        )
        .unwrap();
        let noise = cfg.noise.unwrap();
        assert_eq!(noise.seed, 7);
        assert_eq!(noise.distribution, NoiseDistribution::Gaussian);
    }
}
