//! Builds a problem from an [`ExperimentConfig`], runs every requested solver
//! on it and writes the artifacts.

use std::path::{Path, PathBuf};

use dcg_core::apps::localization::{generate_valid_scene, localization_epsilon, LocalizationScene, SceneParams};
use dcg_core::apps::noise::{draw_noise, inject_noise, perturb_rows};
use dcg_core::apps::normal::{assemble_normal_rows, random_local_system};
use dcg_core::apps::AppError;
use dcg_core::linalg::{direct_solve, DenseVector};
use dcg_core::network::generate_geometric_network;
use dcg_core::sim::Snapshot;
use dcg_core::solvers::{
    default_epsilon, default_richardson_omega, gauss_seidel_agents, jacobi_agents, richardson_agents, run_dcg,
    run_stationary, StationaryAgent,
};
use dcg_core::system::{rows_to_dense, RowSlice};
use dcg_core::{Network, RunTrace, SimError, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, RawMatrix, Scenario, SolverKind};
use crate::plot::{mse_svg, trails_svg, Series, Trails};
use crate::CliError;

/// Scene or network generation tries `seed, seed + 1, ...` this many times.
pub const MAX_RESEED_ATTEMPTS: usize = 20;
/// Iteration cap for the stationary baselines when `t_max` is not set.
pub const STATIONARY_MAX_ITERATIONS: usize = 2_000_000;

/// A linear system laid out on a network, with its reference solution.
#[derive(Debug, Clone)]
pub struct Problem {
    pub rows: Vec<RowSlice>,
    pub net: Network,
    /// Reference solution, one vector per agent.
    pub truth: Vec<Vec<f64>>,
    pub scene: Option<LocalizationScene>,
    pub seed_used: u64,
    pub attempts: usize,
    pub lemma_margin: Option<f64>,
}

fn connected_network(cfg: &ExperimentConfig) -> Result<(Network, u64, usize), CliError> {
    let mut last = String::from("no attempts made");
    for attempt in 0..MAX_RESEED_ATTEMPTS {
        let seed = cfg.seed.wrapping_add(attempt as u64);
        let net = generate_geometric_network(cfg.n, cfg.dim, cfg.reception_range, seed)?;
        if net.is_connected() {
            return Ok((net, seed, attempt + 1));
        }
        last = format!("seed {seed} gives a disconnected network");
    }
    Err(CliError::DisconnectedNetwork {
        attempts: MAX_RESEED_ATTEMPTS,
        last,
    })
}

/// `L + I` for the graph Laplacian `L`, with a random right-hand side.
pub fn shifted_laplacian_rows(net: &Network, seed: u64) -> Result<Vec<RowSlice>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..net.n())
        .map(|i| {
            let mut coeffs: Vec<(usize, f64)> = net.neighbors(i).iter().map(|&j| (j, -1.0)).collect();
            coeffs.push((i, net.neighbors(i).len() as f64 + 1.0));
            Ok(RowSlice::new(i, coeffs, vec![rng.random_range(-1.0..=1.0)])?)
        })
        .collect()
}

pub fn identity_rows(n: usize, seed: u64) -> Result<Vec<RowSlice>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| Ok(RowSlice::new(i, vec![(i, 1.0)], vec![rng.random_range(-1.0..=1.0)])?))
        .collect()
}

fn central_solution(rows: &[RowSlice]) -> Result<Vec<Vec<f64>>, CliError> {
    let (a, b) = rows_to_dense(rows)?;
    let mut truth = vec![Vec::with_capacity(b.cols()); rows.len()];
    for c in 0..b.cols() {
        let x = direct_solve(&a, &DenseVector::new(b.column(c)).map_err(dcg_core::SystemError::from)?)
            .map_err(dcg_core::SystemError::from)?;
        for (t, v) in truth.iter_mut().zip(x.as_slice()) {
            t.push(*v);
        }
    }
    Ok(truth)
}

/// Applies the configured noise. The margin is `None` when it could not be
/// computed, e.g. when the eigenvalue estimate does not converge.
fn apply_noise(rows: Vec<RowSlice>, cfg: &ExperimentConfig) -> Result<(Vec<RowSlice>, Option<f64>), CliError> {
    let Some(model) = &cfg.noise else {
        return Ok((rows, None));
    };
    match inject_noise(&rows, model) {
        Ok((noisy, margin)) => Ok((noisy, Some(margin))),
        Err(AppError::Linalg(_)) => {
            let (delta_a, delta_b) = draw_noise(&rows, model)?;
            Ok((perturb_rows(&rows, &delta_a, &delta_b)?, None))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem, CliError> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::Localization => {
            let params = SceneParams {
                n: cfg.n,
                dim: cfg.dim,
                anchors: cfg.anchors,
                reception_range: cfg.reception_range,
            };
            let generated = generate_valid_scene(params, cfg.seed, MAX_RESEED_ATTEMPTS).map_err(|e| match e {
                AppError::SceneRejected { attempts, last } => CliError::DisconnectedNetwork { attempts, last },
                other => other.into(),
            })?;
            let (rows, lemma_margin) = apply_noise(generated.system.rows, cfg)?;
            Ok(Problem {
                rows,
                net: generated.system.free_net,
                truth: generated.scene.free_truth(),
                scene: Some(generated.scene),
                seed_used: generated.seed_used,
                attempts: generated.attempts,
                lemma_margin,
            })
        }
        Scenario::LeastSquares => {
            let (net, seed_used, attempts) = connected_network(cfg)?;
            let raw = random_local_system(&net, 1, seed_used)?;
            let rows = assemble_normal_rows(&raw, &net)?;
            let (rows, lemma_margin) = apply_noise(rows, cfg)?;
            let truth = central_solution(&rows)?;
            Ok(Problem {
                rows,
                net,
                truth,
                scene: None,
                seed_used,
                attempts,
                lemma_margin,
            })
        }
        Scenario::RawSystem => {
            let (net, seed_used, attempts) = connected_network(cfg)?;
            let rows = match cfg.matrix {
                RawMatrix::Identity => identity_rows(net.n(), seed_used)?,
                RawMatrix::ShiftedLaplacian => shifted_laplacian_rows(&net, seed_used)?,
            };
            let (rows, lemma_margin) = apply_noise(rows, cfg)?;
            let truth = central_solution(&rows)?;
            Ok(Problem {
                rows,
                net,
                truth,
                scene: None,
                seed_used,
                attempts,
                lemma_margin,
            })
        }
    }
}

/// Per-solver row of the comparison report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub solver: SolverKind,
    pub converged: bool,
    pub failure: Option<String>,
    /// Rounds charged to the solver: every engine round for DCG, one per
    /// iteration for the stationary baselines.
    pub rounds_to_converge: usize,
    pub engine_rounds: usize,
    pub outer_iterations: usize,
    pub final_mse: Option<f64>,
    pub final_residual_sq: Option<f64>,
    pub messages_total: usize,
    pub bytes_total: usize,
    /// DCG only: whether `engine_rounds <= 4 H n`.
    pub within_round_bound: Option<bool>,
    pub speedup_vs_baseline: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub config: ExperimentConfig,
    pub seed_used: u64,
    pub attempts: usize,
    /// Number of agents in the solved system.
    pub agents: usize,
    pub hop_diameter: usize,
    /// `4 H n`.
    pub round_bound: usize,
    pub epsilon: f64,
    pub lemma_margin: Option<f64>,
    pub baseline: Option<SolverKind>,
    pub solvers: Vec<SolverReport>,
}

impl ComparisonReport {
    pub fn all_converged(&self) -> bool {
        self.solvers.iter().all(|s| s.converged)
    }

    pub fn solver(&self, kind: SolverKind) -> Option<&SolverReport> {
        self.solvers.iter().find(|s| s.solver == kind)
    }
}

/// Everything a solver run produced.
#[derive(Debug, Clone)]
pub struct SolverRun {
    pub kind: SolverKind,
    pub trace: Option<RunTrace>,
    pub rounds_per_iteration: usize,
    pub report: SolverReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ComparisonReport,
    pub runs: Vec<SolverRun>,
    pub problem: Problem,
    pub files: Vec<PathBuf>,
}

fn failed(kind: SolverKind, failure: String) -> SolverRun {
    SolverRun {
        kind,
        trace: None,
        rounds_per_iteration: 1,
        report: SolverReport {
            solver: kind,
            converged: false,
            failure: Some(failure),
            rounds_to_converge: 0,
            engine_rounds: 0,
            outer_iterations: 0,
            final_mse: None,
            final_residual_sq: None,
            messages_total: 0,
            bytes_total: 0,
            within_round_bound: None,
            speedup_vs_baseline: None,
        },
    }
}

fn finished(kind: SolverKind, trace: RunTrace, iterations: usize, rounds: usize, per_iteration: usize) -> SolverRun {
    let converged = trace.converged();
    SolverRun {
        kind,
        report: SolverReport {
            solver: kind,
            converged,
            failure: (!converged).then(|| "iteration limit reached".to_string()),
            rounds_to_converge: rounds,
            engine_rounds: trace.round_count(),
            outer_iterations: iterations,
            final_mse: trace.final_mse(),
            final_residual_sq: trace.residual_sq_history.last().copied(),
            messages_total: trace.messages_total(),
            bytes_total: trace.bytes_total(),
            within_round_bound: None,
            speedup_vs_baseline: None,
        },
        rounds_per_iteration: per_iteration,
        trace: Some(trace),
    }
}

fn run_solver(
    kind: SolverKind,
    problem: &Problem,
    cfg: &ExperimentConfig,
    epsilon: f64,
    round_bound: usize,
) -> SolverRun {
    let snapshots = problem.scene.is_some();
    let truth = Some(problem.truth.as_slice());
    let mut config = SolverConfig::default().with_epsilon(epsilon).with_mode(cfg.dcg_mode);
    config.t_max = cfg.t_max;
    if kind == SolverKind::Dcg {
        return match run_dcg(&problem.rows, &problem.net, &config, truth, snapshots) {
            Ok(run) => {
                let rounds = run.engine_rounds();
                let mut out = finished(kind, run.trace, run.outer_iterations, rounds, 1);
                out.report.within_round_bound = Some(rounds <= round_bound);
                out
            }
            Err(e) => failed(kind, e.to_string()),
        };
    }
    let agents: Result<Vec<StationaryAgent>, SimError> = (|| {
        Ok(match kind {
            SolverKind::Jacobi => jacobi_agents(&problem.rows, &problem.net)?,
            SolverKind::GaussSeidel => gauss_seidel_agents(&problem.rows, &problem.net)?,
            SolverKind::Richardson => {
                let omega = default_richardson_omega(&problem.rows)?;
                richardson_agents(&problem.rows, &problem.net, omega)?
            }
            SolverKind::Dcg => unreachable!(),
        })
    })();
    let max_iterations = cfg.t_max.unwrap_or(STATIONARY_MAX_ITERATIONS);
    match agents.and_then(|a| run_stationary(a, &problem.rows, &problem.net, &config, max_iterations, truth, snapshots)) {
        Ok(run) => finished(kind, run.trace, run.iterations, run.iterations, run.rounds_per_iteration),
        Err(e) => failed(kind, e.to_string()),
    }
}

/// Solves the configured problem with every requested solver, in parallel,
/// and returns the report. Nothing is written to disk.
pub fn solve(cfg: &ExperimentConfig) -> Result<(ComparisonReport, Vec<SolverRun>, Problem), CliError> {
    let problem = build_problem(cfg)?;
    let epsilon = match cfg.epsilon {
        Some(eps) => eps,
        None if cfg.scenario == Scenario::Localization => localization_epsilon(&problem.rows),
        None => default_epsilon(&problem.rows),
    };
    let hop_diameter = problem.net.hop_diameter()?.hops();
    let round_bound = 4 * hop_diameter.max(1) * problem.rows.len();
    let mut runs: Vec<SolverRun> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .solvers
            .iter()
            .map(|&kind| {
                let problem = &problem;
                scope.spawn(move || run_solver(kind, problem, cfg, epsilon, round_bound))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });
    let baseline = cfg.solvers.iter().copied().find(|&k| k == SolverKind::Richardson);
    if let Some(base) = baseline.and_then(|b| runs.iter().find(|r| r.kind == b)).map(|r| r.report.clone()) {
        for run in &mut runs {
            if base.converged && run.report.converged && run.report.rounds_to_converge > 0 {
                run.report.speedup_vs_baseline =
                    Some(base.rounds_to_converge as f64 / run.report.rounds_to_converge as f64);
            }
        }
    }
    let report = ComparisonReport {
        config: cfg.clone(),
        seed_used: problem.seed_used,
        attempts: problem.attempts,
        agents: problem.rows.len(),
        hop_diameter,
        round_bound,
        epsilon,
        lemma_margin: problem.lemma_margin,
        baseline,
        solvers: runs.iter().map(|r| r.report.clone()).collect(),
    };
    Ok((report, runs, problem))
}

fn write(path: PathBuf, contents: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    std::fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    files.push(path);
    Ok(())
}

fn mse_series(run: &SolverRun) -> Option<Series> {
    let trace = run.trace.as_ref()?;
    let per = run.rounds_per_iteration as f64;
    Some(Series {
        name: run.kind.name().to_string(),
        points: trace
            .rounds
            .iter()
            .zip(&trace.mse_history)
            .map(|(r, &mse)| ((r.round as f64 / per).ceil(), mse))
            .collect(),
    })
}

fn trails(run: &SolverRun) -> Option<Trails> {
    let snapshots: &[Snapshot] = &run.trace.as_ref()?.snapshots;
    let agents = snapshots.first()?.estimates.len();
    Some(Trails {
        name: run.kind.name().to_string(),
        paths: (0..agents)
            .map(|i| snapshots.iter().map(|s| s.estimates[i].clone()).collect())
            .collect(),
    })
}

/// Writes `trace_<solver>.csv`, `report.json`, `mse.svg` and, for
/// localization, `trails.svg` into `dir`.
pub fn write_artifacts(
    dir: &Path,
    report: &ComparisonReport,
    runs: &[SolverRun],
    problem: &Problem,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for run in runs {
        if let Some(trace) = &run.trace {
            write(dir.join(format!("trace_{}.csv", run.kind)), &trace.to_csv(), &mut files)?;
        }
    }
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write(dir.join("report.json"), &json, &mut files)?;
    let series: Vec<Series> = runs.iter().filter_map(mse_series).collect();
    write(
        dir.join("mse.svg"),
        &mse_svg(&series, "Mean square error against rounds"),
        &mut files,
    )?;
    if let Some(scene) = &problem.scene {
        let anchors = scene.positions()[..scene.anchor_count()].to_vec();
        let trails: Vec<Trails> = runs.iter().filter_map(trails).collect();
        write(
            dir.join("trails.svg"),
            &trails_svg(&problem.truth, &anchors, &trails, "Estimate trails"),
            &mut files,
        )?;
    }
    Ok(files)
}

/// Runs the experiment and writes its artifacts to `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let (report, runs, problem) = solve(cfg)?;
    let files = write_artifacts(&cfg.output_dir, &report, &runs, &problem)?;
    Ok(ExperimentOutput {
        report,
        runs,
        problem,
        files,
    })
}
