//! Network localization from barycentric coordinates.
//!
//! Anchors occupy ids `0..m`. Each free agent `i` expresses its position as
//! `p_i = sum_j a_ij p_j` over neighbors. Moving anchor terms to the right
//! gives `M P_free = mu` with `M = I - C` over free agents and
//! `mu_i = sum_{anchor a} a_ia p_a`. DCG then solves `M^T M P = M^T mu`
//! column by column over the network induced by the free agents.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::apps::bary::{compute_barycentric_row, BarycentricRow};
use crate::apps::normal::assemble_gram_rows;
use crate::apps::AppError;
use crate::linalg::{DenseMatrix, Lu};
use crate::network::{distance, sample_unit_cube, AgentId, Network};
use crate::solvers::{run_dcg, DcgRun, SolverConfig};
use crate::system::{rhs_norm_sq, RowSlice};

const ANCHOR_CANDIDATES: usize = 256;
const ANCHOR_STREAM: u64 = 0x5eed_a4c4_0000_0001;

/// A measured inter-agent distance, `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub a: AgentId,
    pub b: AgentId,
    pub distance: f64,
}

/// Ground-truth deployment plus the measurements agents can use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationScene {
    net: Network,
    anchors: usize,
    measured_distances: Vec<Measurement>,
}

/// Parameters for a random scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub n: usize,
    pub dim: usize,
    pub anchors: usize,
    pub reception_range: f64,
}

impl LocalizationScene {
    /// `net` must carry positions; anchors are agents `0..anchors`.
    pub fn new(net: Network, anchors: usize, mut measured_distances: Vec<Measurement>) -> Result<Self, AppError> {
        let positions = net
            .positions()
            .ok_or_else(|| AppError::InvalidParameter("scene network needs positions".into()))?;
        if positions.is_empty() {
            return Err(AppError::InvalidParameter("scene has no agents".into()));
        }
        if anchors < net.dim() + 1 || anchors > net.n() {
            return Err(AppError::InvalidParameter(format!(
                "need between {} and {} anchors, got {anchors}",
                net.dim() + 1,
                net.n()
            )));
        }
        for m in &mut measured_distances {
            if m.a > m.b {
                std::mem::swap(&mut m.a, &mut m.b);
            }
            if m.b >= net.n() || m.a == m.b || !(m.distance > 0.0 && m.distance.is_finite()) {
                return Err(AppError::InvalidParameter(format!(
                    "bad measurement ({}, {}, {})",
                    m.a, m.b, m.distance
                )));
            }
        }
        measured_distances.sort_by_key(|m| (m.a, m.b));
        if measured_distances.windows(2).any(|w| (w[0].a, w[0].b) == (w[1].a, w[1].b)) {
            return Err(AppError::InvalidParameter("duplicate measurement".into()));
        }
        Ok(Self {
            net,
            anchors,
            measured_distances,
        })
    }

    /// Scene whose measurements are the exact lengths of every edge.
    pub fn noiseless(net: Network, anchors: usize) -> Result<Self, AppError> {
        let positions = net
            .positions()
            .ok_or_else(|| AppError::InvalidParameter("scene network needs positions".into()))?;
        let measured = net
            .edges()
            .map(|(a, b)| Measurement {
                a,
                b,
                distance: distance(&positions[a], &positions[b]),
            })
            .collect();
        Self::new(net, anchors, measured)
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn dim(&self) -> usize {
        self.net.dim()
    }

    pub fn anchor_count(&self) -> usize {
        self.anchors
    }

    pub fn free_count(&self) -> usize {
        self.net.n() - self.anchors
    }

    pub fn free_ids(&self) -> Vec<AgentId> {
        (self.anchors..self.net.n()).collect()
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        self.net.positions().expect("scene networks carry positions")
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measured_distances
    }

    pub fn measured(&self, a: AgentId, b: AgentId) -> Option<f64> {
        let key = (a.min(b), a.max(b));
        self.measured_distances
            .binary_search_by_key(&key, |m| (m.a, m.b))
            .ok()
            .map(|k| self.measured_distances[k].distance)
    }

    /// Ground-truth positions of the free agents in free-index order.
    pub fn free_truth(&self) -> Vec<Vec<f64>> {
        self.positions()[self.anchors..].to_vec()
    }

    pub fn to_json(&self) -> Result<String, AppError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, AppError> {
        let raw: Self = serde_json::from_str(text)?;
        raw.net.validate()?;
        Self::new(raw.net, raw.anchors, raw.measured_distances)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), AppError> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self, AppError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn simplex_condition(points: &[&[f64]]) -> f64 {
    let k = points.len();
    let dim = k - 1;
    let s = nalgebra::DMatrix::from_fn(k, k, |r, c| if r < dim { points[c][r] } else { 1.0 });
    let sv = s.singular_values();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

/// Picks anchors: the best-conditioned `dim + 1` simplex among seeded random
/// candidates, then any extra anchors at random.
pub fn choose_anchors(positions: &[Vec<f64>], dim: usize, anchors: usize, seed: u64) -> Vec<AgentId> {
    let n = positions.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ANCHOR_STREAM);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..ANCHOR_CANDIDATES {
        let mut pick = sample(&mut rng, n, dim + 1).into_vec();
        pick.sort_unstable();
        let pts: Vec<&[f64]> = pick.iter().map(|&i| positions[i].as_slice()).collect();
        let cond = simplex_condition(&pts);
        if best.as_ref().is_none_or(|(c, _)| cond < *c) {
            best = Some((cond, pick));
        }
    }
    let mut chosen = best.map(|(_, p)| p).unwrap_or_default();
    if anchors > chosen.len() {
        let rest: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
        let extra = sample(&mut rng, rest.len(), anchors - chosen.len());
        let mut extra: Vec<usize> = extra.into_iter().map(|k| rest[k]).collect();
        extra.sort_unstable();
        chosen.extend(extra);
    }
    chosen
}

/// One random scene attempt; anchors are relabelled to ids `0..anchors`.
pub fn generate_scene(params: SceneParams, seed: u64) -> Result<LocalizationScene, AppError> {
    let SceneParams {
        n,
        dim,
        anchors,
        reception_range,
    } = params;
    if !(dim == 2 || dim == 3) {
        return Err(AppError::InvalidParameter(format!("dim must be 2 or 3, got {dim}")));
    }
    if n < dim + 2 || anchors < dim + 1 || anchors > n {
        return Err(AppError::InvalidParameter(format!(
            "need n >= dim + 2 and dim + 1 <= anchors <= n, got n = {n}, anchors = {anchors}"
        )));
    }
    if !(reception_range > 0.0 && reception_range.is_finite()) {
        return Err(AppError::InvalidParameter(format!(
            "reception range must be positive, got {reception_range}"
        )));
    }
    let raw = sample_unit_cube(n, dim, seed);
    let anchor_ids = choose_anchors(&raw, dim, anchors, seed);
    let mut order = anchor_ids.clone();
    order.extend((0..n).filter(|i| !anchor_ids.contains(i)));
    let positions: Vec<Vec<f64>> = order.iter().map(|&i| raw[i].clone()).collect();
    let net = Network::from_positions(positions, reception_range)?;
    LocalizationScene::noiseless(net, anchors)
}

/// Barycentric rows for every free agent, in free-index order.
pub fn barycentric_rows(scene: &LocalizationScene) -> Result<Vec<BarycentricRow>, AppError> {
    scene
        .free_ids()
        .into_iter()
        .map(|i| {
            let neighbors: Vec<AgentId> = scene
                .net()
                .neighbors(i)
                .iter()
                .copied()
                .filter(|&j| scene.measured(i, j).is_some())
                .collect();
            compute_barycentric_row(i, &neighbors, |a, b| scene.measured(a, b), scene.dim())
        })
        .collect()
}

/// The free-agent system in both forms.
#[derive(Debug, Clone)]
pub struct LocalizationSystem {
    /// Network induced by the free agents, relabelled `0..free_count`.
    pub free_net: Network,
    /// Rows of `M` with `mu` as right-hand side.
    pub m_rows: Vec<RowSlice>,
    /// Rows of `M^T M` with `M^T mu` as right-hand side.
    pub rows: Vec<RowSlice>,
}

/// Rows of `M` and `mu` for the free agents.
pub fn localization_m_rows(scene: &LocalizationScene, bary: &[BarycentricRow]) -> Result<Vec<RowSlice>, AppError> {
    let m = scene.anchor_count();
    let dim = scene.dim();
    if bary.len() != scene.free_count() {
        return Err(AppError::InvalidParameter(format!(
            "expected {} barycentric rows, got {}",
            scene.free_count(),
            bary.len()
        )));
    }
    let positions = scene.positions();
    bary.iter()
        .enumerate()
        .map(|(k, row)| {
            if row.owner != m + k {
                return Err(AppError::InvalidParameter(format!(
                    "barycentric row {k} belongs to agent {}",
                    row.owner
                )));
            }
            let mut mu = vec![0.0; dim];
            let mut coeffs = vec![(k, 1.0)];
            for &(j, w) in &row.weights {
                if j < m {
                    for (acc, p) in mu.iter_mut().zip(&positions[j]) {
                        *acc += w * p;
                    }
                } else {
                    coeffs.push((j - m, -w));
                }
            }
            Ok(RowSlice::new(k, coeffs, mu)?)
        })
        .collect()
}

/// Builds the normal-equation system over the free agents by one round of
/// row exchange on the free network.
pub fn build_localization_rows(
    scene: &LocalizationScene,
    bary: &[BarycentricRow],
) -> Result<LocalizationSystem, AppError> {
    let m_rows = localization_m_rows(scene, bary)?;
    let free_net = scene.net().induced_subgraph(&scene.free_ids());
    let rows = if m_rows.is_empty() {
        Vec::new()
    } else {
        assemble_gram_rows(&m_rows, &free_net)?
    };
    Ok(LocalizationSystem { free_net, m_rows, rows })
}

/// Dense `M` and `B P_anchor` assembled centrally.
pub fn central_localization_matrices(
    scene: &LocalizationScene,
    bary: &[BarycentricRow],
) -> Result<(DenseMatrix, DenseMatrix), AppError> {
    let m = scene.anchor_count();
    let f = scene.free_count();
    let dim = scene.dim();
    let mut c_free = DenseMatrix::zeros(f, f);
    let mut b_anchor = DenseMatrix::zeros(f, m);
    for (k, row) in bary.iter().enumerate() {
        for &(j, w) in &row.weights {
            if j < m {
                b_anchor[(k, j)] = w;
            } else {
                c_free[(k, j - m)] = w;
            }
        }
    }
    let m_mat = DenseMatrix::identity(f).sub(&c_free)?;
    let anchor_pos = DenseMatrix::new(
        m,
        dim,
        scene.positions()[..m].iter().flatten().copied().collect(),
    )?;
    Ok((m_mat, b_anchor.matmul(&anchor_pos)?))
}

/// Checks that a scene is usable: connected, connected free network,
/// barycentric rows for every free agent and a non-singular `M`.
pub fn validate_scene(scene: &LocalizationScene) -> Result<(Vec<BarycentricRow>, LocalizationSystem), AppError> {
    if !scene.net().is_connected() {
        return Err(AppError::Disconnected);
    }
    let bary = barycentric_rows(scene)?;
    let system = build_localization_rows(scene, &bary)?;
    if !system.free_net.is_connected() {
        return Err(AppError::Disconnected);
    }
    if scene.free_count() > 0 {
        let (m_mat, _) = central_localization_matrices(scene, &bary)?;
        Lu::factor(&m_mat).map_err(|_| AppError::SingularSystem)?;
    }
    Ok((bary, system))
}

/// A validated random scene and how it was obtained.
#[derive(Debug, Clone)]
pub struct GeneratedScene {
    pub scene: LocalizationScene,
    pub bary: Vec<BarycentricRow>,
    pub system: LocalizationSystem,
    pub seed_used: u64,
    pub attempts: usize,
}

/// Generates scenes starting at `seed`, moving to `seed + 1` on rejection,
/// for at most `max_attempts` tries.
pub fn generate_valid_scene(params: SceneParams, seed: u64, max_attempts: usize) -> Result<GeneratedScene, AppError> {
    let mut last = String::from("no attempts made");
    for attempt in 0..max_attempts {
        let s = seed.wrapping_add(attempt as u64);
        let scene = generate_scene(params, s)?;
        match validate_scene(&scene) {
            Ok((bary, system)) => {
                return Ok(GeneratedScene {
                    scene,
                    bary,
                    system,
                    seed_used: s,
                    attempts: attempt + 1,
                })
            }
            Err(err) => last = err.to_string(),
        }
    }
    Err(AppError::SceneRejected {
        attempts: max_attempts,
        last,
    })
}

/// Localization result: positions of the free agents in free-index order.
#[derive(Debug, Clone)]
pub struct LocalizationRun {
    pub estimates: Vec<Vec<f64>>,
    pub system: LocalizationSystem,
    /// `None` when every agent is an anchor.
    pub run: Option<DcgRun>,
}

impl LocalizationRun {
    pub fn max_position_error(&self, truth: &[Vec<f64>]) -> f64 {
        self.estimates
            .iter()
            .zip(truth)
            .flat_map(|(e, t)| e.iter().zip(t).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }
}

/// Residual threshold scale used for localization systems when none is
/// configured. Their Gram matrices are much worse conditioned than generic
/// test systems, so the generic `1e-10` scale stops far from the solution.
pub const LOCALIZATION_EPSILON_SCALE: f64 = 1e-16;

/// `LOCALIZATION_EPSILON_SCALE * (1 + |b|^2)`.
pub fn localization_epsilon(rows: &[RowSlice]) -> f64 {
    LOCALIZATION_EPSILON_SCALE * (1.0 + rhs_norm_sq(rows))
}

/// Builds the free-agent system and solves each coordinate with DCG. Without
/// an explicit epsilon the threshold is [`localization_epsilon`].
pub fn dcg_loc(scene: &LocalizationScene, config: &SolverConfig, snapshots: bool) -> Result<LocalizationRun, AppError> {
    let bary = barycentric_rows(scene)?;
    let system = build_localization_rows(scene, &bary)?;
    if system.rows.is_empty() {
        return Ok(LocalizationRun {
            estimates: Vec::new(),
            system,
            run: None,
        });
    }
    let truth = scene.free_truth();
    let mut config = config.clone();
    config.epsilon = config.epsilon.or_else(|| Some(localization_epsilon(&system.rows)));
    let run = run_dcg(&system.rows, &system.free_net, &config, Some(&truth), snapshots)?;
    Ok(LocalizationRun {
        estimates: run.trace.final_estimates.clone(),
        system,
        run: Some(run),
    })
}
