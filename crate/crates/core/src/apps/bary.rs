//! Barycentric coordinates from local distance measurements.
//!
//! For each candidate simplex of `dim + 1` mutually measured neighbors, the
//! owner and the simplex are embedded by classical multidimensional scaling.
//! Each simplex gives affine weights solving `sum_j w_j q_j = q_owner`,
//! `sum_j w_j = 1` in its embedding. The weights of all simplices whose
//! condition number is close to the best one are averaged, which keeps both
//! constraints and spreads the weight over more neighbors.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::apps::AppError;
use crate::linalg::{direct_solve, DenseMatrix, DenseVector};
use crate::network::AgentId;

/// Simplices conditioned worse than this are rejected.
pub const MAX_SIMPLEX_CONDITION: f64 = 1e10;
/// Simplices within this factor of the best condition number are averaged.
pub const SIMPLEX_SPREAD: f64 = 10.0;

/// Affine weights expressing an agent's position through its neighbors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycentricRow {
    pub owner: AgentId,
    /// `(neighbor, weight)` sorted by neighbor id.
    pub weights: Vec<(AgentId, f64)>,
}

impl BarycentricRow {
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().map(|(_, w)| w).sum()
    }

    pub fn weight(&self, j: AgentId) -> f64 {
        self.weights
            .binary_search_by_key(&j, |&(k, _)| k)
            .map_or(0.0, |k| self.weights[k].1)
    }

    /// `sum_j w_j p_j`.
    pub fn combine(&self, positions: &[Vec<f64>]) -> Vec<f64> {
        let dim = positions.first().map_or(0, Vec::len);
        let mut out = vec![0.0; dim];
        for &(j, w) in &self.weights {
            for (o, p) in out.iter_mut().zip(&positions[j]) {
                *o += w * p;
            }
        }
        out
    }
}

/// Classical MDS of a full squared-distance matrix into `dim` coordinates.
/// Row `k` of the result is the embedding of point `k`.
pub fn classical_mds(sq_dist: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let m = sq_dist.nrows();
    let centering = DMatrix::<f64>::identity(m, m) - DMatrix::<f64>::from_element(m, m, 1.0 / m as f64);
    let gram = -0.5 * &centering * sq_dist * &centering;
    let eigen = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let mut coords = DMatrix::<f64>::zeros(m, dim);
    for (axis, &k) in order.iter().take(dim).enumerate() {
        let scale = eigen.eigenvalues[k].max(0.0).sqrt();
        for p in 0..m {
            coords[(p, axis)] = eigen.eigenvectors[(p, k)] * scale;
        }
    }
    coords
}

/// 2-norm condition number of the `(dim + 1) x (dim + 1)` matrix whose
/// columns are `[q_j; 1]`.
fn simplex_condition(coords: &DMatrix<f64>, members: &[usize], dim: usize) -> f64 {
    let k = dim + 1;
    let s = DMatrix::from_fn(k, k, |r, c| if r < dim { coords[(members[c], r)] } else { 1.0 });
    let sv = s.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn combinations(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(pos) = (0..k).rev().find(|&p| idx[p] != p + n - k) else {
            return;
        };
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Computes barycentric weights of `owner` over its `neighbors`.
///
/// `distance(a, b)` returns the measured distance between two agents among
/// `{owner} ∪ neighbors`, or `None` when the pair was not measured.
pub fn compute_barycentric_row(
    owner: AgentId,
    neighbors: &[AgentId],
    distance: impl Fn(AgentId, AgentId) -> Option<f64>,
    dim: usize,
) -> Result<BarycentricRow, AppError> {
    let k = dim + 1;
    if neighbors.len() < k {
        return Err(AppError::InsufficientNeighbors {
            owner,
            available: neighbors.len(),
            required: k,
        });
    }
    let mut candidates: Vec<(f64, Vec<usize>, DMatrix<f64>)> = Vec::new();
    combinations(neighbors.len(), k, |pick| {
        let points: Vec<AgentId> = std::iter::once(owner).chain(pick.iter().map(|&p| neighbors[p])).collect();
        let m = points.len();
        let mut sq = DMatrix::<f64>::zeros(m, m);
        for a in 0..m {
            for b in a + 1..m {
                let Some(d) = distance(points[a], points[b]) else {
                    return;
                };
                sq[(a, b)] = d * d;
                sq[(b, a)] = d * d;
            }
        }
        let coords = classical_mds(&sq, dim);
        let members: Vec<usize> = (1..m).collect();
        let cond = simplex_condition(&coords, &members, dim);
        candidates.push((cond, pick.to_vec(), coords));
    });
    let Some(best) = candidates.iter().map(|c| c.0).min_by(f64::total_cmp) else {
        return Err(AppError::InsufficientNeighbors {
            owner,
            available: 0,
            required: k,
        });
    };
    if best.is_nan() || best > MAX_SIMPLEX_CONDITION {
        return Err(AppError::DegenerateGeometry { owner, condition: best });
    }
    let cutoff = (best * SIMPLEX_SPREAD).min(MAX_SIMPLEX_CONDITION);
    let selected: Vec<_> = candidates.iter().filter(|c| c.0 <= cutoff).collect();
    let mut sum: BTreeMap<AgentId, f64> = BTreeMap::new();
    for (_, pick, coords) in &selected {
        let w = simplex_weights(coords, dim)?;
        for (&p, w) in pick.iter().zip(w) {
            *sum.entry(neighbors[p]).or_insert(0.0) += w;
        }
    }
    let count = selected.len() as f64;
    let weights = sum.into_iter().map(|(j, w)| (j, w / count)).collect();
    Ok(BarycentricRow { owner, weights })
}

/// Affine weights of point 0 over points `1..=dim+1` of an embedding.
fn simplex_weights(coords: &DMatrix<f64>, dim: usize) -> Result<Vec<f64>, AppError> {
    let k = dim + 1;
    let s = DenseMatrix::new(
        k,
        k,
        (0..k)
            .flat_map(|r| (0..k).map(move |c| (r, c)))
            .map(|(r, c)| if r < dim { coords[(c + 1, r)] } else { 1.0 })
            .collect(),
    )?;
    let mut target: Vec<f64> = (0..dim).map(|r| coords[(0, r)]).collect();
    target.push(1.0);
    Ok(direct_solve(&s, &DenseVector::new(target)?)?.into_inner())
}

/// Weights solving the affine system directly from known positions; used as
/// a reference in tests.
pub fn weights_from_positions(owner: &[f64], simplex: &[&[f64]]) -> Result<Vec<f64>, AppError> {
    let dim = owner.len();
    let k = dim + 1;
    if simplex.len() != k {
        return Err(AppError::InvalidParameter(format!("expected {k} simplex points")));
    }
    let s = DenseMatrix::new(
        k,
        k,
        (0..k)
            .flat_map(|r| (0..k).map(move |c| (r, c)))
            .map(|(r, c)| if r < dim { simplex[c][r] } else { 1.0 })
            .collect(),
    )?;
    let mut target = owner.to_vec();
    target.push(1.0);
    Ok(direct_solve(&s, &DenseVector::new(target)?)?.into_inner())
}
