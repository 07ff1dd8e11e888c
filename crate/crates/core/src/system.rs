//! Row-distributed linear systems: each agent owns one row of `A X = b`.

use thiserror::Error;

use crate::linalg::{DenseMatrix, LinalgError};
use crate::network::{AgentId, Network};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("row {owner}: column {column} out of range for n = {n}")]
    ColumnOutOfRange { owner: AgentId, column: usize, n: usize },
    #[error("row {owner}: duplicate column {column}")]
    DuplicateColumn { owner: AgentId, column: usize },
    #[error("row {owner}: non-finite value")]
    NonFinite { owner: AgentId },
    #[error("row {owner}: column {column} is {hops:?} hops away, limit is {limit}")]
    NotLocal {
        owner: AgentId,
        column: usize,
        hops: Option<usize>,
        limit: usize,
    },
    #[error("rows disagree on the right-hand side width")]
    RaggedRhs,
    #[error("row {index} is owned by agent {owner}")]
    OwnerMismatch { index: usize, owner: AgentId },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One agent's row: the nonzeros of `A[i, :]` and the right-hand side `b[i, :]`.
///
/// Coefficients are kept sorted by column with exact zeros dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSlice {
    owner: AgentId,
    coefficients: Vec<(usize, f64)>,
    rhs: Vec<f64>,
}

impl RowSlice {
    pub fn new(
        owner: AgentId,
        coefficients: impl IntoIterator<Item = (usize, f64)>,
        rhs: Vec<f64>,
    ) -> Result<Self, SystemError> {
        let mut coefficients: Vec<_> = coefficients.into_iter().filter(|&(_, v)| v != 0.0).collect();
        coefficients.sort_by_key(|&(c, _)| c);
        if let Some(w) = coefficients.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(SystemError::DuplicateColumn { owner, column: w[0].0 });
        }
        if coefficients.iter().any(|(_, v)| !v.is_finite()) || rhs.iter().any(|v| !v.is_finite()) {
            return Err(SystemError::NonFinite { owner });
        }
        Ok(Self {
            owner,
            coefficients,
            rhs,
        })
    }

    pub fn owner(&self) -> AgentId {
        self.owner
    }

    pub fn coefficients(&self) -> &[(usize, f64)] {
        &self.coefficients
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Number of right-hand-side columns.
    pub fn width(&self) -> usize {
        self.rhs.len()
    }

    pub fn coefficient(&self, column: usize) -> f64 {
        self.coefficients
            .binary_search_by_key(&column, |&(c, _)| c)
            .map_or(0.0, |k| self.coefficients[k].1)
    }

    pub fn diagonal(&self) -> f64 {
        self.coefficient(self.owner)
    }

    /// `sum_j A[i, j] x_j` for one right-hand-side column.
    pub fn apply(&self, column_values: impl Fn(usize) -> f64) -> f64 {
        self.coefficients.iter().map(|&(j, a)| a * column_values(j)).sum()
    }

    /// Hop radius around the owner that covers every column of this row.
    pub fn reach(&self, net: &Network) -> Option<usize> {
        let dist = net.hop_distances(self.owner);
        self.coefficients
            .iter()
            .map(|&(j, _)| dist.get(j).copied().flatten())
            .try_fold(0, |acc, d| d.map(|d| acc.max(d)))
    }
}

/// Validates that `rows[i]` is owned by `i`, all columns are in range and the
/// right-hand sides share one width. Returns `(n, width)`.
pub fn check_rows(rows: &[RowSlice]) -> Result<(usize, usize), SystemError> {
    let n = rows.len();
    let width = rows.first().map_or(1, RowSlice::width);
    for (index, row) in rows.iter().enumerate() {
        if row.owner != index {
            return Err(SystemError::OwnerMismatch { index, owner: row.owner });
        }
        if row.width() != width {
            return Err(SystemError::RaggedRhs);
        }
        if let Some(&(column, _)) = row.coefficients.iter().find(|&&(c, _)| c >= n) {
            return Err(SystemError::ColumnOutOfRange { owner: index, column, n });
        }
    }
    Ok((n, width))
}

/// Checks every row only references agents within `limit` hops.
pub fn check_locality(rows: &[RowSlice], net: &Network, limit: usize) -> Result<(), SystemError> {
    for row in rows {
        let dist = net.hop_distances(row.owner);
        for &(column, _) in &row.coefficients {
            let hops = dist.get(column).copied().flatten();
            if hops.is_none_or(|h| h > limit) {
                return Err(SystemError::NotLocal {
                    owner: row.owner,
                    column,
                    hops,
                    limit,
                });
            }
        }
    }
    Ok(())
}

/// Largest hop reach over all rows (`None` if some column is unreachable).
pub fn system_reach(rows: &[RowSlice], net: &Network) -> Option<usize> {
    rows.iter().map(|r| r.reach(net)).try_fold(0, |acc, r| r.map(|r| acc.max(r)))
}

/// Splits a dense system into rows; `rhs` is `n x width`.
pub fn rows_from_dense(a: &DenseMatrix, rhs: &DenseMatrix) -> Result<Vec<RowSlice>, SystemError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        }
        .into());
    }
    if rhs.rows() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.rows(),
            actual: rhs.rows(),
        }
        .into());
    }
    (0..a.rows())
        .map(|i| RowSlice::new(i, a.row(i).iter().copied().enumerate(), rhs.row(i).to_vec()))
        .collect()
}

/// Convenience for a single right-hand-side column.
pub fn rows_from_dense_vector(a: &DenseMatrix, b: &[f64]) -> Result<Vec<RowSlice>, SystemError> {
    let rhs = DenseMatrix::new(b.len(), 1, b.to_vec())?;
    rows_from_dense(a, &rhs)
}

/// Reassembles `(A, B)` from rows.
pub fn rows_to_dense(rows: &[RowSlice]) -> Result<(DenseMatrix, DenseMatrix), SystemError> {
    let (n, width) = check_rows(rows)?;
    let mut a = DenseMatrix::zeros(n, n);
    let mut b = DenseMatrix::zeros(n, width);
    for row in rows {
        for &(j, v) in &row.coefficients {
            a[(row.owner, j)] = v;
        }
        for (c, &v) in row.rhs.iter().enumerate() {
            b[(row.owner, c)] = v;
        }
    }
    Ok((a, b))
}

/// `sum_i sum_c ((A x)_{ic} - b_{ic})^2` with `estimates[i][c]`.
pub fn residual_sq(rows: &[RowSlice], estimates: &[Vec<f64>]) -> f64 {
    rows.iter()
        .map(|row| {
            (0..row.width())
                .map(|c| {
                    let r = row.apply(|j| estimates[j][c]) - row.rhs[c];
                    r * r
                })
                .sum::<f64>()
        })
        .sum()
}

/// Squared Frobenius norm of the right-hand side.
pub fn rhs_norm_sq(rows: &[RowSlice]) -> f64 {
    rows.iter().flat_map(|r| r.rhs.iter()).map(|v| v * v).sum()
}

/// Mean over agents of the squared Euclidean error `|x_i - x*_i|^2`.
pub fn mean_squared_error(estimates: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    if estimates.is_empty() {
        return 0.0;
    }
    let total: f64 = estimates
        .iter()
        .zip(truth)
        .map(|(x, t)| x.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    total / estimates.len() as f64
}
