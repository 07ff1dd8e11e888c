//! Normal-equation assembly with one round of row exchange.
//!
//! Agent `i` broadcasts its row `A[i, :]` and `b[i, :]`. Afterwards it holds
//! every row `k` with `A[k, i] != 0` (itself and its neighbors) and forms
//! `(A^T A)[i, :] = sum_k A[k, i] A[k, :]` and `(A^T b)[i, :] = sum_k A[k, i] b[k, :]`,
//! summing `k` in ascending order like the dense product does.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::apps::AppError;
use crate::network::{AgentId, Network};
use crate::sim::{run_synchronous, Agent, HaltReason, Message, Outbox, Payload, RunOptions, Status};
use crate::solvers::SolverError;
use crate::system::{check_rows, RowSlice, SystemError};

/// Agent that shares its row once and assembles its row of `A^T A`.
#[derive(Debug, Clone)]
pub struct GramAssemblyAgent {
    row: RowSlice,
    output: Option<RowSlice>,
    placeholder: Vec<f64>,
}

impl GramAssemblyAgent {
    pub fn new(row: RowSlice) -> Self {
        Self {
            placeholder: vec![0.0; row.width()],
            row,
            output: None,
        }
    }

    pub fn output(&self) -> Option<&RowSlice> {
        self.output.as_ref()
    }
}

/// Coefficients and right-hand side received from one neighbor.
type SharedRow<'a> = (&'a [(usize, f64)], &'a [f64]);

impl Agent for GramAssemblyAgent {
    fn send(&mut self, _round: usize, outbox: &mut Outbox) {
        outbox.broadcast(Payload::RowShare {
            entries: self.row.coefficients().to_vec(),
            rhs: self.row.rhs().to_vec(),
        });
    }

    fn receive(&mut self, _round: usize, inbox: &[Message<'_>]) -> Result<Status, SolverError> {
        let me = self.row.owner();
        let mut sources: BTreeMap<AgentId, SharedRow<'_>> = BTreeMap::new();
        sources.insert(me, (self.row.coefficients(), self.row.rhs()));
        for msg in inbox {
            if let Payload::RowShare { entries, rhs } = msg.payload {
                sources.insert(msg.sender, (entries.as_slice(), rhs.as_slice()));
            }
        }
        let mut omega: BTreeMap<usize, f64> = BTreeMap::new();
        let mut beta = vec![0.0; self.row.width()];
        for (entries, rhs) in sources.values() {
            let Ok(pos) = entries.binary_search_by_key(&me, |&(c, _)| c) else {
                continue;
            };
            let a_ki = entries[pos].1;
            for &(j, a_kj) in entries.iter() {
                *omega.entry(j).or_insert(0.0) += a_ki * a_kj;
            }
            for (acc, &b) in beta.iter_mut().zip(rhs.iter()) {
                *acc += a_ki * b;
            }
        }
        if beta.len() != self.row.width() {
            return Err(SolverError::LengthMismatch {
                expected: self.row.width(),
                actual: beta.len(),
            });
        }
        self.output = Some(RowSlice::new(me, omega, beta)?);
        Ok(Status::Halted(HaltReason::Converged))
    }

    fn estimate(&self) -> &[f64] {
        &self.placeholder
    }
}

/// Checks that every nonzero of `rows` sits on the diagonal or at a neighbor.
pub fn check_sparsity(rows: &[RowSlice], net: &Network) -> Result<(), AppError> {
    for row in rows {
        for &(column, _) in row.coefficients() {
            if column != row.owner() && !net.is_neighbor(row.owner(), column) {
                return Err(AppError::SparsityViolation {
                    owner: row.owner(),
                    column,
                });
            }
        }
    }
    Ok(())
}

/// Rows of `A^T A` and `A^T B` computed by one round of neighbor exchange.
pub fn assemble_gram_rows(rows: &[RowSlice], net: &Network) -> Result<Vec<RowSlice>, AppError> {
    let (n, _) = check_rows(rows)?;
    if n != net.n() {
        return Err(AppError::InvalidParameter(format!(
            "{n} rows for a network of {} agents",
            net.n()
        )));
    }
    check_sparsity(rows, net)?;
    let mut agents: Vec<GramAssemblyAgent> = rows.iter().cloned().map(GramAssemblyAgent::new).collect();
    run_synchronous(&mut agents, net, &RunOptions::new(1))?;
    agents
        .into_iter()
        .map(|a| {
            a.output
                .ok_or_else(|| AppError::InvalidParameter("assembly did not complete".into()))
        })
        .collect()
}

/// Least squares via the normal equations: rows of `A^T A` and `A^T b`.
pub fn assemble_normal_rows(rows: &[RowSlice], net: &Network) -> Result<Vec<RowSlice>, AppError> {
    assemble_gram_rows(rows, net)
}

/// A random square system whose sparsity follows `net`, strictly diagonally
/// dominant so it is non-singular. Off-diagonals are uniform in `[-1, 1]`.
pub fn random_local_system(net: &Network, width: usize, seed: u64) -> Result<Vec<RowSlice>, SystemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..net.n())
        .map(|i| {
            let mut coeffs: Vec<(usize, f64)> = net
                .neighbors(i)
                .iter()
                .map(|&j| (j, rng.random_range(-1.0..=1.0)))
                .collect();
            let off: f64 = coeffs.iter().map(|(_, v): &(usize, f64)| v.abs()).sum();
            coeffs.push((i, off + 1.0 + rng.random::<f64>()));
            let rhs = (0..width).map(|_| rng.random_range(-1.0..=1.0)).collect();
            RowSlice::new(i, coeffs, rhs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::system::{rows_from_dense_vector, rows_to_dense};

    #[test]
    fn two_by_two_example() {
        let a = DenseMatrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let rows = rows_from_dense_vector(&a, &[3.0, 3.0]).unwrap();
        let out = assemble_normal_rows(&rows, &Network::complete(2)).unwrap();
        assert_eq!(out[0].coefficients(), &[(0, 5.0), (1, 4.0)]);
        assert_eq!(out[0].rhs(), &[9.0]);
        assert_eq!(out[1].rhs(), &[9.0]);
    }

    #[test]
    fn diagonal_and_identity() {
        let a = DenseMatrix::from_diag(&[2.0, -3.0, 0.5]);
        let rows = rows_from_dense_vector(&a, &[1.0, 2.0, 4.0]).unwrap();
        let out = assemble_normal_rows(&rows, &Network::path(3)).unwrap();
        let (omega, beta) = rows_to_dense(&out).unwrap();
        assert_eq!(omega, DenseMatrix::from_diag(&[4.0, 9.0, 0.25]));
        assert_eq!(beta.as_slice(), &[2.0, -6.0, 2.0]);

        let rows = rows_from_dense_vector(&DenseMatrix::identity(3), &[1.0, 2.0, 4.0]).unwrap();
        let out = assemble_normal_rows(&rows, &Network::path(3)).unwrap();
        assert_eq!(out, rows);
    }

    #[test]
    fn sparsity_violation_detected() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0, 1.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let rows = rows_from_dense_vector(&a, &[1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            assemble_normal_rows(&rows, &Network::path(3)),
            Err(AppError::SparsityViolation { owner: 0, column: 2 })
        ));
    }

    #[test]
    fn random_system_matches_pattern() {
        let net = Network::cycle(6);
        let rows = random_local_system(&net, 1, 3).unwrap();
        check_sparsity(&rows, &net).unwrap();
        assert_eq!(rows, random_local_system(&net, 1, 3).unwrap());
    }
}
