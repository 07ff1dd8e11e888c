//! Additive perturbations of a distributed system.
//!
//! Matrix noise is drawn once per unordered pair `{i, j}` of the sparsity
//! pattern and applied to both `A[i][j]` and `A[j][i]`, so a symmetric system
//! stays symmetric and no new nonzeros appear.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::apps::AppError;
use crate::linalg::{eigen_extremes_spd, spectral_norm, DenseMatrix, POWER_TOL};
use crate::system::{check_rows, rows_to_dense, RowSlice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    /// Uniform in `[-scale, scale]`.
    Uniform,
    /// Normal with standard deviation `scale`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub matrix_noise_scale: f64,
    pub rhs_noise_scale: f64,
    pub seed: u64,
    pub distribution: NoiseDistribution,
}

impl NoiseModel {
    fn validate(&self) -> Result<(), AppError> {
        for s in [self.matrix_noise_scale, self.rhs_noise_scale] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(AppError::InvalidParameter(format!("noise scale must be >= 0, got {s}")));
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.distribution {
            NoiseDistribution::Uniform => rng.random_range(-1.0..=1.0),
            NoiseDistribution::Gaussian => StandardNormal.sample(rng),
        }
    }
}

/// Symmetric perturbation of `rows`' sparsity pattern and the right-hand
/// side perturbation, drawn from `model`.
pub fn draw_noise(rows: &[RowSlice], model: &NoiseModel) -> Result<(DenseMatrix, DenseMatrix), AppError> {
    model.validate()?;
    let (n, width) = check_rows(rows)?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut delta_a = DenseMatrix::zeros(n, n);
    for row in rows {
        let i = row.owner();
        for &(j, _) in row.coefficients() {
            if j < i && rows[j].coefficient(i) != 0.0 {
                continue;
            }
            let v = model.matrix_noise_scale * model.draw(&mut rng);
            delta_a[(i, j)] = v;
            if rows[j].coefficient(i) != 0.0 {
                delta_a[(j, i)] = v;
            }
        }
    }
    let mut delta_b = DenseMatrix::zeros(n, width);
    for i in 0..n {
        for c in 0..width {
            delta_b[(i, c)] = model.rhs_noise_scale * model.draw(&mut rng);
        }
    }
    Ok((delta_a, delta_b))
}

/// Adds `delta_a` (which must stay inside the sparsity pattern) and `delta_b`.
pub fn perturb_rows(rows: &[RowSlice], delta_a: &DenseMatrix, delta_b: &DenseMatrix) -> Result<Vec<RowSlice>, AppError> {
    let (n, width) = check_rows(rows)?;
    if delta_a.rows() != n || delta_a.cols() != n || delta_b.rows() != n || delta_b.cols() != width {
        return Err(AppError::InvalidParameter("perturbation shape does not match the system".into()));
    }
    rows.iter()
        .map(|row| {
            let i = row.owner();
            for j in 0..n {
                if delta_a[(i, j)] != 0.0 && row.coefficient(j) == 0.0 {
                    return Err(AppError::SparsityViolation { owner: i, column: j });
                }
            }
            let coeffs: Vec<(usize, f64)> = row
                .coefficients()
                .iter()
                .map(|&(j, a)| (j, a + delta_a[(i, j)]))
                .collect();
            let rhs = row.rhs().iter().enumerate().map(|(c, b)| b + delta_b[(i, c)]).collect();
            Ok(RowSlice::new(i, coeffs, rhs)?)
        })
        .collect()
}

/// `lambda_min(A) - |delta_a|_2`; positive means convergence is guaranteed.
pub fn lemma_margin(a: &DenseMatrix, delta_a: &DenseMatrix) -> Result<f64, AppError> {
    let extremes = eigen_extremes_spd(a, POWER_TOL)?;
    Ok(extremes.lambda_min - spectral_norm(delta_a, POWER_TOL)?)
}

/// Perturbs `rows` according to `model` and reports the stability margin.
pub fn inject_noise(rows: &[RowSlice], model: &NoiseModel) -> Result<(Vec<RowSlice>, f64), AppError> {
    let (delta_a, delta_b) = draw_noise(rows, model)?;
    let noisy = perturb_rows(rows, &delta_a, &delta_b)?;
    let (a, _) = rows_to_dense(rows)?;
    Ok((noisy, lemma_margin(&a, &delta_a)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::rows_from_dense_vector;

    fn model(ms: f64, rs: f64) -> NoiseModel {
        NoiseModel {
            matrix_noise_scale: ms,
            rhs_noise_scale: rs,
            seed: 11,
            distribution: NoiseDistribution::Uniform,
        }
    }

    #[test]
    fn zero_scales_leave_rows_unchanged() {
        let a = DenseMatrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let rows = rows_from_dense_vector(&a, &[1.0, 2.0]).unwrap();
        let (noisy, margin) = inject_noise(&rows, &model(0.0, 0.0)).unwrap();
        assert_eq!(noisy, rows);
        assert!((margin - 1.0).abs() < 1e-8);
    }

    #[test]
    fn diagonal_shift_margin() {
        let a = DenseMatrix::identity(3).scale(2.0);
        let delta = DenseMatrix::identity(3).scale(0.5);
        assert!((lemma_margin(&a, &delta).unwrap() - 1.5).abs() < 1e-9);
    }

    #[test]
    fn noise_is_symmetric_and_local() {
        let a = DenseMatrix::from_rows(&[[4.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 4.0]]).unwrap();
        let rows = rows_from_dense_vector(&a, &[1.0, 2.0, 3.0]).unwrap();
        let (noisy, _) = inject_noise(&rows, &model(0.1, 0.1)).unwrap();
        let (na, _) = rows_to_dense(&noisy).unwrap();
        na.check_symmetric(0.0).unwrap();
        assert_eq!(na[(0, 2)], 0.0);
        assert_eq!(na[(2, 0)], 0.0);
        assert_ne!(na[(0, 1)], 1.0);
    }

    #[test]
    fn out_of_pattern_perturbation_rejected() {
        let rows = rows_from_dense_vector(&DenseMatrix::identity(2), &[1.0, 1.0]).unwrap();
        let delta = DenseMatrix::from_rows(&[[0.0, 0.1], [0.1, 0.0]]).unwrap();
        assert!(matches!(
            perturb_rows(&rows, &delta, &DenseMatrix::zeros(2, 1)),
            Err(AppError::SparsityViolation { .. })
        ));
    }
}
