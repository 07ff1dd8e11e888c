//! Dense linear algebra used as the centralized oracle and for diagnostics.
//!
//! Everything here is deliberately small and dense: systems handled by the
//! simulator are desk-scale (a few hundred unknowns at most), and keeping the
//! oracles free of sparse machinery makes them easy to trust.

use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Default relative tolerance for the power-iteration estimators.
pub const POWER_TOL: f64 = 1e-10;
/// Default iteration cap for the power-iteration estimators.
pub const POWER_MAX_ITERS: usize = 100_000;

const PIVOT_REL_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite entry at position {0}")]
    NonFinite(usize),
    #[error("matrix is singular (pivot {pivot:e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error("zero diagonal entry at row {0}")]
    ZeroDiagonal(usize),
    #[error("power iteration did not converge after {iterations} iterations (best estimate {best_estimate})")]
    NoConvergence { iterations: usize, best_estimate: f64 },
    #[error("value {0} outside the open interval (0, 1)")]
    OutOfDomain(f64),
    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| exceeds tolerance")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is not positive definite (lambda_min estimate {0:e})")]
    NotPositiveDefinite(f64),
}

/// Row-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite(pos));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(LinalgError::DimensionMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += self[(i, k)] * other[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                actual: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<Self, LinalgError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<Self, LinalgError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    fn zip_with(&self, other: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> Result<Self, LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.rows * self.cols,
                actual: other.rows * other.cols,
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Fails on the first pair `(i, j)` whose entries differ by more than `tol`.
    pub fn check_symmetric(&self, tol: f64) -> Result<(), LinalgError> {
        self.require_square()?;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    fn require_square(&self) -> Result<(), LinalgError> {
        if self.is_square() {
            Ok(())
        } else {
            Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Finite real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self, LinalgError> {
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite(pos));
        }
        Ok(Self(entries))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm2(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<usize> for DenseVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// LU factorization with partial pivoting, `P A = L U` stored in place.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &DenseMatrix) -> Result<Self, LinalgError> {
        a.require_square()?;
        let n = a.rows();
        let threshold = PIVOT_REL_TOL * a.max_abs();
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= threshold || pivot == 0.0 {
                return Err(LinalgError::SingularMatrix { column: k, pivot });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let diag = lu[k * n + k];
            for i in (k + 1)..n {
                let factor = lu[i * n + k] / diag;
                lu[i * n + k] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        lu[i * n + j] -= factor * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                actual: b.len(),
            });
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let (done, rest) = y.split_at_mut(i);
            let row = &self.lu[i * n..i * n + i];
            rest[0] = row.iter().zip(done.iter()).fold(rest[0], |acc, (l, v)| acc - l * v);
        }
        for i in (0..n).rev() {
            let (head, done) = y.split_at_mut(i + 1);
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let acc = row.iter().zip(done.iter()).fold(head[i], |acc, (u, v)| acc - u * v);
            head[i] = acc / self.lu[i * n + i];
        }
        Ok(y)
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn direct_solve(a: &DenseMatrix, b: &DenseVector) -> Result<DenseVector, LinalgError> {
    if b.len() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.rows(),
            actual: b.len(),
        });
    }
    DenseVector::new(Lu::factor(a)?.solve(b.as_slice())?)
}

/// Solves `a X = rhs` column by column with a single factorization.
pub fn solve_matrix(a: &DenseMatrix, rhs: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    if rhs.rows() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.rows(),
            actual: rhs.rows(),
        });
    }
    let lu = Lu::factor(a)?;
    let mut out = DenseMatrix::zeros(rhs.rows(), rhs.cols());
    for j in 0..rhs.cols() {
        let col = lu.solve(&rhs.column(j))?;
        for (i, v) in col.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitScheme {
    Jacobi,
    GaussSeidel,
}

/// `a = m - n_mat` with `m` non-singular.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub m: DenseMatrix,
    pub n_mat: DenseMatrix,
}

/// Splits `a = D - L - U` where `-L` and `-U` are the strict lower and upper
/// triangles. Jacobi takes `M = D`, Gauss-Seidel takes `M = D - L`.
pub fn matrix_split(a: &DenseMatrix, scheme: SplitScheme) -> Result<SplitPair, LinalgError> {
    a.require_square()?;
    let n = a.rows();
    let mut m = DenseMatrix::zeros(n, n);
    let mut n_mat = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = a[(i, j)];
            match (i.cmp(&j), scheme) {
                (std::cmp::Ordering::Equal, _) => m[(i, j)] = v,
                (std::cmp::Ordering::Greater, SplitScheme::GaussSeidel) => m[(i, j)] = v,
                _ => n_mat[(i, j)] = -v,
            }
        }
    }
    match scheme {
        SplitScheme::Jacobi => {
            if let Some(i) = (0..n).find(|&i| a[(i, i)] == 0.0) {
                return Err(LinalgError::ZeroDiagonal(i));
            }
        }
        SplitScheme::GaussSeidel => {
            Lu::factor(&m)?;
        }
    }
    Ok(SplitPair { m, n_mat })
}

/// `G = M^{-1} N`.
pub fn iteration_matrix(split: &SplitPair) -> Result<DenseMatrix, LinalgError> {
    solve_matrix(&split.m, &split.n_mat)
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = norm2(v);
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn start_vectors(n: usize) -> [Vec<f64>; 2] {
    let ones = vec![1.0; n];
    let mut e1 = vec![0.0; n];
    if n > 0 {
        e1[0] = 1.0;
    }
    [ones, e1]
}

/// Dominant-eigenvalue magnitude of a general square matrix.
///
/// Iterates on `g^2` so that a real pair `+/-lambda` of equal magnitude still
/// converges; the estimate is `sqrt(|g^2 x|)` for unit `x`. Runs from the
/// all-ones vector and from `e_1` and keeps the larger estimate. A complex
/// dominant pair does not converge and is reported as `NoConvergence`.
pub fn spectral_radius(g: &DenseMatrix, tol: f64, max_iters: usize) -> Result<f64, LinalgError> {
    g.require_square()?;
    let n = g.rows();
    if n == 0 {
        return Ok(0.0);
    }
    let g2 = g.matmul(g)?;
    let mut best: Option<f64> = None;
    let mut failure = None;
    for start in start_vectors(n) {
        match power_norm(&g2, start, tol, max_iters) {
            Ok(est) => best = Some(best.map_or(est, |b: f64| b.max(est))),
            Err(e) => failure = Some(e),
        }
    }
    match (best, failure) {
        (Some(b), None) => Ok(b.sqrt()),
        (_, Some(LinalgError::NoConvergence { iterations, best_estimate })) => Err(LinalgError::NoConvergence {
            iterations,
            best_estimate: best_estimate.sqrt().max(best.unwrap_or(0.0).sqrt()),
        }),
        (_, Some(e)) => Err(e),
        (None, None) => Ok(0.0),
    }
}

/// Power iteration returning the limit of `|a x|` for unit `x`.
fn power_norm(a: &DenseMatrix, mut x: Vec<f64>, tol: f64, max_iters: usize) -> Result<f64, LinalgError> {
    normalize(&mut x);
    let mut prev = f64::NAN;
    for _ in 0..max_iters {
        let mut y = a.mul_vec(&x)?;
        let est = normalize(&mut y);
        if est == 0.0 {
            return Ok(0.0);
        }
        if (est - prev).abs() <= tol * est {
            return Ok(est);
        }
        prev = est;
        x = y;
    }
    Err(LinalgError::NoConvergence {
        iterations: max_iters,
        best_estimate: prev,
    })
}

/// Largest Rayleigh quotient of a symmetric matrix (its top eigenvalue when
/// that eigenvalue is also dominant in magnitude, e.g. for PSD input).
fn power_rayleigh(a: &DenseMatrix, mut x: Vec<f64>, tol: f64, max_iters: usize) -> Result<f64, LinalgError> {
    normalize(&mut x);
    let mut prev = f64::NAN;
    for _ in 0..max_iters {
        let mut y = a.mul_vec(&x)?;
        let rq = dot(&x, &y);
        if normalize(&mut y) == 0.0 {
            return Ok(0.0);
        }
        if (rq - prev).abs() <= tol * rq.abs() {
            return Ok(rq);
        }
        prev = rq;
        x = y;
    }
    Err(LinalgError::NoConvergence {
        iterations: max_iters,
        best_estimate: prev,
    })
}

fn top_eigenvalue_psd(a: &DenseMatrix, tol: f64, max_iters: usize) -> Result<f64, LinalgError> {
    let mut best = f64::NEG_INFINITY;
    for start in start_vectors(a.rows()) {
        best = best.max(power_rayleigh(a, start, tol, max_iters)?);
    }
    Ok(best)
}

/// `tau = -ln(rho)` for a convergent iteration.
pub fn convergence_rate(rho: f64) -> Result<f64, LinalgError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(LinalgError::OutOfDomain(rho));
    }
    Ok(-rho.ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenExtremes {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl EigenExtremes {
    pub fn condition_number(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }

    /// Step size `2 / (lambda_max + lambda_min)` for Richardson iteration.
    pub fn richardson_omega(&self) -> f64 {
        2.0 / (self.lambda_max + self.lambda_min)
    }
}

/// Extreme eigenvalues of a symmetric positive-definite matrix.
///
/// `lambda_max` by power iteration on `a`; `lambda_min` from power iteration
/// on the shifted matrix `lambda_max I - a`.
pub fn eigen_extremes_spd(a: &DenseMatrix, tol: f64) -> Result<EigenExtremes, LinalgError> {
    a.check_symmetric(SYMMETRY_TOL)?;
    let n = a.rows();
    if n == 0 {
        return Err(LinalgError::NotPositiveDefinite(0.0));
    }
    let lambda_max = top_eigenvalue_psd(a, tol, POWER_MAX_ITERS)?;
    if lambda_max <= 0.0 {
        return Err(LinalgError::NotPositiveDefinite(lambda_max));
    }
    let shifted = DenseMatrix::identity(n).scale(lambda_max).sub(a)?;
    let spread = top_eigenvalue_psd(&shifted, tol, POWER_MAX_ITERS)?;
    let lambda_min = lambda_max - spread;
    if lambda_min <= 0.0 {
        return Err(LinalgError::NotPositiveDefinite(lambda_min));
    }
    Ok(EigenExtremes { lambda_min, lambda_max })
}

/// Spectral norm `sqrt(lambda_max(a^T a))`.
pub fn spectral_norm(a: &DenseMatrix, tol: f64) -> Result<f64, LinalgError> {
    let gram = a.transpose().matmul(a)?;
    if gram.rows() == 0 {
        return Ok(0.0);
    }
    Ok(top_eigenvalue_psd(&gram, tol, POWER_MAX_ITERS)?.max(0.0).sqrt())
}
