#![allow(dead_code)]

use dcg_core::linalg::{dot, DenseMatrix};
use dcg_core::network::generate_geometric_network;
use dcg_core::Network;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `G^T G / n + shift I` with uniform entries in `G`.
pub fn dense_spd(n: usize, shift: f64, seed: u64) -> DenseMatrix {
    let mut rng = rng(seed);
    let g: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let g = DenseMatrix::new(n, n, g).unwrap();
    let mut a = g.transpose().matmul(&g).unwrap().scale(1.0 / n as f64);
    for i in 0..n {
        a[(i, i)] += shift;
    }
    a
}

/// Symmetric, strictly diagonally dominant matrix with the sparsity of `net`.
pub fn sparse_spd(net: &Network, seed: u64) -> DenseMatrix {
    let n = net.n();
    let mut rng = rng(seed);
    let mut a = DenseMatrix::zeros(n, n);
    for (i, j) in net.edges() {
        let v = rng.random_range(-1.0..1.0);
        a[(i, j)] = v;
        a[(j, i)] = v;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
        a[(i, i)] = off + rng.random_range(0.5..1.5);
    }
    a
}

pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// A connected random geometric network with `n` agents.
pub fn connected_network(n: usize, seed: u64) -> Network {
    if n < 4 {
        return Network::path(n);
    }
    let range = (3.0 / n as f64).sqrt().min(1.5);
    (seed..)
        .map(|s| generate_geometric_network(n, 2, range, s).unwrap())
        .find(Network::is_connected)
        .unwrap()
}

/// SPD test system number `seed`: dense on a complete graph for even seeds,
/// network-sparse on a geometric graph for odd ones.
pub fn spd_case(seed: u64) -> (DenseMatrix, Vec<f64>, Network) {
    let n = 2 + (seed as usize * 7) % 19;
    let b = random_vector(n, seed ^ 0xb);
    if seed.is_multiple_of(2) {
        (dense_spd(n, 0.5, seed), b, Network::complete(n))
    } else {
        let net = connected_network(n, seed);
        (sparse_spd(&net, seed), b, net)
    }
}

pub fn rel_error(x: &[f64], reference: &[f64]) -> f64 {
    let diff: Vec<f64> = x.iter().zip(reference).map(|(a, b)| a - b).collect();
    dot(&diff, &diff).sqrt() / dot(reference, reference).sqrt().max(f64::MIN_POSITIVE)
}

/// One iteration of the centralized reference: `(alpha, |r|^2)`.
#[derive(Debug, Clone, Copy)]
pub struct CgStep {
    pub alpha: f64,
    pub residual_sq: f64,
}

/// Textbook conjugate gradient from `x = 0` with `r = A x - b` recomputed
/// every iteration and the same stopping rule as the distributed solver.
pub fn central_cg(a: &DenseMatrix, b: &[f64], epsilon: f64, max_iters: usize) -> (Vec<f64>, Vec<CgStep>) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut rr_prev = f64::NAN;
    let mut steps = Vec::new();
    for t in 0..max_iters {
        let ax = a.mul_vec(&x).unwrap();
        let r: Vec<f64> = ax.iter().zip(b).map(|(v, bi)| v - bi).collect();
        let rr = dot(&r, &r);
        if rr < epsilon {
            break;
        }
        let beta = if t == 0 { 0.0 } else { rr / rr_prev };
        for (di, ri) in d.iter_mut().zip(&r) {
            *di = -ri + beta * *di;
        }
        let ad = a.mul_vec(&d).unwrap();
        let alpha = rr / dot(&d, &ad);
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += alpha * di;
        }
        steps.push(CgStep { alpha, residual_sq: rr });
        let next: f64 = r.iter().zip(&ad).map(|(ri, ti)| (ri + alpha * ti).powi(2)).sum();
        if next < epsilon {
            break;
        }
        rr_prev = rr;
    }
    (x, steps)
}
