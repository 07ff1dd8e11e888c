mod common;

use dcg_core::linalg::{iteration_matrix, matrix_split, spectral_radius, DenseMatrix, SplitScheme, POWER_MAX_ITERS, POWER_TOL};
use dcg_core::sim::RunOptions;
use dcg_core::solvers::{gauss_seidel_agents, jacobi_agents, richardson_agents, run_stationary, SolverError};
use dcg_core::system::rows_from_dense_vector;
use dcg_core::{Network, SimError, SolverConfig};
use proptest::prelude::*;

fn jacobi_rho(a: &DenseMatrix) -> f64 {
    let g = iteration_matrix(&matrix_split(a, SplitScheme::Jacobi).unwrap()).unwrap();
    spectral_radius(&g, POWER_TOL, POWER_MAX_ITERS).unwrap()
}

fn richardson_rho(a: &DenseMatrix, omega: f64) -> f64 {
    let g = DenseMatrix::identity(a.rows()).sub(&a.scale(omega)).unwrap();
    spectral_radius(&g, POWER_TOL, POWER_MAX_ITERS).unwrap()
}

fn diverged(err: &SimError) -> bool {
    matches!(err, SimError::Agent { source: SolverError::DivergenceDetected(_), .. })
}

#[test]
fn jacobi_converges_iff_radius_below_one() {
    let net = Network::complete(2);
    let good = DenseMatrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap();
    assert!((jacobi_rho(&good) - 0.5).abs() < 1e-9);
    let rows = rows_from_dense_vector(&good, &[1.0, 2.0]).unwrap();
    let agents = jacobi_agents(&rows, &net).unwrap();
    let run = run_stationary(agents, &rows, &net, &SolverConfig::default(), 10_000, None, false).unwrap();
    assert!(run.converged());

    let bad = DenseMatrix::from_rows(&[[1.0, 1.2], [1.2, 1.0]]).unwrap();
    assert!((jacobi_rho(&bad) - 1.2).abs() < 1e-9);
    let rows = rows_from_dense_vector(&bad, &[1.0, 2.0]).unwrap();
    let agents = jacobi_agents(&rows, &net).unwrap();
    let err = run_stationary(agents, &rows, &net, &SolverConfig::default(), 10_000, None, false).unwrap_err();
    assert!(diverged(&err), "{err}");
}

#[test]
fn richardson_converges_iff_radius_below_one() {
    let net = Network::complete(2);
    let a = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 3.0]]).unwrap();
    assert!((richardson_rho(&a, 0.5) - 0.5).abs() < 1e-9);
    let rows = rows_from_dense_vector(&a, &[1.0, 1.0]).unwrap();
    let agents = richardson_agents(&rows, &net, 0.5).unwrap();
    assert!(run_stationary(agents, &rows, &net, &SolverConfig::default(), 10_000, None, false)
        .unwrap()
        .converged());

    let a = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]).unwrap();
    assert!((richardson_rho(&a, 1.1) - 1.2).abs() < 1e-9);
    let rows = rows_from_dense_vector(&a, &[1.0, 1.0]).unwrap();
    let agents = richardson_agents(&rows, &net, 1.1).unwrap();
    let err = run_stationary(agents, &rows, &net, &SolverConfig::default(), 10_000, None, false).unwrap_err();
    assert!(diverged(&err), "{err}");
}

#[test]
fn gauss_seidel_solves_diagonally_dominant_systems() {
    let net = common::connected_network(12, 5);
    let a = common::sparse_spd(&net, 5);
    let b = common::random_vector(12, 6);
    let rows = rows_from_dense_vector(&a, &b).unwrap();
    let agents = gauss_seidel_agents(&rows, &net).unwrap();
    let run = run_stationary(agents, &rows, &net, &SolverConfig::default(), 10_000, None, false).unwrap();
    assert!(run.converged());
    let expected = dcg_core::linalg::direct_solve(&a, &dcg_core::DenseVector::new(b).unwrap()).unwrap();
    let x: Vec<f64> = run.trace.final_estimates.iter().map(|e| e[0]).collect();
    assert!(common::rel_error(&x, expected.as_slice()) < 1e-4);
}

#[test]
fn two_hop_rows_converge_like_one_hop() {
    // Tridiagonal squared gives a pentadiagonal system on a path network.
    let n = 8;
    let net = Network::path(n);
    let t = common::sparse_spd(&net, 2);
    let a = t.matmul(&t).unwrap();
    let b = common::random_vector(n, 3);
    let rows = rows_from_dense_vector(&a, &b).unwrap();
    let agents = jacobi_agents(&rows, &net).unwrap();
    assert_eq!(agents[0].rounds_per_iteration(), 2);
    let omega = dcg_core::solvers::default_richardson_omega(&rows).unwrap();
    let agents = richardson_agents(&rows, &net, omega).unwrap();
    let run = run_stationary(agents, &rows, &net, &SolverConfig::default(), 100_000, None, false).unwrap();
    assert!(run.converged());
    assert_eq!(run.trace.round_count(), 2 * run.iterations);
}

#[test]
fn one_round_per_iteration_for_local_rows() {
    let net = Network::cycle(6);
    let a = common::sparse_spd(&net, 9);
    let rows = rows_from_dense_vector(&a, &[1.0; 6]).unwrap();
    let mut agents = jacobi_agents(&rows, &net).unwrap();
    let trace = dcg_core::sim::run_synchronous(&mut agents, &net, &RunOptions::new(7)).unwrap();
    assert_eq!(trace.round_count(), 7);
    assert_eq!(agents[0].iterations(), 7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn jacobi_outcome_follows_spectral_radius(off in -1.9f64..1.9, ratio in 0.5f64..2.0) {
        // [[1, off], [off * ratio, 1]] has Jacobi radius sqrt(|off^2 ratio|).
        let rho = (off * off * ratio).sqrt();
        prop_assume!((rho - 1.0).abs() > 0.05);
        let a = DenseMatrix::from_rows(&[[1.0, off], [off * ratio, 1.0]]).unwrap();
        prop_assert!((jacobi_rho(&a) - rho).abs() < 1e-6);
        let rows = rows_from_dense_vector(&a, &[1.0, -1.0]).unwrap();
        let net = Network::complete(2);
        let agents = jacobi_agents(&rows, &net).unwrap();
        let result = run_stationary(agents, &rows, &net, &SolverConfig::default(), 200_000, None, false);
        if rho < 1.0 {
            prop_assert!(result.unwrap().converged());
        } else {
            prop_assert!(diverged(&result.unwrap_err()));
        }
    }

    #[test]
    fn jacobi_radius_below_one_when_diagonally_dominant(seed in any::<u64>(), n in 2usize..10) {
        let net = Network::complete(n);
        let a = common::sparse_spd(&net, seed);
        prop_assert!(jacobi_rho(&a) < 1.0);
    }
}
