mod common;

use common::{central_cg, rel_error, spd_case};
use dcg_core::apps::noise::perturb_rows;
use dcg_core::linalg::{direct_solve, eigen_extremes_spd, spectral_norm, DenseMatrix, DenseVector, POWER_TOL};
use dcg_core::solvers::{default_epsilon, run_dcg};
use dcg_core::system::{rhs_norm_sq, rows_from_dense_vector};
use dcg_core::{DcgMode, Network, SolverConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn solve(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    direct_solve(a, &DenseVector::new(b.to_vec()).unwrap()).unwrap().into_inner()
}

fn column(estimates: &[Vec<f64>]) -> Vec<f64> {
    estimates.iter().map(|e| e[0]).collect()
}

#[test]
fn matches_direct_solve_on_seeded_suite() {
    for seed in 0..100 {
        let (a, b, net) = spd_case(seed);
        let rows = rows_from_dense_vector(&a, &b).unwrap();
        let config = SolverConfig::default().with_epsilon(1e-24 * (1.0 + rhs_norm_sq(&rows)));
        let run = run_dcg(&rows, &net, &config, None, false).unwrap();
        let x = column(&run.trace.final_estimates);
        let err = rel_error(&x, &solve(&a, &b));
        assert!(err < 1e-6, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn terminates_within_n_plus_two_iterations() {
    for seed in 0..100 {
        let (a, b, net) = spd_case(seed);
        let rows = rows_from_dense_vector(&a, &b).unwrap();
        let run = run_dcg(&rows, &net, &SolverConfig::default(), None, false).unwrap();
        assert!(run.converged(), "seed {seed} did not converge");
        assert!(
            run.outer_iterations <= a.rows() + 2,
            "seed {seed}: {} iterations for n = {}",
            run.outer_iterations,
            a.rows()
        );
    }
}

#[test]
fn strict_mode_respects_round_bound() {
    for seed in 0..40 {
        let (a, b, net) = spd_case(seed);
        let n = a.rows();
        let rows = rows_from_dense_vector(&a, &b).unwrap();
        let config = SolverConfig::default().with_mode(DcgMode::Strict);
        let run = run_dcg(&rows, &net, &config, None, false).unwrap();
        assert!(run.converged());
        assert!(run.engine_rounds() <= 4 * run.horizon * n, "seed {seed}");
    }
}

#[test]
fn strict_and_cached_modes_agree() {
    for seed in 0..20 {
        let (a, b, net) = spd_case(seed);
        let rows = rows_from_dense_vector(&a, &b).unwrap();
        let cached = run_dcg(&rows, &net, &SolverConfig::default(), None, false).unwrap();
        let strict = run_dcg(&rows, &net, &SolverConfig::default().with_mode(DcgMode::Strict), None, false).unwrap();
        assert_eq!(cached.outer_iterations, strict.outer_iterations);
        assert!(strict.engine_rounds() > cached.engine_rounds());
        let x = column(&cached.trace.final_estimates);
        let y = column(&strict.trace.final_estimates);
        assert!(rel_error(&x, &y) < 1e-9, "seed {seed}");
    }
}

#[test]
fn trace_matches_central_cg() {
    for seed in 0..20 {
        let (a, b, net) = spd_case(seed);
        let rows = rows_from_dense_vector(&a, &b).unwrap();
        let eps = default_epsilon(&rows);
        let run = run_dcg(&rows, &net, &SolverConfig::default(), None, false).unwrap();
        let (_, reference) = central_cg(&a, &b, eps, 10 * a.rows());
        assert_eq!(run.history.len(), reference.len(), "seed {seed}");
        for (got, want) in run.history.iter().zip(&reference) {
            let da = (got.alpha[0] - want.alpha).abs() / want.alpha.abs();
            let dr = (got.residual_sq[0] - want.residual_sq).abs() / want.residual_sq;
            assert!(da < 1e-9 && dr < 1e-9, "seed {seed} iteration {}: {da:e} {dr:e}", got.iteration);
        }
    }
}

#[test]
fn agents_agree_on_global_scalars_bitwise() {
    for seed in [1, 4, 9] {
        let (a, b, net) = spd_case(seed);
        let rows = rows_from_dense_vector(&a, &b).unwrap();
        let run = run_dcg(&rows, &net, &SolverConfig::default(), None, false).unwrap();
        let first = run.agents[0].history();
        for agent in &run.agents[1..] {
            for (x, y) in agent.history().iter().zip(first) {
                assert_eq!(x.alpha[0].to_bits(), y.alpha[0].to_bits());
                assert_eq!(x.residual_sq[0].to_bits(), y.residual_sq[0].to_bits());
            }
        }
    }
}

#[test]
fn multi_column_rhs_solves_each_column() {
    let (a, _, net) = spd_case(3);
    let n = a.rows();
    let b0 = common::random_vector(n, 1);
    let b1 = common::random_vector(n, 2);
    let rhs = DenseMatrix::new(n, 2, b0.iter().zip(&b1).flat_map(|(x, y)| [*x, *y]).collect()).unwrap();
    let rows = dcg_core::system::rows_from_dense(&a, &rhs).unwrap();
    let config = SolverConfig::default().with_epsilon(1e-24 * (1.0 + rhs_norm_sq(&rows)));
    let run = run_dcg(&rows, &net, &config, None, false).unwrap();
    let x0: Vec<f64> = run.trace.final_estimates.iter().map(|e| e[0]).collect();
    let x1: Vec<f64> = run.trace.final_estimates.iter().map(|e| e[1]).collect();
    assert!(rel_error(&x0, &solve(&a, &b0)) < 1e-6);
    assert!(rel_error(&x1, &solve(&a, &b1)) < 1e-6);
}

#[test]
fn horizon_override_below_diameter_fails_to_complete_sync() {
    let net = Network::path(5);
    let a = common::sparse_spd(&net, 3);
    let rows = rows_from_dense_vector(&a, &[1.0; 5]).unwrap();
    let err = run_dcg(&rows, &net, &SolverConfig::default().with_horizon(2), None, false).unwrap_err();
    assert!(err.to_string().contains("incomplete"), "{err}");
}

#[test]
fn converges_under_bounded_symmetric_noise() {
    for seed in 0..20u64 {
        let (a, b, net) = spd_case(seed);
        let n = a.rows();
        let lambda_min = eigen_extremes_spd(&a, POWER_TOL).unwrap().lambda_min;
        // Symmetric perturbation on the sparsity pattern, scaled to 0.9 lambda_min.
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let mut delta = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                if a[(i, j)] != 0.0 {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    delta[(i, j)] = v;
                    delta[(j, i)] = v;
                }
            }
        }
        let delta = delta.scale(0.9 * lambda_min / spectral_norm(&delta, POWER_TOL).unwrap());
        let db: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
        let rows = rows_from_dense_vector(&a, &b).unwrap();
        let noisy = perturb_rows(&rows, &delta, &DenseMatrix::new(n, 1, db.clone()).unwrap()).unwrap();
        let config = SolverConfig::default().with_epsilon(1e-24 * (1.0 + rhs_norm_sq(&noisy)));
        let run = run_dcg(&noisy, &net, &config, None, false).unwrap();
        let target_b: Vec<f64> = b.iter().zip(&db).map(|(x, y)| x + y).collect();
        let expected = solve(&a.add(&delta).unwrap(), &target_b);
        let err = rel_error(&column(&run.trace.final_estimates), &expected);
        assert!(err < 1e-6, "seed {seed}: {err:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_spd_systems_solve(n in 2usize..12, seed in any::<u64>()) {
        let a = common::dense_spd(n, 0.3, seed);
        let b = common::random_vector(n, seed.wrapping_add(1));
        let rows = rows_from_dense_vector(&a, &b).unwrap();
        let config = SolverConfig::default().with_epsilon(1e-24 * (1.0 + rhs_norm_sq(&rows)));
        let run = run_dcg(&rows, &Network::complete(n), &config, None, false).unwrap();
        prop_assert!(rel_error(&column(&run.trace.final_estimates), &solve(&a, &b)) < 1e-6);
        prop_assert!(run.outer_iterations <= 10 * n);
    }
}
