mod common;

use common::{connected_network, random_vector, rng, sparse_spd};
use dcg_core::apps::bary::weights_from_positions;
use dcg_core::apps::localization::{
    barycentric_rows, build_localization_rows, central_localization_matrices, generate_valid_scene, SceneParams,
};
use dcg_core::apps::noise::{inject_noise, NoiseDistribution, NoiseModel};
use dcg_core::apps::normal::{assemble_normal_rows, random_local_system};
use dcg_core::linalg::{norm2, DenseMatrix};
use dcg_core::solvers::run_dcg;
use dcg_core::system::{rhs_norm_sq, rows_from_dense_vector, rows_to_dense, RowSlice};
use dcg_core::SolverConfig;
use proptest::prelude::*;
use rand::Rng;

fn max_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.sub(b).unwrap().max_abs()
}

fn normal_equations(a: &DenseMatrix, b: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let at = a.transpose();
    (at.matmul(a).unwrap(), at.matmul(b).unwrap())
}

fn solve_tight(rows: &[RowSlice], net: &dcg_core::Network) -> Vec<f64> {
    let config = SolverConfig::default().with_epsilon(1e-26 * (1.0 + rhs_norm_sq(rows)));
    let run = run_dcg(rows, net, &config, None, false).unwrap();
    assert!(run.converged());
    run.trace.final_estimates.iter().map(|e| e[0]).collect()
}

#[test]
fn distributed_normal_assembly_matches_central_product() {
    for seed in 0..10 {
        let net = connected_network(5 + seed as usize * 3, seed);
        let raw = random_local_system(&net, 2, seed).unwrap();
        let assembled = assemble_normal_rows(&raw, &net).unwrap();
        let (a, b) = rows_to_dense(&raw).unwrap();
        let (ata, atb) = normal_equations(&a, &b);
        let (got_a, got_b) = rows_to_dense(&assembled).unwrap();
        assert!(max_diff(&got_a, &ata) <= 1e-12, "seed {seed}");
        assert!(max_diff(&got_b, &atb) <= 1e-12, "seed {seed}");
    }
}

#[test]
fn localization_assembly_matches_central_product() {
    for (dim, anchors, range) in [(2, 3, 0.5), (3, 4, 0.7)] {
        let params = SceneParams {
            n: 25,
            dim,
            anchors,
            reception_range: range,
        };
        let generated = generate_valid_scene(params, 3, 20).unwrap();
        let bary = barycentric_rows(&generated.scene).unwrap();
        let system = build_localization_rows(&generated.scene, &bary).unwrap();
        let (m, mu) = central_localization_matrices(&generated.scene, &bary).unwrap();
        let (mtm, mtmu) = normal_equations(&m, &mu);
        let (got_a, got_b) = rows_to_dense(&system.rows).unwrap();
        assert!(max_diff(&got_a, &mtm) <= 1e-12, "dim {dim}");
        assert!(max_diff(&got_b, &mtmu) <= 1e-12, "dim {dim}");
    }
}

#[test]
fn least_squares_solution_is_optimal() {
    let net = connected_network(15, 21);
    let raw = random_local_system(&net, 1, 21).unwrap();
    let rows = assemble_normal_rows(&raw, &net).unwrap();
    let x = solve_tight(&rows, &net);
    let (a, b) = rows_to_dense(&raw).unwrap();
    let b = b.column(0);
    let residual = |x: &[f64]| -> Vec<f64> { a.mul_vec(x).unwrap().iter().zip(&b).map(|(p, q)| p - q).collect() };
    let r = residual(&x);
    let gradient = a.transpose().mul_vec(&r).unwrap();
    assert!(norm2(&gradient) <= 1e-6, "gradient norm {:e}", norm2(&gradient));

    let best = norm2(&r);
    let mut rng = rng(99);
    for _ in 0..100 {
        let scale = 10f64.powf(rng.random_range(-6.0..0.0));
        let y: Vec<f64> = x.iter().map(|v| v + scale * rng.random_range(-1.0..1.0)).collect();
        assert!(norm2(&residual(&y)) >= best - 1e-12);
    }
}

#[test]
fn barycentric_weights_reconstruct_positions() {
    for (dim, anchors, range, seed) in [(2, 3, 0.5, 7), (2, 3, 0.4, 11), (3, 4, 0.7, 7)] {
        let params = SceneParams {
            n: 30,
            dim,
            anchors,
            reception_range: range,
        };
        let scene = generate_valid_scene(params, seed, 20).unwrap().scene;
        for row in barycentric_rows(&scene).unwrap() {
            assert!((row.weight_sum() - 1.0).abs() <= 1e-8, "agent {}", row.owner);
            let rebuilt = row.combine(scene.positions());
            for (p, q) in rebuilt.iter().zip(&scene.positions()[row.owner]) {
                assert!((p - q).abs() <= 1e-8, "agent {}: {p} vs {q}", row.owner);
            }
        }
    }
}

#[test]
fn single_simplex_weights_match_direct_affine_solve() {
    let simplex: [&[f64]; 3] = [&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]];
    let w = weights_from_positions(&[0.2, 0.3], &simplex).unwrap();
    for (got, want) in w.iter().zip([0.5, 0.2, 0.3]) {
        assert!((got - want).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn noise_stays_inside_sparsity_pattern(n in 4usize..20, seed in any::<u64>(), scale in 0.0f64..0.5, gaussian in any::<bool>()) {
        let net = connected_network(n, seed % 1000);
        let rows = rows_from_dense_vector(&sparse_spd(&net, seed), &random_vector(n, seed)).unwrap();
        let model = NoiseModel {
            matrix_noise_scale: scale,
            rhs_noise_scale: scale,
            seed,
            distribution: if gaussian { NoiseDistribution::Gaussian } else { NoiseDistribution::Uniform },
        };
        let (noisy, _) = inject_noise(&rows, &model).unwrap();
        let (a, _) = rows_to_dense(&rows).unwrap();
        let (noisy_a, _) = rows_to_dense(&noisy).unwrap();
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] == 0.0 {
                    prop_assert_eq!(noisy_a[(i, j)], 0.0);
                }
            }
        }
        let delta = noisy_a.sub(&a).unwrap();
        for (i, j) in net.edges() {
            prop_assert_eq!(delta[(i, j)], delta[(j, i)]);
        }
    }
}
