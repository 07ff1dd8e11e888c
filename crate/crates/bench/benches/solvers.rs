use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dcg_core::apps::localization::{dcg_loc, generate_valid_scene, SceneParams};
use dcg_core::apps::normal::{assemble_normal_rows, random_local_system};
use dcg_core::network::generate_geometric_network;
use dcg_core::solvers::{default_richardson_omega, richardson_agents, run_dcg, run_stationary, synchronize_vector};
use dcg_core::{DcgMode, Network, RowSlice, SolverConfig};

fn connected(n: usize, range: f64) -> Network {
    (0..)
        .map(|seed| generate_geometric_network(n, 2, range, seed).unwrap())
        .find(Network::is_connected)
        .unwrap()
}

fn normal_system(n: usize) -> (Vec<RowSlice>, Network) {
    let net = connected(n, (4.0 / n as f64).sqrt());
    let raw = random_local_system(&net, 1, 1).unwrap();
    (assemble_normal_rows(&raw, &net).unwrap(), net)
}

fn dcg(c: &mut Criterion) {
    let mut group = c.benchmark_group("dcg");
    for n in [20, 50, 100] {
        let (rows, net) = normal_system(n);
        for mode in [DcgMode::Strict, DcgMode::Cached] {
            let config = SolverConfig::default().with_mode(mode);
            group.bench_with_input(BenchmarkId::new(format!("{mode:?}").to_lowercase(), n), &n, |b, _| {
                b.iter(|| run_dcg(&rows, &net, &config, None, false).unwrap())
            });
        }
    }
    group.finish();
}

fn richardson(c: &mut Criterion) {
    let mut group = c.benchmark_group("richardson_1000_iterations");
    for n in [20, 50] {
        let (rows, net) = normal_system(n);
        let omega = default_richardson_omega(&rows).unwrap();
        let config = SolverConfig::default().with_epsilon(f64::MIN_POSITIVE);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                let agents = richardson_agents(&rows, &net, omega).unwrap();
                run_stationary(agents, &rows, &net, &config, 1000, None, false).unwrap()
            })
        });
    }
    group.finish();
}

fn sync(c: &mut Criterion) {
    let mut group = c.benchmark_group("synchronize_vector");
    for n in [50, 200] {
        let net = connected(n, (4.0 / n as f64).sqrt());
        let horizon = net.hop_diameter().unwrap().hops();
        let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| synchronize_vector(&net, &values, horizon).unwrap())
        });
    }
    group.finish();
}

fn assembly(c: &mut Criterion) {
    let net = connected(100, 0.2);
    let raw = random_local_system(&net, 1, 1).unwrap();
    c.bench_function("assemble_normal_rows/100", |b| b.iter(|| assemble_normal_rows(&raw, &net).unwrap()));
}

fn localization(c: &mut Criterion) {
    let params = SceneParams {
        n: 30,
        dim: 2,
        anchors: 3,
        reception_range: 0.5,
    };
    let scene = generate_valid_scene(params, 7, 20).unwrap().scene;
    let config = SolverConfig::default().with_mode(DcgMode::Strict);
    let mut group = c.benchmark_group("localization");
    group.sample_size(10);
    group.bench_function("dcg_loc/30", |b| b.iter(|| dcg_loc(&scene, &config, false).unwrap()));
    group.finish();
}

criterion_group!(benches, dcg, richardson, sync, assembly, localization);
criterion_main!(benches);
