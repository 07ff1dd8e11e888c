mod common;

use dcg_core::sim::{run_synchronous, RunOptions, RunTrace};
use dcg_core::solvers::{dcg_agents, jacobi_agents, synchronize_vector};
use dcg_core::system::rows_from_dense_vector;
use dcg_core::{Network, SolverConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn fingerprint(trace: &RunTrace) -> (String, Vec<u64>) {
    let bits = trace.final_estimates.iter().flatten().map(|v| v.to_bits()).collect();
    (trace.to_csv(), bits)
}

fn dcg_trace(seed: u64, order: Option<Vec<usize>>) -> RunTrace {
    let (a, b, net) = common::spd_case(seed);
    let rows = rows_from_dense_vector(&a, &b).unwrap();
    let mut agents = dcg_agents(&rows, &net, &SolverConfig::default()).unwrap();
    let mut options = RunOptions::new(agents[0].round_budget()).system(&rows);
    if let Some(order) = order {
        options = options.step_order(order);
    }
    run_synchronous(&mut agents, &net, &options).unwrap()
}

#[test]
fn identical_inputs_give_identical_traces() {
    for seed in [3, 8, 15] {
        assert_eq!(fingerprint(&dcg_trace(seed, None)), fingerprint(&dcg_trace(seed, None)));
    }
}

#[test]
fn delivered_messages_equal_sent_messages_each_round() {
    let trace = dcg_trace(5, None);
    assert!(trace.round_count() > 0);
    for report in &trace.rounds {
        assert_eq!(report.messages_delivered, report.messages_sent);
        assert_eq!(report.bytes_modeled % 8, 0);
    }
    assert_eq!(trace.messages_total(), trace.rounds.iter().map(|r| r.messages_sent).sum::<usize>());
}

#[test]
fn halted_agents_stay_halted() {
    let trace = dcg_trace(7, None);
    for pair in trace.rounds.windows(2) {
        for (before, after) in pair[0].per_agent_halted.iter().zip(&pair[1].per_agent_halted) {
            assert!(!before || *after);
        }
    }
}

#[test]
fn synchronized_vectors_are_complete_after_diameter_rounds() {
    let net = common::connected_network(15, 2);
    let values = common::random_vector(15, 4);
    let h = net.hop_diameter().unwrap().hops();
    for pv in synchronize_vector(&net, &values, h).unwrap() {
        assert_eq!(pv.values().unwrap(), values.as_slice());
    }
    if h > 1 {
        let err = synchronize_vector(&net, &values, h - 1).unwrap_err();
        assert!(err.to_string().contains("incomplete"), "{err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn step_order_does_not_change_dcg(seed in 0u64..200, shuffle in any::<u64>()) {
        let n = common::spd_case(seed).0.rows();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut common::rng(shuffle));
        prop_assert_eq!(fingerprint(&dcg_trace(seed, None)), fingerprint(&dcg_trace(seed, Some(order))));
    }

    #[test]
    fn step_order_does_not_change_jacobi(seed in any::<u64>(), shuffle in any::<u64>()) {
        let net = Network::path(6);
        let a = common::sparse_spd(&net, seed);
        let t = a.matmul(&a).unwrap();
        let rows = rows_from_dense_vector(&t, &common::random_vector(6, seed)).unwrap();
        let mut order: Vec<usize> = (0..6).collect();
        order.shuffle(&mut common::rng(shuffle));
        let mut first = jacobi_agents(&rows, &net).unwrap();
        let mut second = jacobi_agents(&rows, &net).unwrap();
        let x = run_synchronous(&mut first, &net, &RunOptions::new(40).system(&rows)).unwrap();
        let y = run_synchronous(&mut second, &net, &RunOptions::new(40).system(&rows).step_order(order)).unwrap();
        prop_assert_eq!(fingerprint(&x), fingerprint(&y));
    }

    #[test]
    fn monotone_range_keeps_edges(seed in any::<u64>(), r in 0.1f64..0.5, extra in 0.0f64..0.5) {
        let positions = dcg_core::network::sample_unit_cube(20, 2, seed);
        let small = Network::from_positions(positions.clone(), r).unwrap();
        let large = Network::from_positions(positions, r + extra).unwrap();
        for (i, j) in small.edges() {
            prop_assert!(large.is_neighbor(i, j));
        }
    }
}
