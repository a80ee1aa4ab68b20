mod common;

use common::rng;
use derand_tsp::constants::{Constants, DegreeConstants};
use derand_tsp::fixtures::{blown_k4_lp, circle_instance, complete_lp, necklace_lp};
use derand_tsp::heldkarp::solve_held_karp;
use derand_tsp::instance::{LpSolution, MetricInstance};
use derand_tsp::pipeline::{solve, SolveConfig, SolveMode};
use num_traits::ToPrimitive;
use rand::Rng;

fn cfg(mode: SolveMode) -> SolveConfig {
    SolveConfig {
        mode,
        constants: Constants::test(),
        degree: DegreeConstants { p: 0.05, eta: 0.5 },
    }
}

fn random_points(seed: u64, n: usize) -> MetricInstance {
    let mut r = rng(seed);
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (r.gen_range(0.0..100.0), r.gen_range(0.0..100.0))).collect();
    MetricInstance::from_points(&format!("rand{seed}"), &pts, true)
}

fn is_tour(order: &[usize], n: usize) -> bool {
    let mut o = order.to_vec();
    o.sort_unstable();
    o == (0..n).collect::<Vec<_>>()
}

#[test]
fn christofides_within_three_halves_of_held_karp() {
    for seed in 0..6 {
        let inst = random_points(seed, 7);
        let hk = solve_held_karp(&inst).unwrap().value.to_f64().unwrap();
        let rep = solve(&complete_lp(7), &inst, &cfg(SolveMode::ChristofidesBaseline)).unwrap();
        assert!(is_tour(&rep.order, 7));
        assert!((inst.tour_cost(&rep.order) - rep.cost).abs() < 1e-9);
        assert!(rep.cost <= 1.5 * hk + 1e-6, "seed {seed}: {} vs {hk}", rep.cost);
    }
}

#[test]
fn held_karp_lp_solves_end_to_end() {
    for seed in 10..14 {
        let inst = random_points(seed, 6);
        let hk = solve_held_karp(&inst).unwrap();
        let rep = solve(&hk.solution, &inst, &cfg(SolveMode::Auto)).unwrap();
        assert!(is_tour(&rep.order, 6));
        assert!(rep.cost + 1e-9 >= hk.value.to_f64().unwrap());
        assert!(rep.trace.as_ref().unwrap().is_monotone(), "seed {seed}");
        assert!(rep.cost <= rep.tree_cost + rep.matching_cost + 1e-9);
    }
}

#[test]
fn general_mode_on_fixtures() {
    for raw in [necklace_lp(), blown_k4_lp()] {
        let inst = circle_instance(raw.n);
        let rep = solve(&raw, &inst, &cfg(SolveMode::General)).unwrap();
        assert_eq!(rep.mode, SolveMode::General);
        assert!(is_tour(&rep.order, raw.n));
        let t = rep.trace.unwrap();
        assert!(t.is_monotone());
        assert!(rep.tree_cost + rep.matching_cost <= t.final_value + 1e-9);
    }
}

#[test]
fn degree_mode_rejects_tight_instances() {
    let raw = necklace_lp();
    assert!(solve(&raw, &circle_instance(raw.n), &cfg(SolveMode::Degree)).is_err());
}

#[test]
fn lp_text_round_trip() {
    let raw = blown_k4_lp();
    let back = LpSolution::parse(&raw.to_text()).unwrap();
    assert_eq!(back.n, raw.n);
    assert_eq!(back.edges.len(), raw.edges.len());
    for (a, b) in back.x.iter().zip(&raw.x) {
        assert!((a - b).abs() < 1e-12);
    }
}
