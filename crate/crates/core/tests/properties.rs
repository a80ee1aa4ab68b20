mod common;

use common::*;
use derand_tsp::treedist::{PartialAssignment, TreeDistribution};
use derand_tsp::ParityQuery;
use proptest::prelude::*;
use rand::Rng;

fn random_dist(seed: u64, n: usize) -> (TreeDistribution, Vec<f64>) {
    let mut r = rng(seed);
    let g = random_connected(&mut r, n, 0.5);
    let lambda: Vec<f64> = (0..g.m()).map(|_| r.gen_range(0.1..4.0)).collect();
    (TreeDistribution::from_lambda(g, lambda.clone()).unwrap(), lambda)
}

fn random_query(seed: u64, m: usize, n: usize) -> ParityQuery {
    let mut r = rng(seed ^ 0x5eed);
    let edges: Vec<usize> = (0..m).collect();
    let mut q = ParityQuery::new();
    for _ in 0..r.gen_range(1..=3) {
        let mut s = random_subset(&mut r, &edges, 0.5);
        if s.is_empty() {
            s.push(r.gen_range(0..m));
        }
        let k = [2, 3, n][r.gen_range(0..3)];
        q.push(s, r.gen_range(0..k), k);
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn marginals_sum_to_tree_size(seed in any::<u64>(), n in 2usize..9) {
        let (d, _) = random_dist(seed, n);
        let s: f64 = d.marginals().iter().sum();
        prop_assert!((s - (n - 1) as f64).abs() < 1e-9);
    }

    #[test]
    fn residues_partition_the_space(seed in any::<u64>(), n in 3usize..8, k in 2usize..5) {
        let (d, _) = random_dist(seed, n);
        let set: Vec<usize> = (0..d.graph().m()).step_by(2).collect();
        let total: f64 = (0..k).map(|s| d.event_prob(&ParityQuery::new().with(set.clone(), s, k)).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn conditioning_is_a_martingale(seed in any::<u64>(), n in 3usize..8) {
        let (d, _) = random_dist(seed, n);
        let q = random_query(seed, d.graph().m(), n);
        let v = d.view();
        let whole = v.event_prob(&q).unwrap();
        for e in v.free_edges() {
            let p = v.marginal(e);
            if p < 1e-9 || p > 1.0 - 1e-9 {
                continue;
            }
            let a = v.extend(&[(e, true)]).unwrap().event_prob(&q).unwrap();
            let b = v.extend(&[(e, false)]).unwrap().event_prob(&q).unwrap();
            prop_assert!((whole - p * a - (1.0 - p) * b).abs() < 1e-9);
        }
    }

    #[test]
    fn queries_match_enumeration(seed in any::<u64>(), n in 3usize..7) {
        let (d, lambda) = random_dist(seed, n);
        let g = d.graph().clone();
        let meas = lambda_measure(&g, &lambda);
        let q = random_query(seed, g.m(), n);
        prop_assert!((d.event_prob(&q).unwrap() - brute_prob(&meas, g.m(), &[], &q)).abs() < 1e-9);
        let (t, _) = &meas[(seed as usize) % meas.len()];
        let fixed = [(t[0], true)];
        let got = d.event_prob_conditioned(&PartialAssignment::new().with(t[0], true), &q).unwrap();
        prop_assert!((got - brute_prob(&meas, g.m(), &fixed, &q)).abs() < 1e-9);
    }

    #[test]
    fn canonical_keeps_the_event(seed in any::<u64>(), n in 3usize..7) {
        let (d, lambda) = random_dist(seed, n);
        let g = d.graph().clone();
        let q = random_query(seed, g.m(), n);
        let meas = lambda_measure(&g, &lambda);
        let p = brute_prob(&meas, g.m(), &[], &q);
        match q.canonical(n) {
            Some(c) => {
                prop_assert_eq!(c.canonical(n), Some(c.clone()));
                prop_assert!((brute_prob(&meas, g.m(), &[], &c) - p).abs() < 1e-12);
            }
            None => prop_assert!(p.abs() < 1e-12),
        }
    }

    #[test]
    fn samples_are_spanning_trees(seed in any::<u64>(), n in 2usize..9) {
        let (d, _) = random_dist(seed, n);
        let t = d.sample_tree(seed);
        prop_assert!(d.graph().is_spanning_tree(&t));
        prop_assert!(d.tree_probability(&t) > 0.0);
    }
}
