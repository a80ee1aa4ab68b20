#![allow(dead_code)]

use derand_tsp::graph::{Dsu, EdgeId, Graph, VSet};
use derand_tsp::ParityQuery;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every spanning tree of `g`, by include/exclude backtracking.
pub fn spanning_trees(g: &Graph) -> Vec<Vec<EdgeId>> {
    fn go(g: &Graph, e: usize, chosen: &mut Vec<EdgeId>, out: &mut Vec<Vec<EdgeId>>) {
        let need = g.n() - 1;
        if chosen.len() == need {
            out.push(chosen.clone());
            return;
        }
        if e == g.m() || g.m() - e < need - chosen.len() {
            return;
        }
        let mut d = Dsu::new(g.n());
        for &c in chosen.iter() {
            let ed = g.edge(c);
            d.union(ed.u, ed.v);
        }
        let ed = g.edge(e);
        if d.find(ed.u) != d.find(ed.v) {
            chosen.push(e);
            go(g, e + 1, chosen, out);
            chosen.pop();
        }
        go(g, e + 1, chosen, out);
    }
    let mut out = Vec::new();
    if g.n() >= 1 {
        go(g, 0, &mut Vec::new(), &mut out);
    }
    out
}

/// `μ_λ(T) ∝ Π λ_e`, normalized over all spanning trees.
pub fn lambda_measure(g: &Graph, lambda: &[f64]) -> Vec<(Vec<EdgeId>, f64)> {
    let trees = spanning_trees(g);
    let w: Vec<f64> = trees.iter().map(|t| t.iter().map(|&e| lambda[e]).product()).collect();
    let z: f64 = w.iter().sum();
    trees.into_iter().zip(w).map(|(t, w)| (t, w / z)).collect()
}

pub fn mark(m: usize, tree: &[EdgeId]) -> Vec<bool> {
    let mut tm = vec![false; m];
    for &e in tree {
        tm[e] = true;
    }
    tm
}

/// Direct count of each constraint of `q` on a tree.
pub fn holds(q: &ParityQuery, tm: &[bool]) -> bool {
    (0..q.sets.len()).all(|i| {
        let c = q.sets[i].iter().filter(|&&e| tm[e]).count();
        c % q.moduli[i] == q.sigma[i] % q.moduli[i]
    })
}

/// `P{q | fixed}` under a tree measure, by enumeration.
pub fn brute_prob(measure: &[(Vec<EdgeId>, f64)], m: usize, fixed: &[(EdgeId, bool)], q: &ParityQuery) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, p) in measure {
        let tm = mark(m, t);
        if fixed.iter().any(|&(e, b)| tm[e] != b) {
            continue;
        }
        den += p;
        if holds(q, &tm) {
            num += p;
        }
    }
    num / den
}

/// A random tree on `n` vertices plus each other pair with probability `p`.
pub fn random_connected(r: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
    let mut pairs = Vec::new();
    for v in 1..n {
        pairs.push((r.gen_range(0..v), v));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !pairs.contains(&(i, j)) && r.gen_bool(p) {
                pairs.push((i, j));
            }
        }
    }
    Graph::from_pairs(n, &pairs)
}

pub fn random_subset(r: &mut ChaCha8Rng, universe: &[usize], p: f64) -> Vec<usize> {
    universe.iter().copied().filter(|_| r.gen_bool(p)).collect()
}

/// Random nonempty vertex set inside `avail`.
pub fn random_vset(r: &mut ChaCha8Rng, avail: VSet) -> VSet {
    loop {
        let s = avail & r.gen::<u64>();
        if s != 0 {
            return s;
        }
    }
}
