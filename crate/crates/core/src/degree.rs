//! The degree-cut case: every cut with at least two vertices on each side
//! has value at least `2 + eta`.

use serde::{Deserialize, Serialize};

use crate::constants::DegreeConstants;
use crate::cuts::CUT_TOL;
use crate::error::{Error, Result};
use crate::graph::{bit, EdgeId, Graph};
use crate::instance::SupportGraph;
use crate::linform::LinearForm;
use crate::treedist::{ParityQuery, TreeDistribution};

const MAX_SCAN_VERTICES: usize = 26;

/// True iff no `S` with `2 ≤ |S| ≤ n − 2` has `x(δ(S)) < 2 + eta`.
pub fn check_degree_cut_case(g: &Graph, x: &[f64], eta: f64) -> Result<bool> {
    let n = g.n();
    if n < 4 {
        return Ok(true);
    }
    if n > MAX_SCAN_VERTICES {
        return Err(Error::TooLarge(format!("{n} vertices for a cut scan")));
    }
    // sides avoiding vertex 0
    for code in 1u64..(1u64 << (n - 1)) {
        let s = code << 1;
        let k = s.count_ones() as usize;
        if k < 2 || k > n - 2 {
            continue;
        }
        if g.cut_value(x, s) < 2.0 + eta + CUT_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegreeCase {
    /// `G/e0`.
    pub g: Graph,
    pub x: Vec<f64>,
    pub cost: Vec<f64>,
    /// `|V(G)|`.
    pub n: usize,
    pub k: DegreeConstants,
    /// `P{u, v both even}` at `Set = ∅`.
    pub p_even: Vec<f64>,
    pub good: Vec<bool>,
    pub violations: Vec<String>,
}

impl DegreeCase {
    pub fn build(sg: &SupportGraph, k: &DegreeConstants, dist: &TreeDistribution) -> Result<DegreeCase> {
        let g = sg.contracted.clone();
        let mut dc = DegreeCase {
            n: sg.g.n(),
            x: sg.x.clone(),
            cost: sg.cost.clone(),
            k: k.clone(),
            p_even: Vec::with_capacity(g.m()),
            good: Vec::with_capacity(g.m()),
            violations: Vec::new(),
            g,
        };
        let view = dist.view();
        for e in 0..dc.g.m() {
            let p = LinearForm::event(dc.n, &dc.even_query(e), 1.0).eval(&view)?;
            dc.p_even.push(p);
            dc.good.push(p >= k.p);
        }
        for v in 0..dc.g.n() {
            let xg: f64 = dc.g.incident(v).into_iter().filter(|&e| dc.good[e]).map(|e| dc.x[e]).sum();
            if xg < 1.0 - 1e-9 {
                dc.violations.push(format!("x(G_{v}) = {xg} < 1"));
            }
        }
        Ok(dc)
    }

    /// Both endpoints of `e` even in `T`, degrees taken in `G/e0`.
    pub fn even_query(&self, e: EdgeId) -> ParityQuery {
        let ed = self.g.edge(e);
        ParityQuery::new()
            .with(self.g.delta(bit(ed.u)), 0, 2)
            .with(self.g.delta(bit(ed.v)), 0, 2)
    }

    pub fn b(&self, e: EdgeId) -> f64 {
        let eta = self.k.eta;
        if self.good[e] {
            (1.0 + eta) / (2.0 + eta) * self.x[e]
        } else {
            self.x[e] / (2.0 + eta)
        }
    }

    /// `𝔼[m_e | Set]`.
    pub fn m_form(&self, e: EdgeId) -> LinearForm {
        let (a, eta, x) = (self.k.alpha(), self.k.eta, self.x[e]);
        let mut f = LinearForm::constant(self.n, a * self.b(e) + (1.0 - a) * x / 2.0);
        f.add_event(&self.even_query(e), (1.0 - a) * (x / (2.0 + eta) - x / 2.0));
        f
    }

    /// `𝔼[c(m) | Set]`.
    pub fn exp_c_m(&self) -> LinearForm {
        let mut f = LinearForm::zero(self.n);
        for e in 0..self.g.m() {
            f.add(&self.m_form(e), self.cost[e]);
        }
        f
    }

    /// `m = α b + (1 − α) g` for a fixed tree.
    pub fn m_vector(&self, tree: &[EdgeId]) -> Vec<f64> {
        let mut deg = vec![0usize; self.g.n()];
        for &e in tree {
            let ed = self.g.edge(e);
            deg[ed.u] += 1;
            deg[ed.v] += 1;
        }
        let (a, eta) = (self.k.alpha(), self.k.eta);
        (0..self.g.m())
            .map(|e| {
                let ed = self.g.edge(e);
                let even = deg[ed.u] % 2 == 0 && deg[ed.v] % 2 == 0;
                let g = if even { self.x[e] / (2.0 + eta) } else { self.x[e] / 2.0 };
                a * self.b(e) + (1.0 - a) * g
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{complete_lp, cycle_lp, lp, prepare_on_circle};
    use crate::graph::set_members;
    use crate::tour::{odd_set, verify_ojoin};

    fn trees(g: &Graph) -> Vec<Vec<EdgeId>> {
        (0u64..(1 << g.m()))
            .filter(|m| m.count_ones() as usize == g.n() - 1)
            .map(set_members)
            .filter(|t| g.is_spanning_tree(t))
            .collect()
    }

    #[test]
    fn degree_case_detection() {
        let k6 = complete_lp(6);
        assert!(check_degree_cut_case(&k6.graph(), &k6.x, 0.5).unwrap());
        assert!(!check_degree_cut_case(&k6.graph(), &k6.x, 1.3).unwrap());
        let c = cycle_lp(6);
        assert!(!check_degree_cut_case(&c.graph(), &c.x, 0.1).unwrap());
        // two unit edges joined by half edges: {0,1} is a tight 2-cut
        let sq = lp(4, &[(0, 1), (2, 3), (0, 2), (1, 3), (0, 3), (1, 2)], &[1.0, 1.0, 0.5, 0.5, 0.5, 0.5]);
        assert!(!check_degree_cut_case(&sq.graph(), &sq.x, 0.1).unwrap());
    }

    #[test]
    fn forms_match_enumeration_and_bound() {
        let p = prepare_on_circle(&complete_lp(5)).unwrap();
        let k = DegreeConstants { p: 0.05, eta: 0.5 };
        let dc = DegreeCase::build(&p.sg, &k, &p.dist).unwrap();
        assert!(dc.good.iter().all(|&g| g));
        assert!(dc.violations.is_empty());
        let all = trees(&p.sg.g);
        let view = p.dist.view();
        for e in 0..dc.g.m() {
            let mut want = 0.0;
            let mut even = 0.0;
            for t in &all {
                let pr = p.dist.tree_probability(t);
                want += pr * dc.m_vector(t)[e];
                if dc.even_query(e).holds_for(t) {
                    even += pr;
                }
            }
            assert!((dc.p_even[e] - even).abs() < 1e-9);
            let got = dc.m_form(e).eval(&view).unwrap();
            assert!((got - want).abs() < 1e-9);
            assert!(got <= k.edge_factor() * dc.x[e] + 1e-12);
        }
    }

    #[test]
    fn bad_edges_use_small_b() {
        let p = prepare_on_circle(&complete_lp(5)).unwrap();
        let k = DegreeConstants { p: 0.99, eta: 0.5 };
        let dc = DegreeCase::build(&p.sg, &k, &p.dist).unwrap();
        assert!(dc.good.iter().all(|&g| !g));
        assert!(!dc.violations.is_empty());
        let a = k.alpha();
        let view = p.dist.view();
        for e in 0..dc.g.m() {
            let want = a * dc.x[e] / (2.0 + k.eta) + (1.0 - a) * dc.x[e] / 2.0;
            // bad edges still carry g, whose even branch is x/(2+eta)
            let got = dc.m_form(e).eval(&view).unwrap();
            assert!(got <= want + 1e-12);
            assert!((dc.b(e) - dc.x[e] / (2.0 + k.eta)).abs() < 1e-15);
        }
    }

    #[test]
    fn m_is_in_the_join_polyhedron() {
        let p = prepare_on_circle(&complete_lp(5)).unwrap();
        let k = DegreeConstants { p: 0.05, eta: 0.5 };
        let dc = DegreeCase::build(&p.sg, &k, &p.dist).unwrap();
        for t in trees(&p.sg.g) {
            let rep = verify_ojoin(&dc.g, &dc.m_vector(&t), odd_set(&p.sg, &t)).unwrap();
            assert!(rep.feasible, "{:?}", rep.violation);
        }
    }
}
