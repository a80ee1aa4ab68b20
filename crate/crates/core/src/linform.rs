//! Expectations written as `c0 + Σ c_i · P{Q_i | Set}` over parity queries.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::Result;
use crate::graph::EdgeId;
use crate::treedist::{Conditioned, ParityQuery};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearForm {
    pub constant: f64,
    terms: BTreeMap<ParityQuery, f64>,
    n: usize,
}

impl LinearForm {
    /// `n` is the vertex count of the underlying graph; it decides which
    /// moduli denote exact counts when queries are canonicalized.
    pub fn zero(n: usize) -> Self {
        LinearForm {
            constant: 0.0,
            terms: BTreeMap::new(),
            n,
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut f = LinearForm::zero(n);
        f.constant = c;
        f
    }

    pub fn event(n: usize, q: &ParityQuery, coef: f64) -> Self {
        let mut f = LinearForm::zero(n);
        f.add_event(q, coef);
        f
    }

    pub fn add_event(&mut self, q: &ParityQuery, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let Some(c) = q.canonical(self.n) else { return };
        if c.is_empty() {
            self.constant += coef;
            return;
        }
        *self.terms.entry(c).or_insert(0.0) += coef;
    }

    pub fn add(&mut self, other: &LinearForm, scale: f64) {
        if scale == 0.0 {
            return;
        }
        self.constant += scale * other.constant;
        for (q, c) in &other.terms {
            *self.terms.entry(q.clone()).or_insert(0.0) += scale * c;
        }
    }

    pub fn scaled(&self, s: f64) -> LinearForm {
        let mut out = LinearForm::zero(self.n);
        out.add(self, s);
        out
    }

    /// The form multiplied by the indicator of `q`.
    pub fn and(&self, q: &ParityQuery) -> LinearForm {
        let mut out = LinearForm::zero(self.n);
        out.add_event(q, self.constant);
        for (t, c) in &self.terms {
            out.add_event(&t.merged(q), *c);
        }
        out
    }

    /// The form multiplied by the indicator of the complement of `q`.
    pub fn and_not(&self, q: &ParityQuery) -> LinearForm {
        let mut out = self.clone();
        out.add(&self.and(q), -1.0);
        out
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ParityQuery, f64)> {
        self.terms.iter().map(|(q, c)| (q, *c))
    }

    /// Value under the conditional measure; queries run in parallel.
    pub fn eval(&self, cond: &Conditioned<'_>) -> Result<f64> {
        let terms: Vec<(&ParityQuery, f64)> = self.terms().collect();
        let parts: Result<Vec<f64>> = terms
            .par_iter()
            .map(|(q, c)| cond.event_prob(q).map(|p| c * p))
            .collect();
        Ok(self.constant + parts?.iter().sum::<f64>())
    }

    /// Value when the whole tree is known: every probability is an indicator.
    pub fn eval_on_tree(&self, tree: &[EdgeId]) -> f64 {
        let mut mark = vec![false; tree.iter().max().map_or(0, |&e| e + 1)];
        for &e in tree {
            mark[e] = true;
        }
        let mut v = self.constant;
        for (q, c) in &self.terms {
            let ok = (0..q.len()).all(|i| {
                let k = q.sets[i].iter().filter(|&&e| e < mark.len() && mark[e]).count();
                k % q.moduli[i] == q.sigma[i]
            });
            if ok {
                v += c;
            }
        }
        v
    }
}

/// A literal of an indicator product: the event `q` or its complement.
#[derive(Clone, Debug)]
pub struct Literal {
    pub query: ParityQuery,
    pub positive: bool,
}

/// `E[Π literals]` expanded by inclusion–exclusion into a linear form.
pub fn product_form(n: usize, lits: &[Literal]) -> LinearForm {
    // coefficient of Π_{i∈J} 1{q_i}, keyed by the mask J
    let mut poly: BTreeMap<u32, f64> = BTreeMap::from([(0, 1.0)]);
    for (i, lit) in lits.iter().enumerate() {
        let mut next = BTreeMap::new();
        for (&mask, &c) in &poly {
            if lit.positive {
                *next.entry(mask | (1 << i)).or_insert(0.0) += c;
            } else {
                *next.entry(mask).or_insert(0.0) += c;
                *next.entry(mask | (1 << i)).or_insert(0.0) -= c;
            }
        }
        poly = next;
    }
    let mut out = LinearForm::zero(n);
    for (mask, c) in poly {
        if c == 0.0 {
            continue;
        }
        let mut q = ParityQuery::new();
        for (i, lit) in lits.iter().enumerate() {
            if mask & (1 << i) != 0 {
                q = q.merged(&lit.query);
            }
        }
        out.add_event(&q, c);
    }
    out
}

/// `E[min(cap, Σ w_i · 1{U_i})]` for events given as literals.
pub fn capped_sum_form(n: usize, events: &[(Literal, f64)], cap: f64) -> LinearForm {
    let k = events.len();
    let mut out = LinearForm::zero(n);
    for pattern in 0u32..(1 << k) {
        let value: f64 = (0..k)
            .filter(|i| pattern & (1 << i) != 0)
            .map(|i| events[i].1)
            .sum::<f64>()
            .min(cap);
        if value == 0.0 {
            continue;
        }
        let lits: Vec<Literal> = (0..k)
            .map(|i| Literal {
                query: events[i].0.query.clone(),
                positive: events[i].0.positive == (pattern & (1 << i) != 0),
            })
            .collect();
        out.add(&product_form(n, &lits), value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::treedist::TreeDistribution;

    fn triangle() -> TreeDistribution {
        TreeDistribution::from_lambda(Graph::from_pairs(3, &[(0, 1), (1, 2), (0, 2)]), vec![1.0; 3]).unwrap()
    }

    #[test]
    fn canonical_merges_and_contradictions() {
        let q = ParityQuery::new().with(vec![1, 0], 2, 3).with(vec![0, 1], 0, 2);
        let c = q.canonical(3).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.sets[0], vec![0, 1]);
        let bad = ParityQuery::new().with(vec![0, 1], 2, 3).with(vec![0, 1], 1, 2);
        assert!(bad.canonical(3).is_none());
        let f = LinearForm::event(3, &bad, 1.0);
        assert!(f.is_empty());
    }

    #[test]
    fn and_not_and_eval() {
        let d = triangle();
        let v = d.view();
        let a = ParityQuery::new().with(vec![0], 1, 2);
        let b = ParityQuery::new().with(vec![1], 1, 2);
        let f = LinearForm::event(3, &a, 1.0).and_not(&b);
        // P{e0 ∈ T, e1 ∉ T} = 1/3
        assert!((f.eval(&v).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(f.eval_on_tree(&[0, 2]), 1.0);
        assert_eq!(f.eval_on_tree(&[0, 1]), 0.0);
    }

    #[test]
    fn capped_sum_matches_enumeration() {
        let d = triangle();
        let lits: Vec<(Literal, f64)> = (0..3)
            .map(|e| {
                (
                    Literal {
                        query: ParityQuery::new().with(vec![e], 1, 2),
                        positive: e != 2,
                    },
                    0.75,
                )
            })
            .collect();
        let f = capped_sum_form(3, &lits, 1.0);
        let trees: [[usize; 2]; 3] = [[0, 1], [1, 2], [0, 2]];
        let mut want = 0.0;
        for t in trees {
            let s: f64 = (0..3)
                .filter(|&e| (t.contains(&e)) == (e != 2))
                .map(|_| 0.75)
                .sum();
            want += s.min(1.0) / 3.0;
            assert!((f.eval_on_tree(&t) - s.min(1.0)).abs() < 1e-12);
        }
        assert!((f.eval(&d.view()).unwrap() - want).abs() < 1e-12);
    }
}
