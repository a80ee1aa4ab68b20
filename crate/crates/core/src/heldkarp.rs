//! Exact subtour-elimination LP for small instances by cutting planes.

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::graph::{full_set, VSet};
use crate::instance::{LpSolution, MetricInstance, Origin};
use crate::simplex::{q, q_from_f64, solve, LinearProgram, Outcome, Row, Sense};
use crate::graph::Edge;

pub const HK_MAX_CITIES: usize = 14;
const CUTS_PER_ROUND: usize = 32;

#[derive(Clone, Debug)]
pub struct HeldKarp {
    pub value: BigRational,
    pub solution: LpSolution,
    pub rounds: usize,
    pub cuts: usize,
}

pub fn solve_held_karp(inst: &MetricInstance) -> Result<HeldKarp> {
    let n = inst.n;
    if n > HK_MAX_CITIES {
        return Err(Error::TooLarge(format!("{n} cities; the exact solver handles at most {HK_MAX_CITIES}")));
    }
    if n < 3 {
        return Err(Error::TooLarge(format!("{n} cities; need at least 3")));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let mut lp = LinearProgram {
        ncols: pairs.len(),
        cost: pairs.iter().map(|&(i, j)| q_from_f64(inst.c(i, j))).collect(),
        rows: Vec::new(),
    };
    for v in 0..n {
        lp.rows.push(Row {
            coef: cut_coefs(&pairs, 1 << v),
            sense: Sense::Eq,
            rhs: q(2),
        });
    }
    let mut rounds = 0;
    let mut cuts = 0;
    loop {
        rounds += 1;
        let (x, value) = match solve(&lp) {
            Outcome::Optimal { x, value } => (x, value),
            other => return Err(Error::Structure(format!("subtour LP: {other:?}"))),
        };
        let xf: Vec<f64> = x.iter().map(|v| v.to_f64().unwrap_or(0.0)).collect();
        let mut violated: Vec<(f64, VSet)> = Vec::new();
        let all = full_set(n);
        for s in (2..all).step_by(2) {
            let approx: f64 = pairs
                .iter()
                .enumerate()
                .filter(|(_, &(i, j))| ((s >> i) & 1) != ((s >> j) & 1))
                .map(|(k, _)| xf[k])
                .sum();
            if approx < 2.0 + 1e-9 {
                let exact = cut_coefs(&pairs, s)
                    .iter()
                    .fold(BigRational::zero(), |acc, (k, _)| acc + &x[*k]);
                if exact < q(2) {
                    violated.push((approx, s));
                }
            }
        }
        if violated.is_empty() {
            let mut edges = Vec::new();
            let mut exact = Vec::new();
            for (k, &(i, j)) in pairs.iter().enumerate() {
                if !x[k].is_zero() {
                    edges.push(Edge::new(i, j));
                    exact.push(x[k].clone());
                }
            }
            let xs = exact.iter().map(|v| v.to_f64().unwrap_or(0.0)).collect();
            let solution = LpSolution {
                n,
                edges,
                x: xs,
                exact: Some(exact),
                e0: None,
                origin: Origin::HkSolved,
                city_of: (0..n).collect(),
            };
            return Ok(HeldKarp {
                value,
                solution,
                rounds,
                cuts,
            });
        }
        violated.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, s) in violated.iter().take(CUTS_PER_ROUND) {
            lp.rows.push(Row {
                coef: cut_coefs(&pairs, s),
                sense: Sense::Ge,
                rhs: q(2),
            });
            cuts += 1;
        }
    }
}

fn cut_coefs(pairs: &[(usize, usize)], s: VSet) -> Vec<(usize, BigRational)> {
    pairs
        .iter()
        .enumerate()
        .filter(|(_, &(i, j))| ((s >> i) & 1) != ((s >> j) & 1))
        .map(|(k, _)| (k, q(1)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_and_line() {
        let tri = MetricInstance::from_matrix("t", 3, vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(solve_held_karp(&tri).unwrap().value, q(3));
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 0.0)).collect();
        let line = MetricInstance::from_points("l", &pts, false);
        let hk = solve_held_karp(&line).unwrap();
        assert_eq!(hk.value, q(8));
        hk.solution.validate().unwrap();
    }

    #[test]
    fn unit_square() {
        let sq = MetricInstance::from_points("sq", &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], false);
        let hk = solve_held_karp(&sq).unwrap();
        assert_eq!(hk.value, q(4));
    }

    #[test]
    fn size_limit() {
        let pts: Vec<(f64, f64)> = (0..15).map(|i| (i as f64, 0.0)).collect();
        assert!(solve_held_karp(&MetricInstance::from_points("big", &pts, false)).is_err());
    }
}
