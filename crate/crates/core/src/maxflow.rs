//! Edmonds–Karp maximum flow over exact rationals.

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

pub type Q = BigRational;

/// Capacities are snapped to this grid before solving.
pub const GRID: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Cap {
    Finite(Q),
    Infinite,
}

#[derive(Clone, Debug)]
pub struct FlowNetwork {
    n: usize,
    arcs: Vec<(usize, usize, Cap)>,
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    pub value: Q,
    pub flow: Vec<Q>,
}

impl FlowResult {
    pub fn flow_f64(&self, arc: usize) -> f64 {
        self.flow[arc].to_f64().unwrap_or(0.0)
    }

    pub fn value_f64(&self) -> f64 {
        self.value.to_f64().unwrap_or(0.0)
    }
}

/// `v` rounded to the nearest multiple of [`GRID`], as an exact rational.
pub fn snap(v: f64) -> Q {
    let k = (v / GRID).round();
    Q::new(BigInt::from(k as i128), BigInt::from(1_000_000_000_000i64))
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        FlowNetwork { n, arcs: Vec::new() }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cap: Cap) -> usize {
        self.arcs.push((from, to, cap));
        self.arcs.len() - 1
    }

    pub fn add_snapped(&mut self, from: usize, to: usize, cap: f64) -> usize {
        self.add_arc(from, to, Cap::Finite(snap(cap.max(0.0))))
    }

    pub fn max_flow(&self, s: usize, t: usize) -> FlowResult {
        let n = self.n;
        // Residual arcs: 2k forward, 2k+1 backward.
        let mut head = vec![Vec::new(); n];
        let mut res: Vec<Option<Q>> = Vec::with_capacity(2 * self.arcs.len());
        let mut to = Vec::with_capacity(2 * self.arcs.len());
        for (k, (a, b, c)) in self.arcs.iter().enumerate() {
            head[*a].push(2 * k);
            head[*b].push(2 * k + 1);
            res.push(match c {
                Cap::Finite(q) => Some(q.clone()),
                Cap::Infinite => None,
            });
            res.push(Some(Q::zero()));
            to.push(*b);
            to.push(*a);
        }
        let positive = |r: &Option<Q>| r.as_ref().map_or(true, |q| q.is_positive());
        let mut value = Q::zero();
        loop {
            let mut pred = vec![usize::MAX; n];
            let mut seen = vec![false; n];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                if v == t {
                    break;
                }
                for &a in &head[v] {
                    let w = to[a];
                    if !seen[w] && positive(&res[a]) {
                        seen[w] = true;
                        pred[w] = a;
                        queue.push_back(w);
                    }
                }
            }
            if !seen[t] {
                break;
            }
            let mut bottleneck: Option<Q> = None;
            let mut v = t;
            while v != s {
                let a = pred[v];
                if let Some(r) = &res[a] {
                    bottleneck = Some(match bottleneck {
                        Some(b) if &b < r => b,
                        _ => r.clone(),
                    });
                }
                v = to[a ^ 1];
            }
            let Some(b) = bottleneck else {
                panic!("unbounded flow: an s-t path of infinite capacity");
            };
            let mut v = t;
            while v != s {
                let a = pred[v];
                if let Some(r) = res[a].as_mut() {
                    *r -= &b;
                }
                if let Some(r) = res[a ^ 1].as_mut() {
                    *r += &b;
                }
                v = to[a ^ 1];
            }
            value += b;
        }
        let flow = (0..self.arcs.len())
            .map(|k| res[2 * k + 1].clone().unwrap_or_else(Q::zero))
            .collect();
        FlowResult { value, flow }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diamond() {
        let mut net = FlowNetwork::new(4);
        net.add_snapped(0, 1, 0.5);
        net.add_snapped(0, 2, 0.25);
        net.add_arc(1, 3, Cap::Infinite);
        net.add_arc(2, 3, Cap::Infinite);
        net.add_arc(1, 2, Cap::Infinite);
        let r = net.max_flow(0, 3);
        assert_eq!(r.value, snap(0.75));
        assert!((r.flow_f64(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bipartite_bottleneck() {
        let mut net = FlowNetwork::new(6);
        let a = net.add_snapped(0, 1, 1.0);
        net.add_snapped(0, 2, 1.0);
        net.add_arc(1, 3, Cap::Infinite);
        net.add_arc(2, 3, Cap::Infinite);
        net.add_arc(2, 4, Cap::Infinite);
        net.add_snapped(3, 5, 1.0);
        net.add_snapped(4, 5, 0.3);
        let r = net.max_flow(0, 5);
        assert!((r.value_f64() - 1.3).abs() < 1e-12);
        assert!(r.flow_f64(a) <= 1.0);
    }
}
