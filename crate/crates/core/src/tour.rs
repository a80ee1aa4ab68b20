//! From a spanning tree to a tour: odd-vertex matching, Euler walk,
//! shortcutting, and O(T)-join certificates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{bit, full_set, EdgeId, Graph, VSet};
use crate::instance::{MetricInstance, SupportGraph};

/// Largest odd-vertex count handled by the subset dynamic program.
pub const MATCHING_MAX_ODD: usize = 24;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TourResult {
    /// Tree edges as city pairs.
    pub tree: Vec<(usize, usize)>,
    pub matching: Vec<(usize, usize)>,
    pub order: Vec<usize>,
    pub tree_cost: f64,
    pub matching_cost: f64,
    pub tour_cost: f64,
}

/// Minimum-cost perfect matching on `k` points with costs `c(i, j)`, by
/// dynamic programming over subsets. Returns index pairs and the cost.
pub fn min_perfect_matching(k: usize, c: &dyn Fn(usize, usize) -> f64) -> Result<(Vec<(usize, usize)>, f64)> {
    if k % 2 == 1 {
        return Err(Error::Structure("odd number of vertices to match".into()));
    }
    if k > MATCHING_MAX_ODD {
        return Err(Error::TooLarge(format!("{k} vertices to match")));
    }
    if k == 0 {
        return Ok((vec![], 0.0));
    }
    let size = 1usize << k;
    let mut dp = vec![f64::INFINITY; size];
    let mut choice = vec![0u8; size];
    dp[0] = 0.0;
    for mask in 1..size {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut r = rest;
        while r != 0 {
            let j = r.trailing_zeros() as usize;
            r &= r - 1;
            let v = dp[rest & !(1 << j)] + c(i, j);
            if v < dp[mask] {
                dp[mask] = v;
                choice[mask] = j as u8;
            }
        }
    }
    let mut pairs = Vec::new();
    let mut mask = size - 1;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let j = choice[mask] as usize;
        pairs.push((i, j));
        mask &= !(1 << i) & !(1 << j);
    }
    Ok((pairs, dp[size - 1]))
}

/// Odd-degree vertices of a tree of `G` viewed in `G/e0`.
pub fn odd_set(sg: &SupportGraph, tree: &[EdgeId]) -> VSet {
    let mut odd = 0;
    for &e in tree {
        let ed = sg.contracted.edge(e);
        odd ^= bit(ed.u);
        odd ^= bit(ed.v);
    }
    odd
}

/// City of each vertex of `G/e0`.
pub fn contracted_cities(sg: &SupportGraph) -> Vec<usize> {
    let mut out = vec![0; sg.contracted.n()];
    for (v, &w) in sg.to_contracted.iter().enumerate() {
        out[w] = sg.city_of[v];
    }
    out
}

/// Minimum-cost perfect matching on the odd vertices of `tree` under the
/// metric completion. Pairs are vertices of `G/e0`.
pub fn min_odd_matching(
    sg: &SupportGraph,
    metric: &MetricInstance,
    tree: &[EdgeId],
) -> Result<(Vec<(usize, usize)>, f64)> {
    let cities = contracted_cities(sg);
    let odd: Vec<usize> = crate::graph::set_members(odd_set(sg, tree));
    let (pairs, cost) = min_perfect_matching(odd.len(), &|i, j| metric.c(cities[odd[i]], cities[odd[j]]))?;
    Ok((pairs.into_iter().map(|(i, j)| (odd[i], odd[j])).collect(), cost))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OjoinReport {
    pub feasible: bool,
    pub checked: usize,
    pub violation: Option<(VSet, f64)>,
}

/// Check `y(δ(S)) ≥ 1` for every `S` with `|S ∩ O|` odd, exhaustively.
pub fn verify_ojoin(g: &Graph, y: &[f64], odd: VSet) -> Result<OjoinReport> {
    let n = g.n();
    if n > 20 {
        return Err(Error::TooLarge(format!("{n} vertices for an exhaustive odd-cut scan")));
    }
    let mut checked = 0;
    let mut worst: Option<(VSet, f64)> = None;
    let all = full_set(n);
    for s in (2..all).step_by(2) {
        if (s & odd).count_ones() % 2 == 0 {
            continue;
        }
        checked += 1;
        let v = g.cut_value(y, s);
        if v < 1.0 - 1e-9 && worst.map_or(true, |w| v < w.1) {
            worst = Some((s, v));
        }
    }
    Ok(OjoinReport {
        feasible: worst.is_none(),
        checked,
        violation: worst,
    })
}

/// Closed Euler walk over a connected multigraph with all degrees even.
pub fn euler_walk(n: usize, edges: &[(usize, usize)], start: usize) -> Result<Vec<usize>> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, k));
        adj[b].push((a, k));
    }
    if adj.iter().any(|l| l.len() % 2 == 1) {
        return Err(Error::Structure("multigraph has an odd vertex".into()));
    }
    let mut used = vec![false; edges.len()];
    let mut ptr = vec![0; n];
    let mut stack = vec![start];
    let mut walk = Vec::new();
    while let Some(&v) = stack.last() {
        let mut advanced = false;
        while ptr[v] < adj[v].len() {
            let (w, k) = adj[v][ptr[v]];
            ptr[v] += 1;
            if !used[k] {
                used[k] = true;
                stack.push(w);
                advanced = true;
                break;
            }
        }
        if !advanced {
            walk.push(v);
            stack.pop();
        }
    }
    if used.iter().any(|u| !u) {
        return Err(Error::Structure("multigraph is disconnected".into()));
    }
    walk.reverse();
    Ok(walk)
}

/// First-visit shortcut of a closed walk.
pub fn shortcut_walk(walk: &[usize], n: usize) -> Vec<usize> {
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for &v in walk {
        if !seen[v] {
            seen[v] = true;
            order.push(v);
        }
    }
    order
}

/// Tour from city-level tree and matching edges.
pub fn tour_from_parts(
    metric: &MetricInstance,
    tree: Vec<(usize, usize)>,
    matching: Vec<(usize, usize)>,
) -> Result<TourResult> {
    let n = metric.n;
    let mut all = tree.clone();
    all.extend(matching.iter().copied());
    let walk = euler_walk(n, &all, 0)?;
    let order = shortcut_walk(&walk, n);
    if order.len() != n {
        return Err(Error::Structure("walk misses a city".into()));
    }
    let tree_cost = tree.iter().map(|&(a, b)| metric.c(a, b)).sum();
    let matching_cost = matching.iter().map(|&(a, b)| metric.c(a, b)).sum();
    Ok(TourResult {
        tour_cost: metric.tour_cost(&order),
        tree,
        matching,
        order,
        tree_cost,
        matching_cost,
    })
}

/// Matching, u0/v0 merge, Euler walk and shortcut for a spanning tree of `G`.
pub fn assemble(sg: &SupportGraph, inst: &MetricInstance, tree: &[EdgeId]) -> Result<TourResult> {
    if !sg.g.is_spanning_tree(tree) {
        return Err(Error::Structure("edge set is not a spanning tree".into()));
    }
    let metric = inst.metric_completion();
    let cities = contracted_cities(sg);
    let (pairs, _) = min_odd_matching(sg, &metric, tree)?;
    let tree_c: Vec<(usize, usize)> = tree
        .iter()
        .map(|&e| {
            let ed = sg.contracted.edge(e);
            (cities[ed.u], cities[ed.v])
        })
        .collect();
    let match_c = pairs.iter().map(|&(a, b)| (cities[a], cities[b])).collect();
    tour_from_parts(&metric, tree_c, match_c)
}

/// Minimum spanning tree on the metric completion plus a minimum matching.
pub fn christofides(inst: &MetricInstance) -> Result<TourResult> {
    let metric = inst.metric_completion();
    let n = metric.n;
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, 0usize); n];
    let mut tree = Vec::new();
    in_tree[0] = true;
    for v in 1..n {
        best[v] = (metric.c(0, v), 0);
    }
    for _ in 1..n {
        let v = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].0.partial_cmp(&best[b].0).unwrap())
            .unwrap();
        in_tree[v] = true;
        tree.push((best[v].1, v));
        for w in 0..n {
            if !in_tree[w] && metric.c(v, w) < best[w].0 {
                best[w] = (metric.c(v, w), v);
            }
        }
    }
    let mut deg = vec![0; n];
    for &(a, b) in &tree {
        deg[a] += 1;
        deg[b] += 1;
    }
    let odd: Vec<usize> = (0..n).filter(|&v| deg[v] % 2 == 1).collect();
    let (pairs, _) = min_perfect_matching(odd.len(), &|i, j| metric.c(odd[i], odd[j]))?;
    let matching = pairs.into_iter().map(|(i, j)| (odd[i], odd[j])).collect();
    tour_from_parts(&metric, tree, matching)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(k: usize) -> MetricInstance {
        let pts: Vec<(f64, f64)> = (0..k).map(|i| (i as f64, 0.0)).collect();
        MetricInstance::from_points("line", &pts, false)
    }

    fn brute(k: usize, c: &dyn Fn(usize, usize) -> f64) -> f64 {
        fn rec(rest: Vec<usize>, c: &dyn Fn(usize, usize) -> f64) -> f64 {
            if rest.is_empty() {
                return 0.0;
            }
            let i = rest[0];
            let mut best = f64::INFINITY;
            for t in 1..rest.len() {
                let j = rest[t];
                let r: Vec<usize> = rest.iter().copied().filter(|&v| v != i && v != j).collect();
                best = best.min(c(i, j) + rec(r, c));
            }
            best
        }
        rec((0..k).collect(), c)
    }

    #[test]
    fn line_matching() {
        let inst = line(4);
        let (pairs, cost) = min_perfect_matching(4, &|i, j| inst.c(i, j)).unwrap();
        assert_eq!(cost, 2.0);
        assert!(pairs.contains(&(0, 1)) && pairs.contains(&(2, 3)));
        let (p2, c2) = min_perfect_matching(2, &|i, j| inst.c(i + 2, j + 2)).unwrap();
        assert_eq!(p2, vec![(0, 1)]);
        assert_eq!(c2, 1.0);
    }

    #[test]
    fn matching_matches_brute_force() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| ((i * 37 % 11) as f64, (i * 53 % 7) as f64)).collect();
        let inst = MetricInstance::from_points("r", &pts, false);
        let (_, cost) = min_perfect_matching(10, &|i, j| inst.c(i, j)).unwrap();
        assert!((cost - brute(10, &|i, j| inst.c(i, j))).abs() < 1e-12);
    }

    #[test]
    fn euler_and_shortcut_on_square() {
        let sq = MetricInstance::from_points("sq", &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], false);
        let t = tour_from_parts(&sq, vec![(0, 1), (1, 2), (2, 3)], vec![(3, 0)]).unwrap();
        assert_eq!(t.tree_cost, 3.0);
        assert_eq!(t.matching_cost, 1.0);
        assert_eq!(t.tour_cost, 4.0);
        assert_eq!(t.order, vec![0, 1, 2, 3]);
    }

    #[test]
    fn shortcut_does_not_increase_cost() {
        let inst = line(5);
        let t = tour_from_parts(&inst, vec![(0, 2), (2, 1), (2, 3), (3, 4)], vec![(1, 0), (2, 4)]).unwrap();
        assert!(t.tour_cost <= t.tree_cost + t.matching_cost + 1e-12);
    }

    #[test]
    fn ojoin_detects_zero_vector() {
        let g = Graph::from_pairs(3, &[(0, 1), (1, 2), (0, 2)]);
        let rep = verify_ojoin(&g, &[0.0; 3], bit(0) | bit(1)).unwrap();
        assert!(!rep.feasible);
        let ok = verify_ojoin(&g, &[0.5; 3], bit(0) | bit(1)).unwrap();
        assert!(ok.feasible);
    }

    #[test]
    fn christofides_on_line() {
        let t = christofides(&line(5)).unwrap();
        assert_eq!(t.tour_cost, 8.0);
    }
}
