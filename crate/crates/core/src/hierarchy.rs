//! The laminar hierarchy of cuts crossed on at most one side, with the
//! near-cycle and degree partitions and the edge bundles.
//!
//! Vertex sets live in `G/e0`; the root of the hierarchy is every vertex
//! except the contracted `{u0, v0}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::cuts::{build_polygon, crossing_components, CrossClass, CutStructure};
use crate::error::{Error, Result};
use crate::graph::{bit, EdgeId, Graph, VSet};

const TOL: f64 = 1e-9;
/// Largest pool searched exhaustively for a whole-edge subset.
const SUBSET_SEARCH: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutKind {
    Degree,
    NearCycle,
    Triangle,
}

/// `A, B, C` of a near-cycle cut with its children in polygon order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NearCyclePartition {
    pub order: Vec<usize>,
    pub a: Vec<EdgeId>,
    pub b: Vec<EdgeId>,
    pub c: Vec<EdgeId>,
}

/// Edge parts as `(edge, amount of x_e)`; an edge split between parts
/// appears in more than one of them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegreePartition {
    pub case: u8,
    pub a: Vec<(EdgeId, f64)>,
    pub b: Vec<(EdgeId, f64)>,
    pub c: Vec<(EdgeId, f64)>,
    pub split: bool,
}

impl DegreePartition {
    pub fn ids(part: &[(EdgeId, f64)]) -> Vec<EdgeId> {
        part.iter().map(|&(e, _)| e).collect()
    }

    /// `x(part ∩ edges)`.
    pub fn x_within(part: &[(EdgeId, f64)], edges: &[EdgeId]) -> f64 {
        part.iter().filter(|(e, _)| edges.contains(e)).map(|&(_, w)| w).sum()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HNode {
    pub set: VSet,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub kind: CutKind,
    pub near: Option<NearCyclePartition>,
    pub degree_partition: Option<DegreePartition>,
    /// `δ↑(u)`; the whole boundary for the root.
    pub up: Vec<EdgeId>,
    /// `δ→(u)`; empty for the root.
    pub right: Vec<EdgeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BundleKind {
    Top { cut: usize, u: usize, v: usize },
    Bottom { cut: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Bundle {
    pub kind: BundleKind,
    pub edges: Vec<EdgeId>,
    pub x: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Hierarchy {
    pub root_vertex: usize,
    pub root: usize,
    /// Sorted by decreasing size, so parents precede children.
    pub nodes: Vec<HNode>,
    pub leaf_of: Vec<Option<usize>>,
    /// `p(e)`; `None` for edges at the contracted root.
    pub edge_parent: Vec<Option<usize>>,
    pub bundles: Vec<Bundle>,
    pub edge_bundle: Vec<Option<usize>>,
    pub violations: Vec<String>,
}

impl Hierarchy {
    pub fn node_of(&self, s: VSet) -> Option<usize> {
        self.nodes.iter().position(|h| h.set == s)
    }

    pub fn is_near_cycle(&self, i: usize) -> bool {
        self.nodes[i].kind != CutKind::Degree
    }

    /// `E→(S)`.
    pub fn e_right(&self, s: usize) -> Vec<EdgeId> {
        let mut out: Vec<EdgeId> = self.nodes[s]
            .children
            .iter()
            .flat_map(|&c| self.nodes[c].right.iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Top bundles with `u` as an endpoint.
    pub fn bundles_at(&self, u: usize) -> Vec<usize> {
        (0..self.bundles.len())
            .filter(|&b| matches!(self.bundles[b].kind, BundleKind::Top { u: a, v: c, .. } if a == u || c == u))
            .collect()
    }

    /// Is `e` a bottom edge.
    pub fn is_bottom(&self, e: EdgeId) -> bool {
        matches!(self.edge_bundle[e].map(|b| self.bundles[b].kind), Some(BundleKind::Bottom { .. }))
    }

    pub fn build(g: &Graph, x: &[f64], cs: &CutStructure, k: &Constants) -> Result<Hierarchy> {
        let universe = cs.universe;
        let root_vertex = cs.root;
        let root_set = universe & !bit(root_vertex);
        let mut members: Vec<VSet> = cs.sides_with(CrossClass::Uncrossed);
        let mut polygon_order: BTreeMap<VSet, Vec<VSet>> = BTreeMap::new();
        let n1 = cs.sides_with(CrossClass::OneSide);
        for comp in crossing_components(&n1, universe) {
            if comp.singleton {
                members.extend(comp.cuts.iter().copied());
                continue;
            }
            let poly = build_polygon(&comp, universe, root_vertex)?;
            if !poly.inside.is_empty() || !poly.root_outside {
                return Err(Error::Structure("one-side component with an inside atom".into()));
            }
            let atoms: Vec<VSet> = poly.outside[1..].to_vec();
            let union = atoms.iter().fold(0, |a, b| a | b);
            members.extend(atoms.iter().copied());
            members.push(union);
            polygon_order.insert(union, atoms);
        }
        members.push(root_set);
        for v in 0..g.n() {
            if v != root_vertex {
                members.push(bit(v));
            }
        }
        members.sort_by(|a, b| b.count_ones().cmp(&a.count_ones()).then(a.cmp(b)));
        members.dedup();

        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                if a & b != 0 && a & b != a && a & b != b {
                    return Err(Error::Structure(format!("hierarchy cuts {a:#b} and {b:#b} cross")));
                }
            }
            let value = g.cut_value(x, a);
            if value > 2.0 + k.eps_eta + TOL {
                return Err(Error::Structure(format!(
                    "hierarchy cut {a:#b} has value {value} above 2 + eps_eta"
                )));
            }
        }

        let mut nodes: Vec<HNode> = members
            .iter()
            .map(|&s| HNode {
                set: s,
                parent: None,
                children: Vec::new(),
                kind: CutKind::Degree,
                near: None,
                degree_partition: None,
                up: Vec::new(),
                right: Vec::new(),
            })
            .collect();
        for i in 1..nodes.len() {
            // members are sorted by decreasing size; the last superset is the smallest
            let p = (0..i)
                .rev()
                .find(|&j| members[j] & members[i] == members[i])
                .expect("root contains everything");
            nodes[i].parent = Some(p);
            nodes[p].children.push(i);
        }
        for (i, h) in nodes.iter().enumerate() {
            if h.children.is_empty() {
                continue;
            }
            let u = h.children.iter().fold(0, |a, &c| a | members[c]);
            if u != h.set {
                return Err(Error::Structure(format!("cut {:#b} is not the union of its children", members[i])));
            }
        }

        let leaf_of: Vec<Option<usize>> = (0..g.n())
            .map(|v| (v != root_vertex).then(|| members.iter().position(|&s| s == bit(v)).expect("singleton")))
            .collect();

        for i in 0..nodes.len() {
            let s = nodes[i].set;
            let order: Option<Vec<usize>> = if let Some(atoms) = polygon_order.get(&s) {
                let ord: Vec<usize> = atoms
                    .iter()
                    .map(|a| members.iter().position(|m| m == a).expect("atom is a member"))
                    .collect();
                let mut want = ord.clone();
                want.sort_unstable();
                let mut have = nodes[i].children.clone();
                have.sort_unstable();
                if want != have {
                    return Err(Error::Structure(format!(
                        "children of near-cycle cut {s:#b} are not its polygon atoms"
                    )));
                }
                nodes[i].kind = CutKind::NearCycle;
                Some(ord)
            } else if nodes[i].children.len() == 2 {
                let mut ord = nodes[i].children.clone();
                ord.sort_by_key(|&c| members[c].trailing_zeros());
                nodes[i].kind = CutKind::Triangle;
                Some(ord)
            } else {
                None
            };
            if let Some(ord) = order {
                nodes[i].near = Some(near_cycle_partition(g, x, universe, s, &ord, &members, k)?);
            }
        }

        for i in 0..nodes.len() {
            let d = g.delta(nodes[i].set);
            match nodes[i].parent {
                None => nodes[i].up = d,
                Some(p) => {
                    let dp = g.delta(nodes[p].set);
                    let (up, right): (Vec<EdgeId>, Vec<EdgeId>) = d.into_iter().partition(|e| dp.contains(e));
                    nodes[i].up = up;
                    nodes[i].right = right;
                }
            }
        }

        let mut violations = Vec::new();
        for i in 0..nodes.len() {
            let Some(p) = nodes[i].parent else { continue };
            if nodes[p].kind != CutKind::Degree {
                continue;
            }
            let dp = degree_partition(g, x, &nodes, i, k, &mut violations);
            nodes[i].degree_partition = Some(dp);
        }

        let mut edge_parent = vec![None; g.m()];
        for (e, slot) in edge_parent.iter_mut().enumerate() {
            let ed = g.edge(e);
            if ed.u == root_vertex || ed.v == root_vertex {
                continue;
            }
            let both = bit(ed.u) | bit(ed.v);
            *slot = (0..nodes.len()).rev().find(|&j| members[j] & both == both);
        }

        let mut groups: BTreeMap<(usize, usize, usize), Vec<EdgeId>> = BTreeMap::new();
        for e in 0..g.m() {
            let Some(s) = edge_parent[e] else { continue };
            let key = if nodes[s].kind == CutKind::Degree {
                let ed = g.edge(e);
                let child = |v: usize| {
                    *nodes[s]
                        .children
                        .iter()
                        .find(|&&c| members[c] & bit(v) != 0)
                        .expect("children cover the parent")
                };
                let (a, b) = (child(ed.u), child(ed.v));
                (s, a.min(b), a.max(b))
            } else {
                (s, usize::MAX, usize::MAX)
            };
            groups.entry(key).or_default().push(e);
        }
        let mut bundles: Vec<Bundle> = groups
            .into_iter()
            .map(|((s, u, v), edges)| Bundle {
                kind: if u == usize::MAX {
                    BundleKind::Bottom { cut: s }
                } else {
                    BundleKind::Top { cut: s, u, v }
                },
                x: edges.iter().map(|&e| x[e]).sum(),
                edges,
            })
            .collect();
        bundles.sort_by_key(|b| b.edges[0]);
        let mut edge_bundle = vec![None; g.m()];
        for (bi, b) in bundles.iter().enumerate() {
            for &e in &b.edges {
                edge_bundle[e] = Some(bi);
            }
        }

        Ok(Hierarchy {
            root_vertex,
            root: 0,
            nodes,
            leaf_of,
            edge_parent,
            bundles,
            edge_bundle,
            violations,
        })
    }
}

fn near_cycle_partition(
    g: &Graph,
    x: &[f64],
    universe: VSet,
    s: VSet,
    order: &[usize],
    members: &[VSet],
    k: &Constants,
) -> Result<NearCyclePartition> {
    let out = universe & !s;
    let atoms: Vec<VSet> = order.iter().map(|&i| members[i]).collect();
    let m1 = atoms.len();
    let a = g.between(out, atoms[0]);
    let b = g.between(atoms[m1 - 1], out);
    let mut c = Vec::new();
    if m1 > 2 {
        for &at in &atoms[1..m1 - 1] {
            c.extend(g.between(at, out));
        }
    }
    c.sort_unstable();
    let lo = 1.0 - k.eps_eta - TOL;
    let (xa, xb, xc) = (Graph::weight(x, &a), Graph::weight(x, &b), Graph::weight(x, &c));
    if xa < lo || xb < lo || xc > k.eps_eta + TOL {
        return Err(Error::Structure(format!(
            "near-cycle cut {s:#b}: x(A) = {xa}, x(B) = {xb}, x(C) = {xc}"
        )));
    }
    for w in atoms.windows(2) {
        let v = Graph::weight(x, &g.between(w[0], w[1]));
        if v < lo {
            return Err(Error::Structure(format!(
                "near-cycle cut {s:#b}: consecutive atoms share only {v}"
            )));
        }
    }
    Ok(NearCyclePartition {
        order: order.to_vec(),
        a,
        b,
        c,
    })
}

fn descendants(nodes: &[HNode], u: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = nodes[u].children.clone();
    while let Some(c) = stack.pop() {
        out.push(c);
        stack.extend(nodes[c].children.iter().copied());
    }
    out
}

/// Split `pool` into a part with `x` in `[lo, hi]` and the rest: the
/// smallest whole-edge subset if one exists, else greedy by id with the
/// last edge split.
fn choose_part(pool: &[EdgeId], x: &[f64], lo: f64, hi: f64) -> (Vec<(EdgeId, f64)>, Vec<(EdgeId, f64)>) {
    let whole = |ids: &[EdgeId]| ids.iter().map(|&e| (e, x[e])).collect::<Vec<_>>();
    if pool.len() <= SUBSET_SEARCH {
        let mut masks: Vec<u32> = (1u32..(1 << pool.len())).collect();
        masks.sort_by_key(|&m| (m.count_ones(), (0..32).filter(|i| m & (1 << i) != 0).collect::<Vec<u32>>()));
        for m in masks {
            let s: f64 = (0..pool.len()).filter(|i| m & (1 << i) != 0).map(|i| x[pool[i]]).sum();
            if s >= lo - TOL && s <= hi + TOL {
                let (inn, rest): (Vec<EdgeId>, Vec<EdgeId>) =
                    (0..pool.len()).map(|i| (i, pool[i])).fold((Vec::new(), Vec::new()), |mut acc, (i, e)| {
                        if m & (1 << i) != 0 {
                            acc.0.push(e)
                        } else {
                            acc.1.push(e)
                        }
                        acc
                    });
                return (whole(&inn), whole(&rest));
            }
        }
    }
    let target = 0.5 * (lo + hi);
    let mut part = Vec::new();
    let mut rest = Vec::new();
    let mut sum = 0.0;
    for &e in pool {
        if sum >= target - TOL {
            rest.push((e, x[e]));
        } else if sum + x[e] <= target + TOL {
            part.push((e, x[e]));
            sum += x[e];
        } else {
            let take = target - sum;
            part.push((e, take));
            rest.push((e, x[e] - take));
            sum = target;
        }
    }
    (part, rest)
}

fn degree_partition(
    g: &Graph,
    x: &[f64],
    nodes: &[HNode],
    u: usize,
    k: &Constants,
    violations: &mut Vec<String>,
) -> DegreePartition {
    let su = nodes[u].set;
    let du = g.delta(su);
    let lo11 = 1.0 - k.eps_11;
    let cross = |a: usize| -> Vec<EdgeId> {
        let da = g.delta(nodes[a].set);
        du.iter().copied().filter(|e| da.contains(e)).collect()
    };
    let desc = descendants(nodes, u);
    let cands: Vec<usize> = desc
        .iter()
        .copied()
        .filter(|&a| Graph::weight(x, &cross(a)) >= lo11 - TOL)
        .collect();
    let mut minimal: Vec<usize> = cands
        .iter()
        .copied()
        .filter(|&a| {
            !cands
                .iter()
                .any(|&b| b != a && nodes[b].set & nodes[a].set == nodes[b].set)
        })
        .collect();
    minimal.sort_by_key(|&a| nodes[a].set.trailing_zeros());
    if minimal.len() > 2 {
        violations.push(format!(
            "cut {:#b} has {} minimal descendants carrying half its boundary",
            su,
            minimal.len()
        ));
    }
    let whole = |ids: &[EdgeId]| ids.iter().map(|&e| (e, x[e])).collect::<Vec<_>>();
    let (case, a, b, c) = match minimal.len() {
        0 => {
            let total = Graph::weight(x, &du);
            let lo = lo11.max(total - 1.0 - k.eps_eta);
            let hi = (1.0 + k.eps_eta).min(total - 1.0 + k.eps_11);
            if lo > hi + TOL {
                violations.push(format!("no degree bipartition of cut {su:#b} (x = {total})"));
            }
            let (a, b) = choose_part(&du, x, lo, hi.max(lo));
            (3, a, b, Vec::new())
        }
        1 => {
            let a_ids = cross(minimal[0]);
            let a_prime = *nodes[u]
                .children
                .iter()
                .find(|&&c| nodes[c].set & nodes[minimal[0]].set == nodes[minimal[0]].set)
                .expect("descendant lies in a child");
            let da = g.delta(nodes[a_prime].set);
            let pool: Vec<EdgeId> = du.iter().copied().filter(|e| !da.contains(e)).collect();
            let avail = Graph::weight(x, &pool);
            if avail < lo11 - TOL {
                violations.push(format!("cut {su:#b}: only {avail} available for B"));
            }
            let (b, rest_pool) = choose_part(&pool, x, lo11, 1.0 + k.eps_eta);
            let mut c: Vec<(EdgeId, f64)> =
                du.iter().copied().filter(|e| !a_ids.contains(e) && !pool.contains(e)).map(|e| (e, x[e])).collect();
            c.extend(rest_pool);
            c.sort_by_key(|p| p.0);
            (2, whole(&a_ids), b, c)
        }
        _ => {
            let a_ids = cross(minimal[0]);
            let b_ids = cross(minimal[1]);
            let c: Vec<EdgeId> = du
                .iter()
                .copied()
                .filter(|e| !a_ids.contains(e) && !b_ids.contains(e))
                .collect();
            (1, whole(&a_ids), whole(&b_ids), whole(&c))
        }
    };
    let mut seen: BTreeMap<EdgeId, usize> = BTreeMap::new();
    for &(e, _) in a.iter().chain(&b).chain(&c) {
        *seen.entry(e).or_insert(0) += 1;
    }
    let split = seen.values().any(|&k| k > 1);
    DegreePartition { case, a, b, c, split }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{blown_k4_lp, cycle_lp, necklace_lp, prepare_on_circle};
    use crate::graph::set_of;

    fn build(raw: &crate::instance::LpSolution, eta: f64) -> (crate::fixtures::Prepared, Hierarchy) {
        let p = prepare_on_circle(raw).unwrap();
        let k = Constants::test().with_eta(eta);
        let cs = CutStructure::build(&p.sg.contracted, &p.sg.x, p.sg.root, eta).unwrap();
        let h = Hierarchy::build(&p.sg.contracted, &p.sg.x, &cs, &k).unwrap();
        (p, h)
    }

    fn check_invariants(g: &Graph, h: &Hierarchy) {
        for (i, a) in h.nodes.iter().enumerate() {
            for b in &h.nodes[i + 1..] {
                let m = a.set & b.set;
                assert!(m == 0 || m == a.set || m == b.set);
            }
            if !a.children.is_empty() {
                assert_eq!(a.children.iter().fold(0, |s, &c| s | h.nodes[c].set), a.set);
            }
            let mut d = a.up.clone();
            d.extend(&a.right);
            d.sort_unstable();
            assert_eq!(d, g.delta(a.set));
        }
        let mut count = vec![0; g.m()];
        for b in &h.bundles {
            for &e in &b.edges {
                count[e] += 1;
            }
        }
        for e in 0..g.m() {
            let ed = g.edge(e);
            let at_root = ed.u == h.root_vertex || ed.v == h.root_vertex;
            assert_eq!(count[e], if at_root { 0 } else { 1 });
        }
        for v in 0..g.n() {
            assert_eq!(h.leaf_of[v].is_some(), v != h.root_vertex);
        }
    }

    #[test]
    fn cycle_root_is_near_cycle() {
        let (p, h) = build(&cycle_lp(6), 0.1);
        let g = &p.sg.contracted;
        check_invariants(g, &h);
        let root = &h.nodes[h.root];
        assert_eq!(root.set, set_of(&[1, 2, 3, 4, 5]));
        assert_eq!(root.kind, CutKind::NearCycle);
        let near = root.near.as_ref().unwrap();
        assert!(near.c.is_empty());
        // edges at vertex 0 are halved by the split
        assert_eq!((near.a.len(), near.b.len()), (2, 2));
        assert_eq!(h.nodes.len(), 6);
        assert!(h.bundles.iter().all(|b| matches!(b.kind, BundleKind::Bottom { cut: 0 })));
    }

    #[test]
    fn necklace_triangles() {
        let (p, h) = build(&necklace_lp(), 0.1);
        let g = &p.sg.contracted;
        check_invariants(g, &h);
        assert_eq!(h.nodes[h.root].kind, CutKind::NearCycle);
        for s in [set_of(&[1, 2]), set_of(&[4, 5])] {
            let i = h.node_of(s).unwrap();
            assert_eq!(h.nodes[i].kind, CutKind::Triangle);
            assert_eq!(h.nodes[i].parent, Some(h.root));
            assert!(h.nodes[i].near.as_ref().unwrap().c.is_empty());
        }
        assert!(h.node_of(set_of(&[3, 4, 5])).is_none());
    }

    #[test]
    fn blown_k4_degree_root() {
        let (p, h) = build(&blown_k4_lp(), 0.1);
        let g = &p.sg.contracted;
        check_invariants(g, &h);
        assert_eq!(h.nodes[h.root].kind, CutKind::Degree);
        let pair = h.node_of(set_of(&[4, 5])).unwrap();
        assert_eq!(h.nodes[pair].kind, CutKind::Triangle);
        assert_eq!(h.nodes[pair].parent, Some(h.root));
        let top = h.bundles.iter().filter(|b| matches!(b.kind, BundleKind::Top { .. })).count();
        assert!(top > 0);
        for &c in &h.nodes[h.root].children {
            let dp = h.nodes[c].degree_partition.as_ref().unwrap();
            let total: f64 = dp.a.iter().chain(&dp.b).chain(&dp.c).map(|p| p.1).sum();
            assert!((total - g.cut_value(&p.sg.x, h.nodes[c].set)).abs() < 1e-9);
        }
        // the pair's halves {4} and {5} each carry one unit of its boundary
        let dp = h.nodes[pair].degree_partition.as_ref().unwrap();
        assert_eq!(dp.case, 1);
        assert!(dp.c.is_empty());
    }

    #[test]
    fn greedy_split_when_no_subset_fits() {
        let x = [0.4; 5];
        let (a, b) = choose_part(&[0, 1, 2, 3, 4], &x, 0.99, 1.01);
        let sa: f64 = a.iter().map(|p| p.1).sum();
        let sb: f64 = b.iter().map(|p| p.1).sum();
        assert!((sa - 1.0).abs() < 1e-12 && (sb - 1.0).abs() < 1e-12);
        assert_eq!(a.last().unwrap().0, b[0].0);
        let (a, _) = choose_part(&[0, 1, 2], &[0.5, 0.5, 1.0], 0.9, 1.1);
        assert_eq!(a, vec![(2, 1.0)]);
    }
}
