//! Increase events for crossed near-minimum cuts and the slack vector `s*`.
//!
//! Vertex sets live in `G/e0`; edge ids are shared with `G`. Every
//! expectation is returned as a [`LinearForm`] built once and evaluated
//! under any partial assignment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::cuts::{build_polygon, crossing_components, CrossClass, CutStructure, Polygon, CUT_TOL};
use crate::error::{Error, Result};
use crate::graph::{bit, EdgeId, Graph, VSet};
use crate::linform::{capped_sum_form, LinearForm, Literal};
use crate::treedist::ParityQuery;

/// Smaller cut first: fewer vertices, then smaller mask.
fn smaller(a: VSet, b: VSet) -> bool {
    (a.count_ones(), a) < (b.count_ones(), b)
}

fn count_in(tree_mark: &[bool], set: &[EdgeId]) -> usize {
    set.iter().filter(|&&e| tree_mark[e]).count()
}

fn mark(m: usize, tree: &[EdgeId]) -> Vec<bool> {
    let mut v = vec![false; m];
    for &e in tree {
        v[e] = true;
    }
    v
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BothSideCut {
    pub side: VSet,
    pub s_left: VSet,
    pub s_right: VSet,
    pub e_left: Vec<EdgeId>,
    pub e_right: Vec<EdgeId>,
    pub e_circ: Vec<EdgeId>,
}

/// A left (`B←`) or right (`B→`) bad event at one polygon point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BadEvent {
    pub polygon: usize,
    pub point: usize,
    /// `true` for `B→(p)`, defined through `L(p)`.
    pub rightward: bool,
    pub cut: VSet,
    /// Edges that must hold exactly one tree edge.
    pub one: Vec<EdgeId>,
    /// Edges that must hold no tree edge.
    pub none: Vec<EdgeId>,
    /// `E(B(p))`.
    pub edges: Vec<EdgeId>,
}

impl BadEvent {
    /// The complement event: `|one ∩ T| = 1` and `|none ∩ T| = 0`.
    pub fn complement(&self, n: usize) -> ParityQuery {
        ParityQuery::new().with(self.one.clone(), 1, n).with(self.none.clone(), 0, n)
    }

    pub fn occurs(&self, tree_mark: &[bool]) -> bool {
        count_in(tree_mark, &self.one) != 1 || count_in(tree_mark, &self.none) != 0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointSets {
    pub point: usize,
    pub l: Option<VSet>,
    pub r: Option<VSet>,
    pub l_star: VSet,
    pub r_star: VSet,
    pub e_bad_right: Vec<EdgeId>,
    pub e_bad_left: Vec<EdgeId>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BothSidesPolygon {
    pub component: usize,
    pub cuts: Vec<BothSideCut>,
    pub points: Vec<PointSets>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BothSidesTables {
    pub polygons: Vec<BothSidesPolygon>,
    pub events: Vec<BadEvent>,
    /// Per edge: indices into `events` whose edge set contains it.
    pub edge_events: Vec<Vec<usize>>,
    pub violations: Vec<String>,
}

/// Is `e` internal to `poly`: endpoints in two distinct non-root atoms.
pub fn is_internal(g: &Graph, poly: &Polygon, e: EdgeId) -> bool {
    let ed = g.edge(e);
    let atoms = poly.all_atoms();
    let find = |v: usize| atoms.iter().position(|&a| a & bit(v) != 0);
    match (find(ed.u), find(ed.v)) {
        (Some(a), Some(b)) => {
            a != b && atoms[a] & bit(poly.root) == 0 && atoms[b] & bit(poly.root) == 0
        }
        _ => false,
    }
}

fn argbest(cands: impl Iterator<Item = (VSet, usize)>, maximize: bool) -> Option<VSet> {
    let mut best: Option<(VSet, usize)> = None;
    for (c, k) in cands {
        best = match best {
            None => Some((c, k)),
            Some((b, bk)) => {
                let better = if maximize { k > bk } else { k < bk };
                if better || (k == bk && smaller(c, b)) {
                    Some((c, k))
                } else {
                    Some((b, bk))
                }
            }
        };
    }
    best.map(|(c, _)| c)
}

/// Preprocessing for cuts crossed on both sides.
pub fn build_both_sides_tables(g: &Graph, cs: &CutStructure) -> BothSidesTables {
    let universe = cs.universe;
    let mut polygons = Vec::new();
    let mut events = Vec::new();
    for (ci, comp) in cs.components.iter().enumerate() {
        let Some(poly) = cs.polygons[ci].as_ref() else { continue };
        let n2: Vec<VSet> = cs
            .cuts
            .iter()
            .filter(|c| c.component == ci && c.class == CrossClass::BothSides)
            .map(|c| c.cut.side)
            .collect();
        if n2.is_empty() {
            continue;
        }
        let mut cuts = Vec::new();
        for &s in &n2 {
            let left = comp.cuts.iter().filter(|&&o| poly.crosses_left(o, s, universe));
            let s_left = argbest(left.map(|&o| (o, poly.count_outside(s & o))), false).unwrap_or(0);
            let right = comp.cuts.iter().filter(|&&o| poly.crosses_right(o, s, universe));
            let s_right = argbest(right.map(|&o| (o, poly.count_outside(s & o))), false).unwrap_or(0);
            let e_left = g.between(s & s_left, s_left & !s);
            let e_right = g.between(s & s_right, s_right & !s);
            let e_circ: Vec<EdgeId> = g
                .delta(s)
                .into_iter()
                .filter(|e| !e_left.contains(e) && !e_right.contains(e))
                .collect();
            cuts.push(BothSideCut {
                side: s,
                s_left,
                s_right,
                e_left,
                e_right,
                e_circ,
            });
        }
        let info = |s: VSet| cuts.iter().find(|c| c.side == s).expect("N2 cut");
        let pi = polygons.len();
        let mut points = Vec::new();
        for p in 0..poly.m() {
            let l = n2
                .iter()
                .copied()
                .filter(|&s| poly.last_point(s) == Some(p))
                .fold(None, |acc: Option<VSet>, s| match acc {
                    Some(a) if !smaller(s, a) => Some(a),
                    _ => Some(s),
                });
            let r = n2
                .iter()
                .copied()
                .filter(|&s| poly.first_point(s) == Some(p))
                .fold(None, |acc: Option<VSet>, s| match acc {
                    Some(a) if !smaller(s, a) => Some(a),
                    _ => Some(s),
                });
            let mut ps = PointSets {
                point: p,
                l,
                r,
                l_star: 0,
                r_star: 0,
                e_bad_right: Vec::new(),
                e_bad_left: Vec::new(),
            };
            if let Some(l) = l {
                let t = info(l);
                let x = l & t.s_right;
                let cands = comp.cuts.iter().filter(|&&o| poly.crosses_left(o, x, universe));
                ps.l_star = argbest(cands.map(|&o| (o, poly.count_outside(o & x))), true).unwrap_or(0);
                ps.e_bad_right = g.between(x & !ps.l_star, t.s_right & !x);
                events.push(BadEvent {
                    polygon: pi,
                    point: p,
                    rightward: true,
                    cut: l,
                    one: t.e_right.clone(),
                    none: t.e_circ.clone(),
                    edges: ps.e_bad_right.clone(),
                });
            }
            if let Some(r) = r {
                let t = info(r);
                let y = r & t.s_left;
                let cands = comp.cuts.iter().filter(|&&o| poly.crosses_right(o, y, universe));
                ps.r_star = argbest(cands.map(|&o| (o, poly.count_outside(o & y))), true).unwrap_or(0);
                ps.e_bad_left = g.between(y & !ps.r_star, t.s_left & !y);
                events.push(BadEvent {
                    polygon: pi,
                    point: p,
                    rightward: false,
                    cut: r,
                    one: t.e_left.clone(),
                    none: t.e_circ.clone(),
                    edges: ps.e_bad_left.clone(),
                });
            }
            points.push(ps);
        }
        polygons.push(BothSidesPolygon {
            component: ci,
            cuts,
            points,
        });
    }
    let mut edge_events = vec![Vec::new(); g.m()];
    let mut violations = Vec::new();
    for (k, ev) in events.iter().enumerate() {
        let poly = cs.polygons[polygons[ev.polygon].component].as_ref().expect("polygon");
        for &e in &ev.edges {
            if is_internal(g, poly, e) {
                edge_events[e].push(k);
            }
        }
    }
    for (e, evs) in edge_events.iter().enumerate() {
        let right = evs.iter().filter(|&&k| events[k].rightward).count();
        let left = evs.len() - right;
        if right > 2 || left > 2 {
            violations.push(format!("edge {e} lies in {right} right and {left} left bad-event sets"));
        }
    }
    BothSidesTables {
        polygons,
        events,
        edge_events,
        violations,
    }
}

impl BothSidesTables {
    /// `P{I_e | Set}` as a linear form.
    pub fn prob_increase_both(&self, n: usize, e: EdgeId) -> LinearForm {
        let evs = &self.edge_events[e];
        if evs.is_empty() {
            return LinearForm::zero(n);
        }
        let mut all = ParityQuery::new();
        for &k in evs {
            all = all.merged(&self.events[k].complement(n));
        }
        let mut f = LinearForm::constant(n, 1.0);
        f.add_event(&all, -1.0);
        f
    }

    /// `I_e` on a fixed tree.
    pub fn realized(&self, e: EdgeId, tree_mark: &[bool]) -> f64 {
        let hit = self.edge_events[e].iter().any(|&k| self.events[k].occurs(tree_mark));
        if hit {
            1.0
        } else {
            0.0
        }
    }
}

/// A polygon of a component of cuts crossed on one side, or a degenerate
/// triangle; `atoms[0]` is the root atom.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OneSidePolygon {
    pub atoms: Vec<VSet>,
    pub degenerate: bool,
    pub cuts: Vec<VSet>,
    pub relevant: Vec<usize>,
    pub left_hierarchy: Vec<VSet>,
    pub right_hierarchy: Vec<VSet>,
    /// `map[i]` is the multiset mapped to `E(a_{i-1}, a_i)`.
    pub map: Vec<Vec<VSet>>,
}

impl OneSidePolygon {
    pub fn m(&self) -> usize {
        self.atoms.len()
    }

    /// Indices of the atoms of `s`, which form an interval in `1..m`.
    fn span(&self, s: VSet) -> (usize, usize) {
        let idx: Vec<usize> = (1..self.m()).filter(|&i| self.atoms[i] & s == self.atoms[i]).collect();
        (idx[0], *idx.last().expect("nonempty"))
    }

    pub fn is_atom(&self, s: VSet) -> bool {
        self.relevant.iter().any(|&i| self.atoms[i] == s)
    }

    pub fn union(&self) -> VSet {
        self.atoms[1..].iter().fold(0, |a, b| a | b)
    }

    /// Unhappiness of `c` as a literal.
    pub fn unhappy(&self, g: &Graph, n: usize, c: VSet) -> Literal {
        let (l, r) = self.span(c);
        if l == 1 || r == self.m() - 1 {
            let rest = self.union() & !c;
            Literal {
                query: ParityQuery::new().with(g.between(c, rest), 1, n),
                positive: false,
            }
        } else {
            Literal {
                query: ParityQuery::new().with(g.delta(c), 1, 2),
                positive: true,
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OneSideTables {
    pub polygons: Vec<OneSidePolygon>,
    /// Per edge: `(polygon, i)` with the edge in `E(a_{i-1}, a_i)`.
    pub edge_group: Vec<Option<(usize, usize)>>,
    pub violations: Vec<String>,
}

/// Components of the cuts crossed on one side, as polygons with the root
/// atom first, plus degenerate triangles from uncrossed cuts.
pub fn one_side_polygons(g: &Graph, x: &[f64], cs: &CutStructure) -> Result<Vec<OneSidePolygon>> {
    let universe = cs.universe;
    let root = cs.root;
    let n1 = cs.sides_with(CrossClass::OneSide);
    let mut out = Vec::new();
    for comp in crossing_components(&n1, universe) {
        if comp.singleton {
            continue;
        }
        let poly = build_polygon(&comp, universe, root)?;
        if !poly.inside.is_empty() || !poly.root_outside {
            return Err(Error::Structure("one-side component with an inside atom".into()));
        }
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &s in &comp.cuts {
            let cl = comp.cuts.iter().any(|&o| poly.crosses_left(o, s, universe));
            let cr = comp.cuts.iter().any(|&o| poly.crosses_right(o, s, universe));
            match (cl, cr) {
                (true, false) => right.push(s),
                (false, true) => left.push(s),
                _ => return Err(Error::Structure(format!("cut {s:#b} is not crossed on exactly one side"))),
            }
        }
        out.push(finish_one_side(g, x, cs.eta, poly.outside.clone(), false, comp.cuts.clone(), left, right));
    }
    let n0 = cs.sides_with(CrossClass::Uncrossed);
    for &c in &n0 {
        let mut found = None;
        'outer: for &a in &n0 {
            if a == c || a & c != a {
                continue;
            }
            for &b in &n0 {
                if b != c && a & b == 0 && a | b == c && a.trailing_zeros() < b.trailing_zeros() {
                    found = Some((a, b));
                    break 'outer;
                }
            }
        }
        if let Some((a, b)) = found {
            let atoms = vec![universe & !c, a, b];
            out.push(finish_one_side(g, x, cs.eta, atoms, true, Vec::new(), Vec::new(), Vec::new()));
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn finish_one_side(
    g: &Graph,
    x: &[f64],
    eta: f64,
    atoms: Vec<VSet>,
    degenerate: bool,
    cuts: Vec<VSet>,
    left_hierarchy: Vec<VSet>,
    right_hierarchy: Vec<VSet>,
) -> OneSidePolygon {
    let m = atoms.len();
    let relevant: Vec<usize> = (1..m).filter(|&i| g.cut_value(x, atoms[i]) <= 2.0 + eta + CUT_TOL).collect();
    let mut poly = OneSidePolygon {
        atoms,
        degenerate,
        cuts,
        relevant,
        left_hierarchy,
        right_hierarchy,
        map: vec![Vec::new(); m + 1],
    };
    let rel_atoms: Vec<VSet> = poly.relevant.iter().map(|&i| poly.atoms[i]).collect();
    for family in [&poly.right_hierarchy, &poly.left_hierarchy] {
        let plus: Vec<VSet> = family.iter().copied().chain(rel_atoms.iter().copied()).collect();
        let widest = |pick: &dyn Fn(VSet) -> bool| -> Option<VSet> {
            plus.iter()
                .copied()
                .filter(|&s| pick(s))
                .max_by(|&a, &b| {
                    let ka = poly.atoms.iter().filter(|&&t| t & a == t).count();
                    let kb = poly.atoms.iter().filter(|&&t| t & b == t).count();
                    ka.cmp(&kb).then(b.cmp(&a))
                })
        };
        let mut adds = Vec::new();
        for i in 2..m {
            if let Some(s) = widest(&|s| poly.span(s).0 == i) {
                adds.push((i, s));
            }
            if let Some(s) = widest(&|s| poly.span(s).1 == i - 1) {
                adds.push((i, s));
            }
        }
        for (i, s) in adds {
            poly.map[i].push(s);
        }
    }
    poly
}

pub fn build_one_side_tables(g: &Graph, x: &[f64], cs: &CutStructure) -> Result<OneSideTables> {
    let polygons = one_side_polygons(g, x, cs)?;
    let mut edge_group = vec![None; g.m()];
    let mut violations = Vec::new();
    for (pi, poly) in polygons.iter().enumerate() {
        for i in 2..poly.m() {
            if poly.map[i].len() > 4 {
                violations.push(format!("edge group {i} of one-side polygon {pi} has {} mapped cuts", poly.map[i].len()));
            }
            for e in g.between(poly.atoms[i - 1], poly.atoms[i]) {
                match edge_group[e] {
                    None => edge_group[e] = Some((pi, i)),
                    Some(_) => violations.push(format!("edge {e} is internal to two one-side polygons")),
                }
            }
        }
    }
    Ok(OneSideTables {
        polygons,
        edge_group,
        violations,
    })
}

impl OneSideTables {
    /// The distinct mapped cuts of `e` with their summed weights.
    pub fn weighted_map(&self, e: EdgeId) -> Vec<(usize, VSet, f64)> {
        let Some((pi, i)) = self.edge_group[e] else { return Vec::new() };
        let poly = &self.polygons[pi];
        let mut w: BTreeMap<VSet, f64> = BTreeMap::new();
        for &c in &poly.map[i] {
            *w.entry(c).or_insert(0.0) += if poly.is_atom(c) { 0.5 } else { 1.0 };
        }
        w.into_iter().map(|(c, v)| (pi, c, v)).collect()
    }

    /// `E[I'_e | Set]` as a linear form.
    pub fn prob_increase_one(&self, g: &Graph, n: usize, e: EdgeId) -> LinearForm {
        let events: Vec<(Literal, f64)> = self
            .weighted_map(e)
            .into_iter()
            .map(|(pi, c, w)| (self.polygons[pi].unhappy(g, n, c), w))
            .collect();
        if events.is_empty() {
            return LinearForm::zero(n);
        }
        capped_sum_form(n, &events, 1.0)
    }

    /// `I'_e` on a fixed tree.
    pub fn realized(&self, g: &Graph, e: EdgeId, tree_mark: &[bool]) -> f64 {
        let mut sum = 0.0;
        for (pi, c, w) in self.weighted_map(e) {
            let poly = &self.polygons[pi];
            let (l, r) = poly.span(c);
            let unhappy = if l == 1 || r == poly.m() - 1 {
                count_in(tree_mark, &g.between(c, poly.union() & !c)) != 1
            } else {
                count_in(tree_mark, &g.delta(c)) % 2 == 1
            };
            if unhappy {
                sum += w;
            }
        }
        sum.min(1.0)
    }
}

/// Everything needed for `E[c(s*) | Set]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SStar {
    pub both: BothSidesTables,
    pub one: OneSideTables,
    pub n: usize,
}

impl SStar {
    pub fn build(g: &Graph, x: &[f64], n: usize, cs: &CutStructure) -> Result<SStar> {
        Ok(SStar {
            both: build_both_sides_tables(g, cs),
            one: build_one_side_tables(g, x, cs)?,
            n,
        })
    }

    pub fn violations(&self) -> Vec<String> {
        self.both.violations.iter().chain(&self.one.violations).cloned().collect()
    }

    fn coefficients(k: &Constants, x_e: f64) -> (f64, f64) {
        let shared = (1.0 - k.gamma) * (2.0 + k.eta) / (1.0 - k.eps_eta) * k.beta * x_e;
        (shared + k.gamma * 2.0 * k.beta * x_e, shared)
    }

    /// `E[c(s*_e) | Set]` as a linear form.
    pub fn exp_c_sstar(&self, g: &Graph, k: &Constants, e: EdgeId, x_e: f64, c_e: f64) -> LinearForm {
        let (cb, co) = Self::coefficients(k, x_e);
        let mut f = self.both.prob_increase_both(self.n, e).scaled(c_e * cb);
        f.add(&self.one.prob_increase_one(g, self.n, e), c_e * co);
        f
    }

    /// `c(s*_e)` on a fixed tree, computed from the event definitions.
    pub fn realized(&self, g: &Graph, k: &Constants, e: EdgeId, x_e: f64, c_e: f64, tree: &[EdgeId]) -> f64 {
        let tm = mark(g.m(), tree);
        let (cb, co) = Self::coefficients(k, x_e);
        c_e * (cb * self.both.realized(e, &tm) + co * self.one.realized(g, e, &tm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{necklace_lp, perturbed_ring_lp, prepare_on_circle};
    use crate::graph::{set_members, set_of};

    fn cycle(n: usize) -> (Graph, Vec<f64>) {
        let pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        (Graph::from_pairs(n, &pairs), vec![1.0; n])
    }

    fn trees(g: &Graph) -> Vec<Vec<EdgeId>> {
        let k = g.n() - 1;
        (0u64..(1 << g.m()))
            .filter(|m| m.count_ones() as usize == k)
            .map(set_members)
            .filter(|t| g.is_spanning_tree(t))
            .collect()
    }

    #[test]
    fn cycle_both_sides_sets() {
        let (g, x) = cycle(6);
        let cs = CutStructure::build(&g, &x, 0, 0.1).unwrap();
        let t = build_both_sides_tables(&g, &cs);
        assert_eq!(t.polygons.len(), 1);
        let s = t.polygons[0].cuts.iter().find(|c| c.side == set_of(&[2, 3])).unwrap();
        assert_eq!(s.s_left, set_of(&[1, 2]));
        assert_eq!(s.s_right, set_of(&[3, 4]));
        assert_eq!(s.e_left, g.between(bit(2), bit(1)));
        assert_eq!(s.e_right, g.between(bit(3), bit(4)));
        assert!(s.e_circ.is_empty());
        assert!(t.violations.is_empty());
    }

    #[test]
    fn cycle_one_side_map() {
        let (g, x) = cycle(6);
        let cs = CutStructure::build(&g, &x, 0, 0.1).unwrap();
        let t = build_one_side_tables(&g, &x, &cs).unwrap();
        let big: Vec<&OneSidePolygon> = t.polygons.iter().filter(|p| !p.degenerate).collect();
        assert_eq!(big.len(), 1);
        assert_eq!(big[0].m(), 6);
        assert_eq!(big[0].atoms[0], bit(0));
        for i in 2..6 {
            assert!(big[0].map[i].len() <= 4);
        }
        let total = big[0].left_hierarchy.len() + big[0].right_hierarchy.len();
        assert_eq!(total, big[0].cuts.len());
    }

    #[test]
    fn degenerate_triangle() {
        // {1,2,3,4} splits into the pairs {1,2} and {3,4}
        let pairs = [(0, 5), (1, 2), (3, 4), (5, 1), (5, 3), (0, 2), (0, 4), (1, 3), (2, 4)];
        let g = Graph::from_pairs(6, &pairs);
        let x = vec![1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5];
        let cs = CutStructure::build(&g, &x, 0, 0.1).unwrap();
        let t = build_one_side_tables(&g, &x, &cs).unwrap();
        let tri = t.polygons.iter().find(|p| p.degenerate && p.atoms[0] == set_of(&[0, 5])).unwrap();
        assert_eq!(tri.atoms, vec![set_of(&[0, 5]), set_of(&[1, 2]), set_of(&[3, 4])]);
        assert!(t.polygons.iter().any(|p| p.degenerate && p.atoms[1] == bit(1)));
        assert_eq!(tri.map[2].len(), 4);
    }

    #[test]
    fn necklace_events() {
        let p = prepare_on_circle(&necklace_lp()).unwrap();
        let g = &p.sg.contracted;
        let cs = CutStructure::build(g, &p.sg.x, p.sg.root, 0.1).unwrap();
        assert_eq!(cs.sides_with(CrossClass::BothSides), vec![set_of(&[3, 4, 5])]);
        let t = build_both_sides_tables(g, &cs);
        let mut sets: Vec<Vec<EdgeId>> = t.events.iter().map(|e| e.edges.clone()).collect();
        sets.sort();
        let mut want = vec![g.between(set_of(&[4, 5]), bit(6)), g.between(bit(3), set_of(&[1, 2]))];
        want.sort();
        assert_eq!(sets, want);
    }

    #[test]
    fn forms_match_realized_and_enumeration() {
        let p = prepare_on_circle(&perturbed_ring_lp(6, 0.03)).unwrap();
        let g = &p.sg.contracted;
        let cs = CutStructure::build(g, &p.sg.x, p.sg.root, 0.1).unwrap();
        let ss = SStar::build(g, &p.sg.x, p.sg.g.n(), &cs).unwrap();
        let k = Constants::test();
        let all = trees(&p.sg.g);
        let probs: Vec<f64> = all.iter().map(|t| p.dist.tree_probability(t)).collect();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let view = p.dist.view();
        let mut nonzero = 0;
        for e in 0..g.m() {
            let (x, c) = (p.sg.x[e], p.sg.cost[e]);
            let f = ss.exp_c_sstar(g, &k, e, x, c);
            let mut want = 0.0;
            for (t, &pr) in all.iter().zip(&probs) {
                let r = ss.realized(g, &k, e, x, c, t);
                assert!((f.eval_on_tree(t) - r).abs() < 1e-12);
                want += pr * r;
            }
            assert!((f.eval(&view).unwrap() - want).abs() < 1e-9);
            if want != 0.0 {
                nonzero += 1;
            }
        }
        assert!(nonzero > 0);
    }
}
