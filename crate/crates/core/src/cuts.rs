//! Near-minimum cuts of `G/e0`, their crossing components, polygon
//! representations and left/right crossing classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{bit, crosses, full_set, set_members, Dsu, Graph, VSet};

/// Exhaustive enumeration handles at most this many non-root vertices.
pub const MAX_ENUM_VERTICES: usize = 24;
pub const MAX_ETA: f64 = 0.4;
const AREA_EPS: f64 = 1e-9;
/// Absolute slack on cut values, so tight cuts survive rounding when `eta`
/// is below machine precision.
pub const CUT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearMinCut {
    /// The side avoiding the root.
    pub side: VSet,
    pub value: f64,
}

/// All cuts with `x(δ(S)) < 2 + eta`, identified by their root-free side.
pub fn enumerate_near_min_cuts(g: &Graph, x: &[f64], root: usize, eta: f64) -> Result<Vec<NearMinCut>> {
    if !(0.0..=MAX_ETA).contains(&eta) {
        return Err(Error::EtaRange(eta));
    }
    let n = g.n();
    if n < 2 {
        return Ok(Vec::new());
    }
    if n - 1 > MAX_ENUM_VERTICES {
        return Err(Error::TooLarge(format!("{n} vertices for exhaustive cut enumeration")));
    }
    let others: Vec<usize> = (0..n).filter(|&v| v != root).collect();
    let mut out = Vec::new();
    for code in 1u64..(1u64 << others.len()) {
        let mut s: VSet = 0;
        for (i, &v) in others.iter().enumerate() {
            if code & (1 << i) != 0 {
                s |= bit(v);
            }
        }
        let value = g.cut_value(x, s);
        if value < 2.0 + eta + CUT_TOL {
            out.push(NearMinCut { side: s, value });
        }
    }
    out.sort_by(|a, b| a.side.count_ones().cmp(&b.side.count_ones()).then(a.side.cmp(&b.side)));
    // Approximate min cuts below α·λ number at most n^{2α}.
    let bound = (n as f64).powf(2.0 * (2.0 + eta) / 2.0).ceil() as usize + n;
    if out.len() > bound {
        return Err(Error::Structure(format!(
            "{} near-min cuts exceeds the counting bound {bound}; is x feasible?",
            out.len()
        )));
    }
    Ok(out)
}

/// Coarsest partition of `universe` refining every cut in `cuts`.
pub fn atoms_of(cuts: &[VSet], universe: VSet) -> Vec<VSet> {
    let mut groups: Vec<(Vec<bool>, VSet)> = Vec::new();
    for v in set_members(universe) {
        let sig: Vec<bool> = cuts.iter().map(|&c| c & bit(v) != 0).collect();
        match groups.iter_mut().find(|(s, _)| *s == sig) {
            Some((_, a)) => *a |= bit(v),
            None => groups.push((sig, bit(v))),
        }
    }
    let mut atoms: Vec<VSet> = groups.into_iter().map(|(_, a)| a).collect();
    atoms.sort_by_key(|a| a.trailing_zeros());
    atoms
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossingComponent {
    pub cuts: Vec<VSet>,
    pub atoms: Vec<VSet>,
    pub singleton: bool,
}

/// Components of the graph on `cuts` whose edges join crossing pairs.
pub fn crossing_components(cuts: &[VSet], universe: VSet) -> Vec<CrossingComponent> {
    let k = cuts.len();
    let mut dsu = Dsu::new(k.max(1));
    for i in 0..k {
        for j in (i + 1)..k {
            if crosses(cuts[i], cuts[j], universe) {
                dsu.union(i, j);
            }
        }
    }
    let mut groups: Vec<Vec<VSet>> = Vec::new();
    let mut head: Vec<usize> = Vec::new();
    for i in 0..k {
        let r = dsu.find(i);
        match head.iter().position(|&h| h == r) {
            Some(p) => groups[p].push(cuts[i]),
            None => {
                head.push(r);
                groups.push(vec![cuts[i]]);
            }
        }
    }
    groups
        .into_iter()
        .map(|cuts| CrossingComponent {
            atoms: atoms_of(&cuts, universe),
            singleton: cuts.len() == 1,
            cuts,
        })
        .collect()
}

/// Polygon representation of a crossing component. Outside atoms are in
/// counterclockwise order; atom `a_i` sits on side `(p_i, p_{i+1})`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Polygon {
    pub outside: Vec<VSet>,
    pub inside: Vec<VSet>,
    pub root: usize,
    pub root_outside: bool,
    pub cuts: Vec<VSet>,
    /// Per cut: the polygon points `(p_i, p_j)` of its diagonal.
    pub diagonals: Vec<(usize, usize)>,
}

impl Polygon {
    pub fn m(&self) -> usize {
        self.outside.len()
    }

    /// Indices of the outside atoms contained in `s`.
    pub fn outside_in(&self, s: VSet) -> Vec<usize> {
        (0..self.m()).filter(|&i| self.outside[i] & s == self.outside[i]).collect()
    }

    pub fn count_outside(&self, s: VSet) -> usize {
        self.outside.iter().filter(|&&a| a & s == a).count()
    }

    /// Clockwise-most outside atom of a proper circular interval of atoms.
    fn interval_start(&self, members: &[usize]) -> Option<usize> {
        let m = self.m();
        let inside = |i: usize| members.contains(&i);
        members.iter().copied().find(|&i| !inside((i + m - 1) % m))
    }

    /// Counterclockwise-most outside atom of a proper circular interval.
    fn interval_end(&self, members: &[usize]) -> Option<usize> {
        let m = self.m();
        let inside = |i: usize| members.contains(&i);
        members.iter().copied().find(|&i| !inside((i + 1) % m))
    }

    /// Leftmost (clockwise-most) outside atom of `s`.
    pub fn left_index(&self, s: VSet) -> Option<usize> {
        self.interval_start(&self.outside_in(s))
    }

    /// Rightmost (counterclockwise-most) outside atom of `s`.
    pub fn right_index(&self, s: VSet) -> Option<usize> {
        self.interval_end(&self.outside_in(s))
    }

    /// Does `other` cross `s` on the left, i.e. is the clockwise-most
    /// outside atom of `O(s ∪ other)` in `other`?
    pub fn crosses_left(&self, other: VSet, s: VSet, universe: VSet) -> bool {
        if !crosses(other, s, universe) {
            return false;
        }
        let u = self.outside_in(other | s);
        match self.interval_start(&u) {
            Some(i) => self.outside[i] & other == self.outside[i] && self.outside[i] & s != self.outside[i],
            None => false,
        }
    }

    pub fn crosses_right(&self, other: VSet, s: VSet, universe: VSet) -> bool {
        if !crosses(other, s, universe) {
            return false;
        }
        let u = self.outside_in(other | s);
        match self.interval_end(&u) {
            Some(i) => self.outside[i] & other == self.outside[i] && self.outside[i] & s != self.outside[i],
            None => false,
        }
    }

    /// Polygon point on the clockwise end of the cut's outside interval.
    pub fn first_point(&self, s: VSet) -> Option<usize> {
        self.left_index(s)
    }

    /// Polygon point on the counterclockwise end of the cut's outside interval.
    pub fn last_point(&self, s: VSet) -> Option<usize> {
        self.right_index(s).map(|j| (j + 1) % self.m())
    }

    /// Index of the outside atom holding vertex `v`.
    pub fn outside_atom_of(&self, v: usize) -> Option<usize> {
        self.outside.iter().position(|&a| a & bit(v) != 0)
    }

    pub fn all_atoms(&self) -> Vec<VSet> {
        let mut v = self.outside.clone();
        v.extend(self.inside.iter().copied());
        v
    }
}

/// Polygon representation of a non-singleton component.
pub fn build_polygon(comp: &CrossingComponent, universe: VSet, root: usize) -> Result<Polygon> {
    if comp.cuts.is_empty() {
        return Err(Error::Structure("empty component".into()));
    }
    let mut atoms = comp.atoms.clone();
    if let Some(p) = atoms.iter().position(|&a| a & bit(root) != 0) {
        let r = atoms.remove(p);
        atoms.insert(0, r);
    }
    let k = atoms.len();
    if k > 30 {
        return Err(Error::TooLarge(format!("{k} atoms in one component")));
    }
    let masks: Vec<u32> = comp
        .cuts
        .iter()
        .map(|&c| {
            (0..k)
                .filter(|&i| atoms[i] & c == atoms[i])
                .fold(0u32, |acc, i| acc | (1 << i))
        })
        .collect();
    let mut subsets: Vec<u32> = (0u32..(1 << k)).filter(|s| (s.count_ones() as usize) + 4 <= k).collect();
    subsets.sort_by_key(|s| (s.count_ones(), *s));
    for inside in subsets {
        let out_idx: Vec<usize> = (0..k).filter(|i| inside & (1 << i) == 0).collect();
        let Some(order) = circular_order(&out_idx, &masks) else { continue };
        let outside: Vec<VSet> = order.iter().map(|&i| atoms[i]).collect();
        let inside_atoms: Vec<VSet> = (0..k).filter(|i| inside & (1 << i) != 0).map(|i| atoms[i]).collect();
        let mut poly = Polygon {
            root_outside: outside[0] & bit(root) != 0,
            outside,
            inside: inside_atoms,
            root,
            cuts: comp.cuts.clone(),
            diagonals: Vec::new(),
        };
        let mut diagonals = Vec::with_capacity(comp.cuts.len());
        for &c in &comp.cuts {
            let (Some(a), Some(b)) = (poly.first_point(c), poly.last_point(c)) else {
                return Err(Error::Structure("cut without outside atoms".into()));
            };
            diagonals.push((a, b));
        }
        let mut sorted = diagonals.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != diagonals.len() {
            continue;
        }
        poly.diagonals = diagonals;
        if poly.inside.iter().all(|&a| inside_cell_nonempty(&poly, a)) {
            verify_polygon(&poly, universe)?;
            return Ok(poly);
        }
    }
    Err(Error::Structure(format!(
        "no polygon representation for a component with {} cuts and {k} atoms",
        comp.cuts.len()
    )))
}

/// Circular order of the atoms `out` (first one fixed) in which every cut
/// meets `out` in a circular interval with at least two atoms on each side.
fn circular_order(out: &[usize], masks: &[u32]) -> Option<Vec<usize>> {
    let k = out.len();
    let full: u32 = out.iter().fold(0, |acc, &i| acc | (1 << i));
    let mut sets = Vec::with_capacity(masks.len());
    for &m in masks {
        let m = m & full;
        let c = m.count_ones() as usize;
        if c < 2 || c + 2 > k {
            return None;
        }
        sets.push(if m & (1 << out[0]) != 0 { full ^ m } else { m });
    }
    let mut order = vec![out[0]];
    let mut state = vec![0u8; sets.len()];
    if dfs(&mut order, full & !(1 << out[0]), &sets, &mut state) {
        Some(order)
    } else {
        None
    }
}

fn dfs(order: &mut Vec<usize>, left: u32, sets: &[u32], state: &mut Vec<u8>) -> bool {
    if left == 0 {
        return true;
    }
    let placed: u32 = order.iter().fold(0, |acc, &i| acc | (1 << i));
    for a in 0..32 {
        if left & (1 << a) == 0 {
            continue;
        }
        let mut next = state.clone();
        let mut ok = true;
        for (j, &s) in sets.iter().enumerate() {
            let member = s & (1 << a) != 0;
            match (state[j], member) {
                (0, true) => next[j] = 1,
                (1, false) => {
                    if s & !placed != 0 {
                        ok = false;
                        break;
                    }
                    next[j] = 2;
                }
                (2, true) => {
                    ok = false;
                    break;
                }
                _ => {}
            }
        }
        if !ok {
            continue;
        }
        order.push(a);
        if dfs(order, left & !(1 << a), sets, &mut next) {
            *state = next;
            return true;
        }
        order.pop();
    }
    false
}

fn point(m: usize, i: usize) -> (f64, f64) {
    let t = std::f64::consts::TAU * (i % m) as f64 / m as f64;
    (t.cos(), t.sin())
}

/// Clip a convex polygon to the closed half-plane on `keep`'s side of line `ab`.
fn clip(poly: &[(f64, f64)], a: (f64, f64), b: (f64, f64), keep: (f64, f64)) -> Vec<(f64, f64)> {
    let side = |p: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    let sign = side(keep).signum();
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let (sp, sq) = (side(p) * sign, side(q) * sign);
        if sp >= 0.0 {
            out.push(p);
        }
        if (sp >= 0.0) != (sq >= 0.0) {
            let t = sp / (sp - sq);
            out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
        }
    }
    out
}

fn area(poly: &[(f64, f64)]) -> f64 {
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        s += p.0 * q.1 - q.0 * p.1;
    }
    s.abs() / 2.0
}

/// Region of the polygon on the same side of every diagonal as `atom`.
fn cell_of(poly: &Polygon, atom: VSet) -> Vec<(f64, f64)> {
    let m = poly.m();
    let mut region: Vec<(f64, f64)> = (0..m).map(|i| point(m, i)).collect();
    for (c, &(i, j)) in poly.cuts.iter().zip(&poly.diagonals) {
        let a = point(m, i);
        let b = point(m, j);
        // midpoint of the side of an outside atom inside the cut
        let first = poly.left_index(*c).unwrap_or(0);
        let (p, q) = (point(m, first), point(m, first + 1));
        let mid_in = ((p.0 + q.0) / 2.0, (p.1 + q.1) / 2.0);
        let keep = if atom & c == atom {
            mid_in
        } else {
            // any outside atom outside the cut
            let o = (0..m).find(|&t| poly.outside[t] & c == 0).unwrap_or(0);
            let (p, q) = (point(m, o), point(m, o + 1));
            ((p.0 + q.0) / 2.0, (p.1 + q.1) / 2.0)
        };
        region = clip(&region, a, b, keep);
        if region.len() < 3 {
            return Vec::new();
        }
    }
    region
}

fn inside_cell_nonempty(poly: &Polygon, atom: VSet) -> bool {
    area(&cell_of(poly, atom)) > AREA_EPS
}

/// Checks the representation: union of atoms, two outside atoms per side of
/// every cut, crossing cuts have crossing outside sets whose union is not
/// everything, and every inside atom owns a cell of positive area.
pub fn verify_polygon(poly: &Polygon, universe: VSet) -> Result<()> {
    let atoms = poly.all_atoms();
    let m = poly.m();
    if atoms.iter().fold(0, |acc, a| acc | a) != universe {
        return Err(Error::Structure("atoms do not cover the vertex set".into()));
    }
    for &c in &poly.cuts {
        if atoms.iter().any(|&a| a & c != 0 && a & c != a) {
            return Err(Error::Structure(format!("cut {c:#b} is not a union of atoms")));
        }
        let k = poly.count_outside(c);
        if k < 2 || k + 2 > m {
            return Err(Error::Structure(format!("cut {c:#b} has {k} of {m} outside atoms")));
        }
    }
    let full: u64 = (1u64 << m) - 1;
    let omask = |s: VSet| -> u64 { poly.outside_in(s).iter().fold(0u64, |acc, &i| acc | (1 << i)) };
    for (i, &a) in poly.cuts.iter().enumerate() {
        for &b in &poly.cuts[i + 1..] {
            if crosses(a, b, universe) {
                let (oa, ob) = (omask(a), omask(b));
                let ocross = oa & ob != 0 && oa & !ob != 0 && ob & !oa != 0 && (oa | ob) != full;
                if !ocross {
                    return Err(Error::Structure("crossing cuts with non-crossing outside sets".into()));
                }
            }
        }
    }
    for &a in &poly.inside {
        if !inside_cell_nonempty(poly, a) {
            return Err(Error::Structure("inside atom without a cell".into()));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossClass {
    Uncrossed,
    OneSide,
    BothSides,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutInfo {
    pub cut: NearMinCut,
    pub component: usize,
    pub class: CrossClass,
    pub crossed_left: bool,
    pub crossed_right: bool,
}

/// Step-1 output: the near-min cuts, their components and polygons.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutStructure {
    pub n: usize,
    pub root: usize,
    pub eta: f64,
    pub universe: VSet,
    pub cuts: Vec<CutInfo>,
    pub components: Vec<CrossingComponent>,
    pub polygons: Vec<Option<Polygon>>,
}

impl CutStructure {
    pub fn build(g: &Graph, x: &[f64], root: usize, eta: f64) -> Result<CutStructure> {
        let universe = full_set(g.n());
        let cuts = enumerate_near_min_cuts(g, x, root, eta)?;
        let sides: Vec<VSet> = cuts.iter().map(|c| c.side).collect();
        let components = crossing_components(&sides, universe);
        let mut polygons = Vec::with_capacity(components.len());
        for comp in &components {
            polygons.push(if comp.singleton {
                None
            } else {
                Some(build_polygon(comp, universe, root)?)
            });
        }
        let infos = classify_cuts(&cuts, &components, &polygons, universe);
        Ok(CutStructure {
            n: g.n(),
            root,
            eta,
            universe,
            cuts: infos,
            components,
            polygons,
        })
    }

    pub fn sides_with(&self, class: CrossClass) -> Vec<VSet> {
        self.cuts.iter().filter(|c| c.class == class).map(|c| c.cut.side).collect()
    }

    pub fn is_near_min(&self, s: VSet) -> bool {
        self.cuts.iter().any(|c| c.cut.side == s)
    }
}

/// Label each cut with the sides on which cuts of its component cross it.
pub fn classify_cuts(
    cuts: &[NearMinCut],
    components: &[CrossingComponent],
    polygons: &[Option<Polygon>],
    universe: VSet,
) -> Vec<CutInfo> {
    cuts.iter()
        .map(|c| {
            let component = components
                .iter()
                .position(|comp| comp.cuts.contains(&c.side))
                .unwrap_or(usize::MAX);
            let (mut left, mut right) = (false, false);
            if let Some(Some(poly)) = polygons.get(component) {
                for &o in &components[component].cuts {
                    left |= poly.crosses_left(o, c.side, universe);
                    right |= poly.crosses_right(o, c.side, universe);
                }
            }
            let class = match (left, right) {
                (true, true) => CrossClass::BothSides,
                (false, false) => CrossClass::Uncrossed,
                _ => CrossClass::OneSide,
            };
            CutInfo {
                cut: *c,
                component,
                class,
                crossed_left: left,
                crossed_right: right,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::set_of;

    fn cycle(n: usize) -> (Graph, Vec<f64>) {
        let pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        (Graph::from_pairs(n, &pairs), vec![1.0; n])
    }

    #[test]
    fn cycle_cuts_are_arcs() {
        let (g, x) = cycle(6);
        let cuts = enumerate_near_min_cuts(&g, &x, 0, 0.1).unwrap();
        assert_eq!(cuts.len(), 15);
        assert!(cuts.iter().all(|c| (c.value - 2.0).abs() < 1e-12 && c.side & 1 == 0));
    }

    #[test]
    fn cycle_polygon_and_classes() {
        let (g, x) = cycle(6);
        let s = CutStructure::build(&g, &x, 0, 0.1).unwrap();
        let big: Vec<_> = s.components.iter().enumerate().filter(|(_, c)| !c.singleton).collect();
        assert_eq!(big.len(), 1);
        let poly = s.polygons[big[0].0].as_ref().unwrap();
        assert_eq!(poly.m(), 6);
        assert!(poly.inside.is_empty());
        assert!(poly.root_outside);
        assert_eq!(big[0].1.cuts.len(), 9);
        // {2,3} sits between {1,2} and {3,4}
        let mid = s.cuts.iter().find(|c| c.cut.side == set_of(&[2, 3])).unwrap();
        assert_eq!(mid.class, CrossClass::BothSides);
        let end = s.cuts.iter().find(|c| c.cut.side == set_of(&[1, 2])).unwrap();
        assert_eq!(end.class, CrossClass::OneSide);
        let single = s.cuts.iter().find(|c| c.cut.side == set_of(&[3])).unwrap();
        assert_eq!(single.class, CrossClass::Uncrossed);
    }

    #[test]
    fn rejects_large_eta() {
        let (g, x) = cycle(4);
        assert!(matches!(enumerate_near_min_cuts(&g, &x, 0, 0.5), Err(Error::EtaRange(_))));
    }

    #[test]
    fn wheel_has_one_inside_atom() {
        // eight rim vertices with triple links, one spoke each to the hub
        let mut pairs = Vec::new();
        for i in 0..8 {
            for _ in 0..3 {
                pairs.push((i, (i + 1) % 8));
            }
            pairs.push((i, 8));
        }
        let g = Graph::from_pairs(9, &pairs);
        let x = vec![2.0 / 7.0; g.m()];
        let s = CutStructure::build(&g, &x, 8, 0.3).unwrap();
        let big: Vec<usize> = (0..s.components.len()).filter(|&i| !s.components[i].singleton).collect();
        assert_eq!(big.len(), 1);
        let poly = s.polygons[big[0]].as_ref().unwrap();
        assert_eq!(poly.m(), 8);
        assert_eq!(poly.inside, vec![bit(8)]);
    }

    #[test]
    fn atoms_refine_cuts() {
        let atoms = atoms_of(&[0b0110, 0b1100], 0b1111);
        assert_eq!(atoms, vec![0b0001, 0b0010, 0b0100, 0b1000]);
    }
}
