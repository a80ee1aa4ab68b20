//! λ-uniform spanning-tree distributions and their determinant oracles.
//!
//! A distribution is stored as a product over the pieces of a laminar family
//! of vertex sets: the tree restricted to each piece (the set with its child
//! sets contracted) is λ-uniform and independent of the other pieces. A
//! distribution with a single piece is the plain λ-uniform measure on `G`.

use std::collections::BTreeMap;

use num_complex::Complex;
use num_traits::{Float, FloatConst, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::graph::{bit, full_set, set_members, Dsu, EdgeId, Graph, VSet};
use crate::linalg::{det_lu, inverse_real, ScaledDet};

/// Probabilities below this are treated as zero when branching.
pub const PROB_EPS: f64 = 1e-12;
/// Largest admissible imaginary residue of a parity-oracle sum.
pub const IMAG_TOL: f64 = 1e-7;
/// Maximum number of nontrivial sets in a parity query.
pub const MAX_QUERY_SETS: usize = 8;
/// Maximum number of generating-polynomial evaluations per query.
pub const MAX_ORACLE_CALLS: u128 = 20_000_000;
/// Exhaustive subset scans are limited to this many vertices.
pub const MAX_EXHAUSTIVE_VERTICES: usize = 22;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialAssignment {
    fixed: BTreeMap<EdgeId, bool>,
}

impl PartialAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(&self, e: EdgeId, value: bool) -> Self {
        let mut out = self.clone();
        out.fixed.insert(e, value);
        out
    }

    pub fn set(&mut self, e: EdgeId, value: bool) {
        self.fixed.insert(e, value);
    }

    pub fn get(&self, e: EdgeId) -> Option<bool> {
        self.fixed.get(&e).copied()
    }

    pub fn len(&self) -> usize {
        self.fixed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EdgeId, bool)> + '_ {
        self.fixed.iter().map(|(&e, &b)| (e, b))
    }

    pub fn ones(&self) -> Vec<EdgeId> {
        self.iter().filter(|p| p.1).map(|p| p.0).collect()
    }

    /// Assignment fixing exactly the edges of `tree` to 1 and all others to 0.
    pub fn from_tree(m: usize, tree: &[EdgeId]) -> Self {
        let mut out = Self::new();
        for e in 0..m {
            out.set(e, false);
        }
        for &e in tree {
            out.set(e, true);
        }
        out
    }
}

/// `(E_i)_T ≡ σ_i (mod m_i)` for every `i`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParityQuery {
    pub sets: Vec<Vec<EdgeId>>,
    pub sigma: Vec<usize>,
    pub moduli: Vec<usize>,
}

impl ParityQuery {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, set: Vec<EdgeId>, sigma: usize, modulus: usize) -> Self {
        self.push(set, sigma, modulus);
        self
    }

    pub fn push(&mut self, set: Vec<EdgeId>, sigma: usize, modulus: usize) {
        self.sets.push(set);
        self.sigma.push(sigma);
        self.moduli.push(modulus);
    }

    pub fn merged(&self, other: &ParityQuery) -> ParityQuery {
        let mut out = self.clone();
        for i in 0..other.len() {
            out.push(other.sets[i].clone(), other.sigma[i], other.moduli[i]);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Sorted, deduplicated form used as a cache key. Returns `None` when
    /// two constraints on the same set contradict each other. A constraint
    /// with modulus at least `n` is an exact count and absorbs any other
    /// constraint on the same set.
    pub fn canonical(&self, n: usize) -> Option<ParityQuery> {
        let mut rows: Vec<(Vec<EdgeId>, usize, usize)> = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let mut s = self.sets[i].clone();
            s.sort_unstable();
            s.dedup();
            let m = self.moduli[i];
            let sigma = self.sigma[i] % m;
            if m <= n {
                rows.push((s, sigma, m));
            } else if sigma < n {
                // counts stay below n, so a larger modulus is an exact count
                rows.push((s, sigma, n.max(2)));
            } else {
                return None;
            }
        }
        rows.retain(|r| r.2 > 1);
        rows.sort();
        rows.dedup();
        let mut keep: Vec<(Vec<EdgeId>, usize, usize)> = Vec::with_capacity(rows.len());
        for r in rows {
            if let Some(k) = keep.iter().position(|k| k.0 == r.0) {
                let (exact, other) = if keep[k].2 >= n { (keep[k].clone(), r.clone()) } else { (r.clone(), keep[k].clone()) };
                if exact.2 >= n {
                    if exact.1 % other.2 != other.1 {
                        return None;
                    }
                    if other.2 >= n && exact != other {
                        return None;
                    }
                    keep[k] = exact;
                    continue;
                }
                if keep[k].2 == r.2 {
                    return None;
                }
            }
            keep.push(r);
        }
        if keep.iter().any(|r| r.0.is_empty() && r.1 != 0) {
            return None;
        }
        keep.retain(|r| !r.0.is_empty());
        let mut q = ParityQuery::new();
        for (s, sg, m) in keep {
            q.push(s, sg, m);
        }
        Some(q)
    }

    /// Does a tree (as an edge list) satisfy the query?
    pub fn holds_for(&self, tree: &[EdgeId]) -> bool {
        (0..self.len()).all(|i| {
            let c = self.sets[i].iter().filter(|e| tree.contains(e)).count();
            c % self.moduli[i] == self.sigma[i] % self.moduli[i]
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Piece {
    /// Local label of each vertex of `G`, `usize::MAX` outside the piece.
    pub labels: Vec<usize>,
    pub n: usize,
    pub edges: Vec<EdgeId>,
    pub vertices: VSet,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeDistribution {
    graph: Graph,
    lambda: Vec<f64>,
    active: Vec<bool>,
    pieces: Vec<Piece>,
    piece_of: Vec<usize>,
    tight_sets: Vec<VSet>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    One,
    Zero,
    Free(usize, usize),
}

#[derive(Clone, Debug)]
struct LocalPiece {
    n: usize,
    ends: Vec<(usize, usize)>,
    lambda: Vec<f64>,
    ids: Vec<EdgeId>,
}

impl LocalPiece {
    fn matrix<T: Float>(&self, z: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.n;
        let jn = T::one() / T::from(n).unwrap();
        let mut a = vec![Complex::new(jn, T::zero()); n * n];
        for (k, &(u, v)) in self.ends.iter().enumerate() {
            let w = z[k] * T::from(self.lambda[k]).unwrap();
            a[u * n + u] = a[u * n + u] + w;
            a[v * n + v] = a[v * n + v] + w;
            a[u * n + v] = a[u * n + v] - w;
            a[v * n + u] = a[v * n + u] - w;
        }
        a
    }

    /// `(1/n) det(Σ z_e λ_e L_e + J/n)`.
    fn eval<T: Float>(&self, z: &[Complex<T>]) -> ScaledDet<T> {
        if self.n <= 1 {
            return ScaledDet::one();
        }
        let mut a = self.matrix(z);
        det_lu(&mut a, self.n).scale_real(T::one() / T::from(self.n).unwrap())
    }

    fn eval_ones<T: Float>(&self) -> ScaledDet<T> {
        let z = vec![Complex::new(T::one(), T::zero()); self.ends.len()];
        self.eval(&z)
    }

    fn rank(&self, local: &[usize]) -> usize {
        let mut dsu = Dsu::new(self.n.max(1));
        local
            .iter()
            .filter(|&&k| dsu.union(self.ends[k].0, self.ends[k].1))
            .count()
    }

    /// All edge marginals through effective resistances.
    fn marginals(&self) -> Option<Vec<f64>> {
        let n = self.n;
        if n <= 1 {
            return Some(vec![]);
        }
        let mut a = vec![1.0 / n as f64; n * n];
        for (k, &(u, v)) in self.ends.iter().enumerate() {
            let w = self.lambda[k];
            a[u * n + u] += w;
            a[v * n + v] += w;
            a[u * n + v] -= w;
            a[v * n + u] -= w;
        }
        let inv = inverse_real(&a, n)?;
        Some(
            self.ends
                .iter()
                .enumerate()
                .map(|(k, &(u, v))| {
                    self.lambda[k] * (inv[u * n + u] + inv[v * n + v] - 2.0 * inv[u * n + v])
                })
                .collect(),
        )
    }
}

impl TreeDistribution {
    /// Plain λ-uniform distribution on `graph`; edges with λ = 0 are inactive.
    pub fn from_lambda(graph: Graph, lambda: Vec<f64>) -> Result<Self> {
        assert_eq!(graph.m(), lambda.len());
        let active: Vec<bool> = lambda.iter().map(|&l| l > 0.0).collect();
        if !graph.connected_with(|e| active[e]) {
            return Err(Error::EmptyMeasure);
        }
        Self::with_family(graph, lambda, active, vec![])
    }

    fn with_family(
        graph: Graph,
        lambda: Vec<f64>,
        active: Vec<bool>,
        family: Vec<VSet>,
    ) -> Result<Self> {
        let n = graph.n();
        let mut sets = family.clone();
        sets.push(full_set(n));
        sets.sort_by_key(|s| s.count_ones());
        let mut pieces = Vec::new();
        let mut piece_of = vec![usize::MAX; graph.m()];
        for (idx, &s) in sets.iter().enumerate() {
            let children: Vec<VSet> = maximal_subsets(&sets[..idx], s);
            let mut labels = vec![usize::MAX; n];
            let mut k = 0;
            for &c in &children {
                for v in set_members(c) {
                    labels[v] = k;
                }
                k += 1;
            }
            for v in set_members(s) {
                if labels[v] == usize::MAX {
                    labels[v] = k;
                    k += 1;
                }
            }
            let mut edges = Vec::new();
            for e in 0..graph.m() {
                if !active[e] || piece_of[e] != usize::MAX {
                    continue;
                }
                let ed = graph.edge(e);
                if bit(ed.u) & s != 0 && bit(ed.v) & s != 0 && labels[ed.u] != labels[ed.v] {
                    piece_of[e] = pieces.len();
                    edges.push(e);
                }
            }
            pieces.push(Piece {
                labels,
                n: k,
                edges,
                vertices: s,
            });
        }
        Ok(TreeDistribution {
            graph,
            lambda,
            active,
            pieces,
            piece_of,
            tight_sets: family,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn is_active(&self, e: EdgeId) -> bool {
        self.active[e]
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Laminar family of sets every tree must span.
    pub fn tight_sets(&self) -> &[VSet] {
        &self.tight_sets
    }

    pub fn view(&self) -> Conditioned<'_> {
        self.condition(&PartialAssignment::new())
            .expect("a distribution has nonempty support")
    }

    /// Contract 1-edges, delete 0-edges, renormalize.
    pub fn condition(&self, set: &PartialAssignment) -> Result<Conditioned<'_>> {
        Conditioned::build(self, set.clone())
    }

    /// Product over pieces of `(1/n) det(Σ z_e λ_e L_e + J/n)`.
    pub fn gen_poly_eval(&self, z: &[Complex<f64>]) -> Complex<f64> {
        self.gen_poly_eval_scaled(z).ratio(ScaledDet::one())
    }

    pub fn gen_poly_eval_scaled(&self, z: &[Complex<f64>]) -> ScaledDet<f64> {
        let mut acc = ScaledDet::one();
        for p in &self.pieces {
            let lp = self.local_piece(p);
            let zl: Vec<Complex<f64>> = lp.ids.iter().map(|&e| z[e]).collect();
            acc = acc.mul(lp.eval(&zl));
        }
        acc
    }

    fn local_piece(&self, p: &Piece) -> LocalPiece {
        LocalPiece {
            n: p.n,
            ends: p
                .edges
                .iter()
                .map(|&e| {
                    let ed = self.graph.edge(e);
                    (p.labels[ed.u], p.labels[ed.v])
                })
                .collect(),
            lambda: p.edges.iter().map(|&e| self.lambda[e]).collect(),
            ids: p.edges.clone(),
        }
    }

    /// Rescale λ piecewise so that the generating polynomial is 1 at z = 1.
    pub fn normalize(&self) -> TreeDistribution {
        let mut out = self.clone();
        for p in &self.pieces {
            if p.n <= 1 {
                continue;
            }
            let lp = self.local_piece(p);
            let ln_g = lp.eval_ones::<f64>().ln_abs();
            let f = (-ln_g / (p.n - 1) as f64).exp();
            for &e in &p.edges {
                out.lambda[e] *= f;
            }
        }
        out
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.gen_poly_eval(&vec![Complex::new(1.0, 0.0); self.graph.m()]).re - 1.0).abs() <= tol
    }

    pub fn marginal(&self, e: EdgeId) -> f64 {
        self.view().marginal(e)
    }

    pub fn marginals(&self) -> Vec<f64> {
        let v = self.view();
        (0..self.graph.m()).map(|e| v.marginal(e)).collect()
    }

    pub fn event_prob(&self, q: &ParityQuery) -> Result<f64> {
        self.view().event_prob(q)
    }

    pub fn event_prob_conditioned(&self, set: &PartialAssignment, q: &ParityQuery) -> Result<f64> {
        self.condition(set)?.event_prob(q)
    }

    /// `μ(T)` by the chain rule over the edges of `tree`.
    pub fn tree_probability(&self, tree: &[EdgeId]) -> f64 {
        if !self.graph.is_spanning_tree(tree) {
            return 0.0;
        }
        let mut view = self.view();
        let mut p = 1.0;
        for &e in tree {
            p *= view.marginal(e);
            if p == 0.0 {
                return 0.0;
            }
            view = match view.extend(&[(e, true)]) {
                Ok(v) => v,
                Err(_) => return 0.0,
            };
        }
        p
    }

    /// Exact sample by sequential conditioning in edge-id order.
    pub fn sample_tree(&self, seed: u64) -> Vec<EdgeId> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_tree_with(&mut rng)
    }

    pub fn sample_tree_with<R: Rng>(&self, rng: &mut R) -> Vec<EdgeId> {
        let mut view = self.view();
        for e in 0..self.graph.m() {
            if let Status::Free(..) = view.status[e] {
                let p = view.marginal(e);
                let take = rng.gen::<f64>() < p;
                view = view
                    .extend(&[(e, take)])
                    .expect("sampled branch has positive probability");
            }
        }
        view.set.ones()
    }
}

fn maximal_subsets(family: &[VSet], s: VSet) -> Vec<VSet> {
    let inside: Vec<VSet> = family
        .iter()
        .copied()
        .filter(|&f| f & !s == 0 && f != s)
        .collect();
    inside
        .iter()
        .copied()
        .filter(|&f| !inside.iter().any(|&g| g != f && f & !g == 0))
        .collect()
}

/// The distribution conditioned on a partial assignment: the contracted and
/// deleted graph `G'` with rescaled λ.
#[derive(Clone, Debug)]
pub struct Conditioned<'a> {
    dist: &'a TreeDistribution,
    set: PartialAssignment,
    status: Vec<Status>,
    pieces: Vec<LocalPiece>,
}

impl<'a> Conditioned<'a> {
    fn build(dist: &'a TreeDistribution, set: PartialAssignment) -> Result<Self> {
        let g = &dist.graph;
        let mut status = vec![Status::Zero; g.m()];
        let mut pieces = Vec::with_capacity(dist.pieces.len());
        for (pi, p) in dist.pieces.iter().enumerate() {
            let mut dsu = Dsu::new(p.n.max(1));
            for &e in &p.edges {
                if set.get(e) == Some(true) {
                    let ed = g.edge(e);
                    if !dsu.union(p.labels[ed.u], p.labels[ed.v]) {
                        return Err(Error::EmptyMeasure);
                    }
                    status[e] = Status::One;
                }
            }
            let (lab, k) = dsu.labels();
            let mut lp = LocalPiece {
                n: k,
                ends: vec![],
                lambda: vec![],
                ids: vec![],
            };
            for &e in &p.edges {
                if set.get(e).is_some() {
                    continue;
                }
                let ed = g.edge(e);
                let (a, b) = (lab[p.labels[ed.u]], lab[p.labels[ed.v]]);
                if a == b {
                    continue;
                }
                status[e] = Status::Free(pi, lp.ends.len());
                lp.ends.push((a, b));
                lp.lambda.push(dist.lambda[e]);
                lp.ids.push(e);
            }
            let mut d2 = Dsu::new(k.max(1));
            let mut comps = k;
            for &(a, b) in &lp.ends {
                if d2.union(a, b) {
                    comps -= 1;
                }
            }
            if k > 1 && comps != 1 {
                return Err(Error::EmptyMeasure);
            }
            if k > 1 {
                let ln_g = lp.eval_ones::<f64>().ln_abs();
                let f = (-ln_g / (k - 1) as f64).exp();
                for l in lp.lambda.iter_mut() {
                    *l *= f;
                }
            }
            pieces.push(lp);
        }
        for (e, b) in set.iter() {
            if dist.piece_of[e] == usize::MAX && b {
                return Err(Error::EmptyMeasure);
            }
        }
        Ok(Conditioned {
            dist,
            set,
            status,
            pieces,
        })
    }

    pub fn distribution(&self) -> &'a TreeDistribution {
        self.dist
    }

    pub fn assignment(&self) -> &PartialAssignment {
        &self.set
    }

    /// Condition further on the given edge values.
    pub fn extend(&self, fix: &[(EdgeId, bool)]) -> Result<Conditioned<'a>> {
        let mut set = self.set.clone();
        for &(e, b) in fix {
            set.set(e, b);
        }
        Conditioned::build(self.dist, set)
    }

    /// Is `e` in every tree of the conditional measure? In none?
    pub fn forced(&self, e: EdgeId) -> Option<bool> {
        match self.status[e] {
            Status::One => Some(true),
            Status::Zero => Some(false),
            Status::Free(..) => None,
        }
    }

    pub fn free_edges(&self) -> Vec<EdgeId> {
        (0..self.status.len())
            .filter(|&e| matches!(self.status[e], Status::Free(..)))
            .collect()
    }

    /// `P{e ∈ T | Set} = 1 − g(z_e = 0)`.
    pub fn marginal(&self, e: EdgeId) -> f64 {
        match self.status[e] {
            Status::One => 1.0,
            Status::Zero => 0.0,
            Status::Free(pi, k) => {
                let lp = &self.pieces[pi];
                let mut z = vec![Complex::new(1.0, 0.0); lp.ends.len()];
                z[k] = Complex::new(0.0, 0.0);
                let r = lp.eval(&z).ratio(lp.eval_ones());
                (1.0 - r.re).clamp(0.0, 1.0)
            }
        }
    }

    /// All marginals through effective resistances (one inverse per piece).
    pub fn marginals_fast(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.status.len()];
        for (e, s) in self.status.iter().enumerate() {
            if *s == Status::One {
                out[e] = 1.0;
            }
        }
        for lp in &self.pieces {
            if let Some(ms) = lp.marginals() {
                for (k, &e) in lp.ids.iter().enumerate() {
                    out[e] = ms[k].clamp(0.0, 1.0);
                }
            } else {
                for &e in &lp.ids {
                    out[e] = self.marginal(e);
                }
            }
        }
        out
    }

    /// Generating polynomial of the conditional measure at `z` (indexed by
    /// edges of `G`); fixed edges are ignored.
    pub fn gen_poly_eval(&self, z: &[Complex<f64>]) -> Complex<f64> {
        let mut acc = ScaledDet::one();
        for lp in &self.pieces {
            let zl: Vec<Complex<f64>> = lp.ids.iter().map(|&e| z[e]).collect();
            acc = acc.mul(lp.eval(&zl));
        }
        acc.ratio(ScaledDet::one())
    }

    /// `P{(E_i)_T ≡ σ_i (mod m_i) ∀i | Set}`.
    pub fn event_prob(&self, q: &ParityQuery) -> Result<f64> {
        validate(q)?;
        let Some(q) = &q.canonical(self.dist.graph.n()) else { return Ok(0.0) };
        let mut factor = 1.0;
        let mut view = self.clone();
        loop {
            match view.reduce(q)? {
                Reduced::Zero => return Ok(0.0),
                Reduced::Force(fix, how) => {
                    let p = match how {
                        ForceKind::AllZero => view.prob_all_zero(&fix),
                        ForceKind::One => view.marginal(fix[0].0),
                    };
                    if p < PROB_EPS * 1e-3 {
                        return Ok(0.0);
                    }
                    factor *= p;
                    view = match view.extend(&fix) {
                        Ok(v) => v,
                        Err(Error::EmptyMeasure) => return Ok(0.0),
                        Err(e) => return Err(e),
                    };
                }
                Reduced::Dft(dims) => {
                    let p = view.dft(&dims)?;
                    return Ok((factor * p).clamp(0.0, 1.0));
                }
            }
        }
    }

    fn prob_all_zero(&self, fix: &[(EdgeId, bool)]) -> f64 {
        let mut per_piece: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(e, _) in fix {
            if let Status::Free(pi, k) = self.status[e] {
                per_piece.entry(pi).or_default().push(k);
            }
        }
        let mut p = 1.0;
        for (pi, ks) in per_piece {
            let lp = &self.pieces[pi];
            let mut z = vec![Complex::new(1.0, 0.0); lp.ends.len()];
            for k in ks {
                z[k] = Complex::new(0.0, 0.0);
            }
            p *= lp.eval(&z).ratio(lp.eval_ones()).re.max(0.0);
        }
        p
    }

    fn reduce(&self, q: &ParityQuery) -> Result<Reduced> {
        let mut dims = Vec::new();
        for i in 0..q.len() {
            let m = q.moduli[i];
            if m == 1 {
                continue;
            }
            let mut free = Vec::new();
            let mut ones = 0usize;
            let mut seen = std::collections::BTreeSet::new();
            for &e in &q.sets[i] {
                if !seen.insert(e) {
                    continue;
                }
                match self.status[e] {
                    Status::One => ones += 1,
                    Status::Zero => {}
                    Status::Free(..) => free.push(e),
                }
            }
            let sigma = (q.sigma[i] % m + m - ones % m) % m;
            if free.is_empty() {
                if sigma != 0 {
                    return Ok(Reduced::Zero);
                }
                continue;
            }
            let rank = self.rank(&free);
            let mut modulus = m;
            if m > rank {
                if sigma > rank {
                    return Ok(Reduced::Zero);
                }
                if sigma == 0 {
                    return Ok(Reduced::Force(
                        free.iter().map(|&e| (e, false)).collect(),
                        ForceKind::AllZero,
                    ));
                }
                if free.len() == 1 {
                    return Ok(Reduced::Force(vec![(free[0], true)], ForceKind::One));
                }
                modulus = rank + 1;
            }
            dims.push(Dim {
                modulus,
                sigma,
                edges: free,
            });
        }
        if dims.len() > MAX_QUERY_SETS {
            return Err(Error::Query(format!(
                "{} nontrivial sets exceed the cap of {}",
                dims.len(),
                MAX_QUERY_SETS
            )));
        }
        Ok(Reduced::Dft(dims))
    }

    fn rank(&self, free: &[EdgeId]) -> usize {
        let mut per_piece: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &e in free {
            if let Status::Free(pi, k) = self.status[e] {
                per_piece.entry(pi).or_default().push(k);
            }
        }
        per_piece
            .iter()
            .map(|(&pi, ks)| self.pieces[pi].rank(ks))
            .sum()
    }

    fn dft(&self, dims: &[Dim]) -> Result<f64> {
        if dims.is_empty() {
            return Ok(1.0);
        }
        let calls: u128 = dims.iter().map(|d| d.modulus as u128).product();
        if calls > MAX_ORACLE_CALLS {
            return Err(Error::Budget(calls));
        }
        let v = self.dft_in::<f64>(dims);
        if v.im.abs() <= IMAG_TOL {
            return Ok(v.re.clamp(0.0, 1.0));
        }
        let w = self.dft_in::<TwoFloat>(dims);
        let (re, im) = (w.re.to_f64().unwrap_or(f64::NAN), w.im.to_f64().unwrap_or(f64::NAN));
        if im.abs() <= IMAG_TOL && re.is_finite() {
            Ok(re.clamp(0.0, 1.0))
        } else {
            Err(Error::Precision(im.abs()))
        }
    }

    fn dft_in<T>(&self, dims: &[Dim]) -> Complex<T>
    where
        T: Float + FloatConst + Send + Sync,
    {
        let mut touched: Vec<usize> = Vec::new();
        let mut member: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); dims.len()];
        for (i, d) in dims.iter().enumerate() {
            for &e in &d.edges {
                if let Status::Free(pi, k) = self.status[e] {
                    member[i].push((pi, k, 0));
                    if !touched.contains(&pi) {
                        touched.push(pi);
                    }
                }
            }
        }
        let base: Vec<ScaledDet<T>> = touched
            .iter()
            .map(|&pi| self.pieces[pi].eval_ones::<T>())
            .collect();
        let roots: Vec<Vec<Complex<T>>> = dims
            .iter()
            .map(|d| {
                (0..d.modulus)
                    .map(|k| {
                        let ang = T::TAU() * T::from(k).unwrap() / T::from(d.modulus).unwrap();
                        Complex::new(ang.cos(), ang.sin())
                    })
                    .collect()
            })
            .collect();
        let total: usize = dims.iter().map(|d| d.modulus).product();
        let term = |idx: usize| -> Complex<T> {
            let mut t = vec![0usize; dims.len()];
            let mut r = idx;
            for (i, d) in dims.iter().enumerate() {
                t[i] = r % d.modulus;
                r /= d.modulus;
            }
            let mut coef = Complex::new(T::one(), T::zero());
            for (i, d) in dims.iter().enumerate() {
                coef = coef * roots[i][(d.modulus - (t[i] * d.sigma) % d.modulus) % d.modulus];
            }
            let mut zs: Vec<Vec<Complex<T>>> = touched
                .iter()
                .map(|&pi| vec![Complex::new(T::one(), T::zero()); self.pieces[pi].ends.len()])
                .collect();
            for (i, mem) in member.iter().enumerate() {
                if t[i] == 0 {
                    continue;
                }
                let w = roots[i][t[i]];
                for &(pi, k, _) in mem {
                    let slot = touched.iter().position(|&p| p == pi).unwrap();
                    zs[slot][k] = zs[slot][k] * w;
                }
            }
            let mut val = coef;
            for (slot, &pi) in touched.iter().enumerate() {
                val = val * self.pieces[pi].eval(&zs[slot]).ratio(base[slot]);
            }
            val
        };
        let sum: Complex<T> = if total >= 64 {
            (0..total)
                .into_par_iter()
                .map(term)
                .reduce(|| Complex::new(T::zero(), T::zero()), |a, b| a + b)
        } else {
            (0..total).map(term).fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
        };
        sum / T::from(total).unwrap()
    }
}

#[derive(Clone, Debug)]
struct Dim {
    modulus: usize,
    sigma: usize,
    edges: Vec<EdgeId>,
}

enum ForceKind {
    AllZero,
    One,
}

enum Reduced {
    Zero,
    Force(Vec<(EdgeId, bool)>, ForceKind),
    Dft(Vec<Dim>),
}

fn validate(q: &ParityQuery) -> Result<()> {
    if q.sigma.len() != q.sets.len() || q.moduli.len() != q.sets.len() {
        return Err(Error::Query("mismatched query lengths".into()));
    }
    for i in 0..q.len() {
        let m = q.moduli[i];
        if m == 0 {
            return Err(Error::Query("modulus 0".into()));
        }
        if q.sigma[i] >= m {
            return Err(Error::Query(format!("residue {} not below modulus {m}", q.sigma[i])));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitOptions {
    pub eps: f64,
    pub max_iter: usize,
    pub drop_below: f64,
    pub tight_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            eps: 1e-10,
            max_iter: 100_000,
            drop_below: 1e-12,
            tight_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub dist: TreeDistribution,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Inside-weights `x(E(S))` for all subsets of an `n`-vertex graph.
fn inside_weights(graph: &Graph, x: &[f64], keep: &[bool]) -> Vec<f64> {
    let n = graph.n();
    let mut w = vec![0.0; n * n];
    for (e, ed) in graph.edges().iter().enumerate() {
        if keep[e] && !ed.is_loop() {
            w[ed.u * n + ed.v] += x[e];
            w[ed.v * n + ed.u] += x[e];
        }
    }
    let size = 1usize << n;
    let mut val = vec![0.0; size];
    for s in 1..size {
        let v = s.trailing_zeros() as usize;
        let rest = s & (s - 1);
        let mut add = 0.0;
        let mut r = rest;
        while r != 0 {
            let u = r.trailing_zeros() as usize;
            add += w[v * n + u];
            r &= r - 1;
        }
        val[s] = val[rest] + add;
    }
    val
}

/// Fit λ so the marginals of the max-entropy distribution match `x`.
///
/// Sets that are tight for the spanning-tree polytope (`x(E(S)) = |S| − 1`)
/// become pieces; λ is fitted on each piece by multiplicative updates
/// `λ_e ← λ_e x_e / P{e ∈ T}`.
pub fn fit_max_entropy(graph: &Graph, x: &[f64], opts: &FitOptions) -> Result<FitReport> {
    assert_eq!(graph.m(), x.len());
    let n = graph.n();
    let active: Vec<bool> = x.iter().map(|&v| v >= opts.drop_below).collect();
    let total: f64 = (0..x.len()).filter(|&e| active[e]).map(|e| x[e]).sum();
    if (total - (n as f64 - 1.0)).abs() > 1e-9 * n as f64 {
        return Err(Error::Infeasible(format!(
            "x(E) = {total} but |V| - 1 = {}",
            n - 1
        )));
    }
    if !graph.connected_with(|e| active[e]) {
        return Err(Error::Infeasible("support is disconnected".into()));
    }
    let mut family = Vec::new();
    if n <= MAX_EXHAUSTIVE_VERTICES {
        let val = inside_weights(graph, x, &active);
        let mut tight: Vec<VSet> = Vec::new();
        for s in 1..(1usize << n) {
            let k = (s as u64).count_ones() as f64;
            let excess = val[s] - (k - 1.0);
            if excess > opts.tight_tol {
                return Err(Error::Infeasible(format!(
                    "x(E(S)) exceeds |S| - 1 by {excess:e} on S = {:?}",
                    set_members(s as u64)
                )));
            }
            let sz = (s as u64).count_ones() as usize;
            if sz >= 2 && sz < n && excess >= -opts.tight_tol {
                tight.push(s as u64);
            }
        }
        tight.sort_by_key(|s| (s.count_ones(), *s));
        for s in tight {
            let ok = family
                .iter()
                .all(|&f: &VSet| f & s == 0 || f & !s == 0 || s & !f == 0);
            if ok {
                family.push(s);
            }
        }
    }
    let mut lambda: Vec<f64> = active.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
    let mut dist = TreeDistribution::with_family(graph.clone(), lambda.clone(), active.clone(), family)?;
    let mut iterations = 0;
    let mut max_rel = 0.0f64;
    let mut max_abs = 0.0f64;
    let mut converged = true;
    for p in dist.pieces.clone() {
        if p.edges.is_empty() {
            continue;
        }
        let mut lp = dist.local_piece(&p);
        let target: Vec<f64> = p.edges.iter().map(|&e| x[e]).collect();
        let mut it = 0;
        let (rel, abs) = loop {
            let marg = lp.marginals().ok_or_else(|| {
                Error::Structure("singular Laplacian during fitting".into())
            })?;
            let mut rel = 0.0f64;
            let mut abs = 0.0f64;
            for k in 0..marg.len() {
                rel = rel.max((marg[k] - target[k]).abs() / target[k]);
                abs = abs.max((marg[k] - target[k]).abs());
            }
            if rel <= opts.eps || it >= opts.max_iter {
                break (rel, abs);
            }
            for k in 0..marg.len() {
                lp.lambda[k] *= target[k] / marg[k];
            }
            let s: f64 = lp.lambda.iter().map(|l| l.ln()).sum::<f64>() / lp.lambda.len() as f64;
            let f = (-s).exp();
            for l in lp.lambda.iter_mut() {
                *l *= f;
            }
            it += 1;
        };
        if rel > opts.eps {
            converged = false;
        }
        iterations = iterations.max(it);
        max_rel = max_rel.max(rel);
        max_abs = max_abs.max(abs);
        for (k, &e) in p.edges.iter().enumerate() {
            lambda[e] = lp.lambda[k];
        }
    }
    dist.lambda = lambda;
    Ok(FitReport {
        dist: dist.normalize(),
        max_rel_err: max_rel,
        max_abs_err: max_abs,
        iterations,
        converged,
    })
}
