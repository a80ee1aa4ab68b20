//! Reductions and increases over the hierarchy, and the slack vector `s`.
//!
//! Bernoulli variables never get sampled: each reduction event is a tree
//! event times a success rate fixed at `Set = ∅`, so every expectation is a
//! [`LinearForm`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VSet};
use crate::hierarchy::{BundleKind, CutKind, DegreePartition, Hierarchy};
use crate::linform::LinearForm;
use crate::maxflow::{Cap, FlowNetwork};
use crate::treedist::{Conditioned, ParityQuery, TreeDistribution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeType {
    TwoOneOne,
    TwoTwoTwo { partner: usize },
    TwoTwo,
    Bad,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeEntry {
    pub ty: EdgeType,
    /// Happiness probability at `Set = ∅`.
    pub base: f64,
    /// Bernoulli success probability.
    pub rate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolygonFlow {
    pub p_hs: f64,
    /// `(e, f, y, z, alpha)` for `e ∈ A`, `f ∈ B`.
    pub pairs: Vec<(EdgeId, EdgeId, f64, f64, f64)>,
    pub p_s: f64,
    pub rate: f64,
}

/// The edges and vertex sets the hierarchy formulas need, with the exact
/// count modulus `n = |V(G)|`.
struct Ctx<'a> {
    g: &'a Graph,
    n: usize,
}

impl Ctx<'_> {
    fn tree(&self, s: VSet) -> ParityQuery {
        let e = self.g.inside(s);
        if e.is_empty() {
            ParityQuery::new()
        } else {
            ParityQuery::new().with(e, s.count_ones() as usize - 1, self.n)
        }
    }

    fn exact(&self, set: Vec<EdgeId>, k: usize) -> ParityQuery {
        ParityQuery::new().with(set, k, self.n)
    }

    fn deg2(&self, s: VSet) -> ParityQuery {
        self.exact(self.g.delta(s), 2)
    }
}

fn prob(view: &Conditioned<'_>, n: usize, q: &ParityQuery) -> Result<f64> {
    LinearForm::event(n, q, 1.0).eval(view)
}

fn count(tm: &[bool], set: &[EdgeId]) -> usize {
    set.iter().filter(|&&e| tm[e]).count()
}

#[derive(Clone, Debug)]
pub struct SSlack {
    pub g: Graph,
    pub x: Vec<f64>,
    pub cost: Vec<f64>,
    pub n: usize,
    pub k: Constants,
    pub h: Hierarchy,
    /// `p₂₋₂(f, ∅)` per top bundle.
    pub p22: Vec<Option<f64>>,
    /// Keyed by `(bundle, endpoint node)`.
    pub types: BTreeMap<(usize, usize), TypeEntry>,
    /// The 2-2-2 pair `(e, f)` at a node, with `x(e ∩ B) ≤ ε½` and `x(f ∩ A) ≤ ε½`.
    pub pairs: BTreeMap<usize, (usize, usize)>,
    pub flows: BTreeMap<usize, PolygonFlow>,
    /// `m_{f,u}` keyed by `(bundle, node)`.
    pub matching: BTreeMap<(usize, usize), f64>,
    pub violations: Vec<String>,
    r: Vec<LinearForm>,
    i_up: BTreeMap<usize, LinearForm>,
    i_right: BTreeMap<usize, LinearForm>,
    i_bundle: Vec<LinearForm>,
}

impl SSlack {
    /// `g` is `G/e0`, `n = |V(G)|`.
    pub fn build(
        g: &Graph,
        x: &[f64],
        cost: &[f64],
        n: usize,
        h: &Hierarchy,
        k: &Constants,
        dist: &TreeDistribution,
    ) -> Result<SSlack> {
        let ctx = Ctx { g, n };
        let view = dist.view();
        let mut violations = h.violations.clone();
        let mut s = SSlack {
            g: g.clone(),
            x: x.to_vec(),
            cost: cost.to_vec(),
            n,
            k: k.clone(),
            h: h.clone(),
            p22: vec![None; h.bundles.len()],
            types: BTreeMap::new(),
            pairs: BTreeMap::new(),
            flows: BTreeMap::new(),
            matching: BTreeMap::new(),
            violations: Vec::new(),
            r: Vec::new(),
            i_up: BTreeMap::new(),
            i_right: BTreeMap::new(),
            i_bundle: Vec::new(),
        };
        for b in 0..h.bundles.len() {
            if let BundleKind::Top { .. } = h.bundles[b].kind {
                s.p22[b] = Some(prob(&view, n, &s.h22_query(&ctx, b))?);
            }
        }
        for u in 0..h.nodes.len() {
            let Some(p) = h.nodes[u].parent else { continue };
            if h.nodes[p].kind == CutKind::Degree {
                s.classify(&ctx, &view, u, &mut violations)?;
            }
        }
        for i in 0..h.nodes.len() {
            if h.is_near_cycle(i) {
                let f = s.polygon_flow(&ctx, &view, i, &mut violations)?;
                s.flows.insert(i, f);
            } else {
                s.degree_matching(i);
            }
        }
        s.violations = violations;
        s.build_forms()?;
        Ok(s)
    }

    fn build_forms(&mut self) -> Result<()> {
        let g = self.g.clone();
        let ctx = Ctx { g: &g, n: self.n };
        self.r = (0..g.m()).map(|e| self.build_r(e)).collect();
        self.i_up.clear();
        self.i_right.clear();
        for i in 0..self.h.nodes.len() {
            if self.h.is_near_cycle(i) {
                let up = self.build_i_up(&ctx, i);
                let right = self.build_i_right(&ctx, i);
                self.i_up.insert(i, up);
                self.i_right.insert(i, right);
            }
        }
        let mut i_bundle = Vec::with_capacity(self.h.bundles.len());
        for b in 0..self.h.bundles.len() {
            i_bundle.push(self.build_i_bundle(b)?);
        }
        self.i_bundle = i_bundle;
        Ok(())
    }

    fn ends(&self, b: usize) -> Option<(usize, usize)> {
        match self.h.bundles[b].kind {
            BundleKind::Top { u, v, .. } => Some((u, v)),
            BundleKind::Bottom { .. } => None,
        }
    }

    fn other(&self, b: usize, u: usize) -> usize {
        let (a, c) = self.ends(b).expect("top bundle");
        if a == u {
            c
        } else {
            a
        }
    }

    fn set(&self, u: usize) -> VSet {
        self.h.nodes[u].set
    }

    fn h22_query(&self, ctx: &Ctx<'_>, b: usize) -> ParityQuery {
        let (u, v) = self.ends(b).expect("top bundle");
        let (su, sv) = (self.set(u), self.set(v));
        ctx.tree(su).merged(&ctx.tree(sv)).merged(&ctx.deg2(su)).merged(&ctx.deg2(sv))
    }

    /// `None` when the degree partition of `u` splits an edge.
    fn h211_query(&self, ctx: &Ctx<'_>, b: usize, u: usize) -> Option<ParityQuery> {
        let dp = self.h.nodes[u].degree_partition.as_ref()?;
        if dp.split {
            return None;
        }
        let v = self.other(b, u);
        let (su, sv) = (self.set(u), self.set(v));
        Some(
            ctx.tree(su)
                .merged(&ctx.tree(sv))
                .with(DegreePartition::ids(&dp.a), 1, ctx.n)
                .with(DegreePartition::ids(&dp.b), 1, ctx.n)
                .with(DegreePartition::ids(&dp.c), 0, ctx.n)
                .merged(&ctx.deg2(sv)),
        )
    }

    fn h222_query(&self, ctx: &Ctx<'_>, e: usize, f: usize, u: usize) -> ParityQuery {
        let (su, sv, sw) = (self.set(u), self.set(self.other(e, u)), self.set(self.other(f, u)));
        let mut q = ParityQuery::new();
        for s in [su, sv, sw] {
            q = q.merged(&ctx.tree(s));
        }
        for s in [su, sv, sw] {
            q = q.merged(&ctx.deg2(s));
        }
        q
    }

    fn rate(&self, base: f64, what: &str, violations: &mut Vec<String>) -> f64 {
        if base <= 0.0 {
            violations.push(format!("{what}: baseline probability is zero"));
            return 0.0;
        }
        let r = self.k.p / base;
        if r > 1.0 {
            violations.push(format!("{what}: baseline {base} below p = {}", self.k.p));
            1.0
        } else {
            r
        }
    }

    fn classify(&mut self, ctx: &Ctx<'_>, view: &Conditioned<'_>, u: usize, violations: &mut Vec<String>) -> Result<()> {
        let k = self.k.clone();
        let at = self.h.bundles_at(u);
        let mut f_x = 0.0;
        let mut rest = Vec::new();
        if !at.is_empty() && self.h.nodes[u].degree_partition.as_ref().is_some_and(|d| d.split) {
            violations.push(format!("degree partition of node {u} splits an edge; 2-1-1 skipped"));
        }
        for &b in &at {
            let p211 = match self.h211_query(ctx, b, u) {
                Some(q) => prob(view, ctx.n, &q)?,
                None => 0.0,
            };
            if p211 >= k.p {
                let rate = self.rate(p211, "2-1-1", violations);
                self.types.insert((b, u), TypeEntry { ty: EdgeType::TwoOneOne, base: p211, rate });
                f_x += self.h.bundles[b].x;
            } else {
                rest.push(b);
            }
        }
        let j_x: f64 = at
            .iter()
            .filter(|&&b| self.p22[b].is_some_and(|p| p < k.p))
            .map(|&b| self.h.bundles[b].x)
            .sum();
        if f_x <= 0.5 - k.eps_half - k.eps_eta && j_x <= 0.5 - k.eps_half {
            let dp = self.h.nodes[u].degree_partition.clone().expect("degree partition");
            let mut found = None;
            'search: for &e in &rest {
                for &f in &rest {
                    if e == f {
                        continue;
                    }
                    let eb = DegreePartition::x_within(&dp.b, &self.h.bundles[e].edges);
                    let fa = DegreePartition::x_within(&dp.a, &self.h.bundles[f].edges);
                    if eb > k.eps_half || fa > k.eps_half {
                        continue;
                    }
                    let p = prob(view, ctx.n, &self.h222_query(ctx, e, f, u))?;
                    if p >= k.p {
                        found = Some((e, f, p));
                        break 'search;
                    }
                }
            }
            match found {
                Some((e, f, p)) => {
                    let rate = self.rate(p, "2-2-2", violations);
                    self.types.insert((e, u), TypeEntry { ty: EdgeType::TwoTwoTwo { partner: f }, base: p, rate });
                    self.types.insert((f, u), TypeEntry { ty: EdgeType::TwoTwoTwo { partner: e }, base: p, rate });
                    self.pairs.insert(u, (e, f));
                    rest.retain(|&b| b != e && b != f);
                }
                None => violations.push(format!("node {u}: no 2-2-2 pair although x(F) and x(J) are small")),
            }
        }
        for b in rest {
            let p = self.p22[b].expect("top bundle");
            let entry = if p >= k.p {
                TypeEntry { ty: EdgeType::TwoTwo, base: p, rate: self.rate(p, "2-2", violations) }
            } else {
                TypeEntry { ty: EdgeType::Bad, base: p, rate: 0.0 }
            };
            self.types.insert((b, u), entry);
        }
        Ok(())
    }

    /// `H_S`: `A_T = B_T = 1`, `C_T = 0`, `S` a tree.
    fn hs_query(&self, ctx: &Ctx<'_>, s: usize) -> ParityQuery {
        let near = self.h.nodes[s].near.as_ref().expect("near-cycle");
        ctx.exact(near.a.clone(), 1)
            .merged(&ctx.exact(near.b.clone(), 1))
            .merged(&ctx.exact(near.c.clone(), 0))
            .merged(&ctx.tree(self.set(s)))
    }

    /// `A ∩ T = {e}`, `B ∩ T = {f}`, `C_T = 0`, `S` a tree.
    fn pair_query(&self, ctx: &Ctx<'_>, s: usize, e: EdgeId, f: EdgeId) -> ParityQuery {
        let near = self.h.nodes[s].near.as_ref().expect("near-cycle");
        let rest = |set: &[EdgeId], keep: EdgeId| set.iter().copied().filter(|&g| g != keep).collect::<Vec<_>>();
        ParityQuery::new()
            .with(vec![e], 1, 2)
            .with(rest(&near.a, e), 0, ctx.n)
            .with(vec![f], 1, 2)
            .with(rest(&near.b, f), 0, ctx.n)
            .merged(&ctx.exact(near.c.clone(), 0))
            .merged(&ctx.tree(self.set(s)))
    }

    fn polygon_flow(
        &self,
        ctx: &Ctx<'_>,
        view: &Conditioned<'_>,
        s: usize,
        violations: &mut Vec<String>,
    ) -> Result<PolygonFlow> {
        let near = self.h.nodes[s].near.clone().expect("near-cycle");
        let set = self.set(s);
        let p_hs = prob(view, ctx.n, &self.hs_query(ctx, s))?;
        if p_hs <= 0.0 {
            violations.push(format!("near-cycle cut {set:#b}: P(H_S) = 0"));
            return Ok(PolygonFlow { p_hs, pairs: Vec::new(), p_s: 0.0, rate: 0.0 });
        }
        let delta = self.g.delta(set);
        let base_q = ctx.exact(near.c.clone(), 0).merged(&ctx.tree(set));
        let base = prob(view, ctx.n, &base_q)?;
        let q = self.k.flow_scale() * base / p_hs;
        let xt = |e: EdgeId| -> Result<f64> {
            Ok(prob(view, ctx.n, &base_q.clone().with(vec![e], 1, 2))? / base)
        };
        let (na, nb) = (near.a.len(), near.b.len());
        let (src, sink) = (0, 1 + na + nb);
        let mut net = FlowNetwork::new(na + nb + 2);
        for (i, &e) in near.a.iter().enumerate() {
            net.add_snapped(src, 1 + i, q * xt(e)?);
        }
        for (j, &f) in near.b.iter().enumerate() {
            net.add_snapped(1 + na + j, sink, q * xt(f)?);
        }
        let mut mids = Vec::new();
        for (i, &e) in near.a.iter().enumerate() {
            for (j, &f) in near.b.iter().enumerate() {
                let rest: Vec<EdgeId> = delta.iter().copied().filter(|&g| g != e && g != f).collect();
                let qq = ParityQuery::new()
                    .with(vec![e], 1, 2)
                    .with(vec![f], 1, 2)
                    .with(rest, 0, ctx.n)
                    .merged(&ctx.tree(set));
                let y = prob(view, ctx.n, &qq)? / p_hs;
                let arc = net.add_snapped(1 + i, 1 + na + j, y);
                mids.push((e, f, y, arc));
            }
        }
        let res = net.max_flow(src, sink);
        let mut pairs = Vec::new();
        let mut total = 0.0;
        for (e, f, y, arc) in mids {
            let z = res.flow_f64(arc);
            total += z;
            let alpha = if y > 0.0 { (z / y).min(1.0) } else { 0.0 };
            pairs.push((e, f, y, z, alpha));
        }
        let p_s = p_hs * total;
        let rate = self.rate(p_s, &format!("near-cycle cut {set:#b}"), violations);
        Ok(PolygonFlow { p_hs, pairs, p_s, rate })
    }

    fn degree_matching(&mut self, s: usize) {
        let k = &self.k;
        let children = self.h.nodes[s].children.clone();
        let good: Vec<usize> = (0..self.h.bundles.len())
            .filter(|&b| matches!(self.h.bundles[b].kind, BundleKind::Top { cut, .. } if cut == s))
            .filter(|&b| self.p22[b].is_some_and(|p| p >= k.p))
            .collect();
        let nx = good.len();
        let sink = 1 + nx + children.len();
        let mut net = FlowNetwork::new(sink + 1);
        let mut f_u = Vec::new();
        for (i, &u) in children.iter().enumerate() {
            let up = Graph::weight(&self.x, &self.h.nodes[u].up);
            let f = if up >= k.eps_f && up <= 1.0 - k.eps_f { 1.0 - k.eps_b } else { 1.0 };
            let z = if children.len() >= 4 && up <= k.eps_f { 2.0 } else { 1.0 };
            f_u.push(f);
            net.add_snapped(1 + nx + i, sink, up * f * z);
        }
        let mut arcs = Vec::new();
        for (i, &b) in good.iter().enumerate() {
            net.add_snapped(0, 1 + i, (1.0 + k.alpha) * self.h.bundles[b].x);
            let (u, v) = self.ends(b).expect("top bundle");
            for w in [u, v] {
                let j = children.iter().position(|&c| c == w).expect("atom of the cut");
                arcs.push((b, w, j, net.add_arc(1 + i, 1 + nx + j, Cap::Infinite)));
            }
        }
        let res = net.max_flow(0, sink);
        for (b, w, j, arc) in arcs {
            self.matching.insert((b, w), res.flow_f64(arc) / f_u[j]);
        }
    }

    /// `𝔼[R_{f,u} | Set]` as a form.
    pub fn r_edge_form(&self, b: usize, u: usize) -> LinearForm {
        let ctx = Ctx { g: &self.g, n: self.n };
        let Some(t) = self.types.get(&(b, u)) else { return LinearForm::zero(self.n) };
        let q = match t.ty {
            EdgeType::Bad => return LinearForm::zero(self.n),
            EdgeType::TwoOneOne => self.h211_query(&ctx, b, u).expect("2-1-1 has a whole partition"),
            EdgeType::TwoTwoTwo { partner } => self.h222_query(&ctx, b, partner, u),
            EdgeType::TwoTwo => self.h22_query(&ctx, b),
        };
        LinearForm::event(self.n, &q, t.rate)
    }

    /// `𝔼[R_S | Set]` as a form.
    pub fn r_cut_form(&self, s: usize) -> LinearForm {
        let ctx = Ctx { g: &self.g, n: self.n };
        let mut f = LinearForm::zero(self.n);
        let Some(flow) = self.flows.get(&s) else { return f };
        for &(e, g, _, _, alpha) in &flow.pairs {
            if alpha > 0.0 {
                f.add_event(&self.pair_query(&ctx, s, e, g), flow.rate * alpha);
            }
        }
        f
    }

    fn build_r(&self, e: EdgeId) -> LinearForm {
        let Some(b) = self.h.edge_bundle[e] else { return LinearForm::zero(self.n) };
        match self.h.bundles[b].kind {
            BundleKind::Top { u, v, .. } => {
                let mut f = self.r_edge_form(b, u);
                f.add(&self.r_edge_form(b, v), 1.0);
                f.scaled(0.5 * self.k.tau * self.x[e])
            }
            BundleKind::Bottom { cut } => self.r_cut_form(cut).scaled(self.k.beta * self.x[e]),
        }
    }

    /// `𝔼[r_e | Set]`.
    pub fn r_form(&self, e: EdgeId) -> &LinearForm {
        &self.r[e]
    }

    fn happy(&self, ctx: &Ctx<'_>, s: usize, left: bool, right: bool) -> ParityQuery {
        let near = self.h.nodes[s].near.as_ref().expect("near-cycle");
        let mut q = ctx.exact(near.c.clone(), 0);
        if left {
            q = q.with(near.a.clone(), 1, 2);
        }
        if right {
            q = q.with(near.b.clone(), 1, 2);
        }
        q
    }

    fn build_i_up(&self, ctx: &Ctx<'_>, s: usize) -> LinearForm {
        let node = &self.h.nodes[s];
        let near = node.near.as_ref().expect("near-cycle");
        let (lh, rh) = (self.happy(ctx, s, true, false), self.happy(ctx, s, false, true));
        let mut f = LinearForm::zero(self.n);
        for &g in near.a.iter().filter(|g| node.up.contains(g)) {
            f.add(&self.r[g].and_not(&lh), 1.0);
        }
        for &g in near.b.iter().filter(|g| node.up.contains(g)) {
            f.add(&self.r[g].and_not(&rh), 1.0);
        }
        for &g in &near.c {
            f.add(&self.r[g], 1.0);
        }
        f.scaled(1.0 + self.k.eps_eta)
    }

    /// The edges of `δ→(S)` left out of the Case 2 residual sum, and the
    /// prefactor `max{x_{e(A')}, x_{f(B')}}`.
    fn case2_split(&self, s: usize, e: usize, f: usize) -> (Vec<EdgeId>, f64) {
        let dp = self.h.nodes[s].degree_partition.as_ref().expect("degree partition");
        let ea: Vec<EdgeId> = self.h.bundles[e]
            .edges
            .iter()
            .copied()
            .filter(|g| DegreePartition::ids(&dp.a).contains(g))
            .collect();
        let fb: Vec<EdgeId> = self.h.bundles[f]
            .edges
            .iter()
            .copied()
            .filter(|g| DegreePartition::ids(&dp.b).contains(g))
            .collect();
        let xa = DegreePartition::x_within(&dp.a, &self.h.bundles[e].edges);
        let xb = DegreePartition::x_within(&dp.b, &self.h.bundles[f].edges);
        let mut skip = ea;
        skip.extend(fb);
        (skip, xa.max(xb))
    }

    fn build_i_right(&self, ctx: &Ctx<'_>, s: usize) -> LinearForm {
        let node = &self.h.nodes[s];
        let Some(p) = node.parent else { return LinearForm::zero(self.n) };
        let near = node.near.as_ref().expect("near-cycle");
        let happy = self.happy(ctx, s, true, true);
        let k = &self.k;
        let scale = 1.0 + k.eps_eta;
        if self.h.is_near_cycle(p) {
            let w = |set: &[EdgeId]| Graph::weight(&self.x, &set.iter().copied().filter(|g| node.right.contains(g)).collect::<Vec<_>>());
            let coef = scale * k.beta * (w(&near.a).max(w(&near.b)) + w(&near.c));
            return self.r_cut_form(p).and_not(&happy).scaled(coef);
        }
        let mut f = LinearForm::zero(self.n);
        let mut skip = Vec::new();
        if let Some(&(e, g)) = self.pairs.get(&s) {
            let (sk, xm) = self.case2_split(s, e, g);
            skip = sk;
            let mut three = self.r_edge_form(e, s);
            three.add(&self.r_edge_form(e, self.other(e, s)), 1.0);
            three.add(&self.r_edge_form(g, self.other(g, s)), 1.0);
            f.add(&three, scale * 0.5 * k.tau * xm);
        }
        for &g in node.right.iter().filter(|g| !skip.contains(g)) {
            f.add(&self.r[g].and_not(&happy), scale);
        }
        f
    }

    /// `𝔼[I↑_S | Set]`.
    pub fn i_up_form(&self, s: usize) -> Option<&LinearForm> {
        self.i_up.get(&s)
    }

    /// `𝔼[I→(S) | Set]`.
    pub fn i_right_form(&self, s: usize) -> Option<&LinearForm> {
        self.i_right.get(&s)
    }

    fn bundle_share(&self, b: usize, u: usize) -> Result<f64> {
        let m = self.matching.get(&(b, u)).copied().unwrap_or(0.0);
        let total: f64 = self
            .h
            .bundles_at(u)
            .iter()
            .map(|&f| self.matching.get(&(f, u)).copied().unwrap_or(0.0))
            .sum();
        if total <= 0.0 {
            if m > 0.0 {
                return Err(Error::Structure(format!("node {u}: matched bundle with zero total")));
            }
            return Ok(0.0);
        }
        Ok(m / total)
    }

    fn build_i_bundle(&self, b: usize) -> Result<LinearForm> {
        let mut f = LinearForm::zero(self.n);
        let Some((u, v)) = self.ends(b) else { return Ok(f) };
        for w in [u, v] {
            let share = self.bundle_share(b, w)?;
            if share == 0.0 {
                continue;
            }
            let odd = ParityQuery::new().with(self.g.delta(self.set(w)), 1, 2);
            for &g in &self.h.nodes[w].up {
                f.add(&self.r[g].and(&odd), share);
            }
        }
        Ok(f)
    }

    /// `𝔼[I_f | Set]` for a top bundle.
    pub fn i_bundle_form(&self, b: usize) -> &LinearForm {
        &self.i_bundle[b]
    }

    /// Good edges: bottom edges and top edges whose bundle has `p₂₋₂ ≥ p`.
    pub fn is_good(&self, e: EdgeId) -> bool {
        match self.h.edge_bundle[e] {
            None => false,
            Some(b) => match self.h.bundles[b].kind {
                BundleKind::Bottom { .. } => true,
                BundleKind::Top { .. } => self.p22[b].is_some_and(|p| p >= self.k.p),
            },
        }
    }

    pub fn s_bad(&self, e: EdgeId) -> f64 {
        let (b, eta) = (self.k.beta, self.k.eta);
        if self.is_good(e) {
            self.x[e] * 4.0 * b / 3.0
        } else {
            -self.x[e] * (4.0 * b / 5.0) * (1.0 - 2.0 * eta)
        }
    }

    /// `𝔼[s^H_e | Set]`.
    pub fn s_h_form(&self, e: EdgeId) -> LinearForm {
        let mut f = self.r[e].scaled(-1.0);
        let Some(b) = self.h.edge_bundle[e] else { return f };
        match self.h.bundles[b].kind {
            BundleKind::Top { .. } => f.add(&self.i_bundle[b], self.x[e] / self.h.bundles[b].x),
            BundleKind::Bottom { cut } => {
                f.add(&self.i_up[&cut], self.x[e]);
                f.add(&self.i_right[&cut], self.x[e]);
            }
        }
        f
    }

    /// `𝔼[c(s_e) | Set]`.
    pub fn exp_c_s(&self, e: EdgeId) -> LinearForm {
        let gamma = self.k.gamma;
        let mut f = LinearForm::constant(self.n, gamma * self.s_bad(e));
        f.add(&self.s_h_form(e), 1.0 - gamma);
        f.scaled(self.cost[e])
    }
}

/// Per-tree values computed straight from the event definitions, with each
/// Bernoulli replaced by its success rate.
impl SSlack {
    fn is_tree(&self, tm: &[bool], s: VSet) -> bool {
        count(tm, &self.g.inside(s)) + 1 == s.count_ones() as usize
    }

    fn deg(&self, tm: &[bool], s: VSet) -> usize {
        count(tm, &self.g.delta(s))
    }

    fn realized_h(&self, tm: &[bool], ty: EdgeType, b: usize, u: usize) -> bool {
        let v = self.other(b, u);
        let (su, sv) = (self.set(u), self.set(v));
        match ty {
            EdgeType::Bad => false,
            EdgeType::TwoTwo => {
                self.is_tree(tm, su) && self.is_tree(tm, sv) && self.deg(tm, su) == 2 && self.deg(tm, sv) == 2
            }
            EdgeType::TwoOneOne => {
                let dp = self.h.nodes[u].degree_partition.as_ref().expect("degree partition");
                self.is_tree(tm, su)
                    && self.is_tree(tm, sv)
                    && count(tm, &DegreePartition::ids(&dp.a)) == 1
                    && count(tm, &DegreePartition::ids(&dp.b)) == 1
                    && count(tm, &DegreePartition::ids(&dp.c)) == 0
                    && self.deg(tm, sv) == 2
            }
            EdgeType::TwoTwoTwo { partner } => {
                let sw = self.set(self.other(partner, u));
                [su, sv, sw].iter().all(|&s| self.is_tree(tm, s) && self.deg(tm, s) == 2)
            }
        }
    }

    pub fn realized_r_edge(&self, tm: &[bool], b: usize, u: usize) -> f64 {
        match self.types.get(&(b, u)) {
            Some(t) if self.realized_h(tm, t.ty, b, u) => t.rate,
            _ => 0.0,
        }
    }

    pub fn realized_r_cut(&self, tm: &[bool], s: usize) -> f64 {
        let Some(flow) = self.flows.get(&s) else { return 0.0 };
        let near = self.h.nodes[s].near.as_ref().expect("near-cycle");
        let ok = count(tm, &near.a) == 1
            && count(tm, &near.b) == 1
            && count(tm, &near.c) == 0
            && self.is_tree(tm, self.set(s));
        if !ok {
            return 0.0;
        }
        flow.pairs
            .iter()
            .filter(|&&(e, f, ..)| tm[e] && tm[f])
            .map(|&(.., alpha)| flow.rate * alpha)
            .sum()
    }

    pub fn realized_r(&self, tm: &[bool], e: EdgeId) -> f64 {
        let Some(b) = self.h.edge_bundle[e] else { return 0.0 };
        match self.h.bundles[b].kind {
            BundleKind::Top { u, v, .. } => {
                0.5 * self.k.tau * self.x[e] * (self.realized_r_edge(tm, b, u) + self.realized_r_edge(tm, b, v))
            }
            BundleKind::Bottom { cut } => self.k.beta * self.x[e] * self.realized_r_cut(tm, cut),
        }
    }

    fn realized_happy(&self, tm: &[bool], s: usize, left: bool, right: bool) -> bool {
        let near = self.h.nodes[s].near.as_ref().expect("near-cycle");
        count(tm, &near.c) == 0
            && (!left || count(tm, &near.a) % 2 == 1)
            && (!right || count(tm, &near.b) % 2 == 1)
    }

    pub fn realized_i_up(&self, tm: &[bool], s: usize) -> f64 {
        let node = &self.h.nodes[s];
        let Some(near) = node.near.as_ref() else { return 0.0 };
        let not_l = !self.realized_happy(tm, s, true, false);
        let not_r = !self.realized_happy(tm, s, false, true);
        let mut v = 0.0;
        for &g in &near.a {
            if node.up.contains(&g) && not_l {
                v += self.realized_r(tm, g);
            }
        }
        for &g in &near.b {
            if node.up.contains(&g) && not_r {
                v += self.realized_r(tm, g);
            }
        }
        for &g in &near.c {
            v += self.realized_r(tm, g);
        }
        (1.0 + self.k.eps_eta) * v
    }

    pub fn realized_i_right(&self, tm: &[bool], s: usize) -> f64 {
        let node = &self.h.nodes[s];
        let (Some(near), Some(p)) = (node.near.as_ref(), node.parent) else { return 0.0 };
        let k = &self.k;
        let not_happy = !self.realized_happy(tm, s, true, true);
        if self.h.is_near_cycle(p) {
            let w = |set: &[EdgeId]| -> f64 { set.iter().filter(|g| node.right.contains(g)).map(|&g| self.x[g]).sum() };
            let coef = (1.0 + k.eps_eta) * k.beta * (w(&near.a).max(w(&near.b)) + w(&near.c));
            return if not_happy { coef * self.realized_r_cut(tm, p) } else { 0.0 };
        }
        let mut v = 0.0;
        let mut skip = Vec::new();
        if let Some(&(e, f)) = self.pairs.get(&s) {
            let (sk, xm) = self.case2_split(s, e, f);
            skip = sk;
            let three = self.realized_r_edge(tm, e, s)
                + self.realized_r_edge(tm, e, self.other(e, s))
                + self.realized_r_edge(tm, f, self.other(f, s));
            v += 0.5 * k.tau * xm * three;
        }
        if not_happy {
            for &g in node.right.iter().filter(|g| !skip.contains(g)) {
                v += self.realized_r(tm, g);
            }
        }
        (1.0 + k.eps_eta) * v
    }

    pub fn realized_i_bundle(&self, tm: &[bool], b: usize) -> f64 {
        let Some((u, v)) = self.ends(b) else { return 0.0 };
        let mut out = 0.0;
        for w in [u, v] {
            let share = self.bundle_share(b, w).unwrap_or(0.0);
            if share == 0.0 || self.deg(tm, self.set(w)) % 2 == 0 {
                continue;
            }
            let sum: f64 = self.h.nodes[w].up.iter().map(|&g| self.realized_r(tm, g)).sum();
            out += share * sum;
        }
        out
    }

    pub fn realized_c_s(&self, tree: &[EdgeId], e: EdgeId) -> f64 {
        let mut tm = vec![false; self.g.m()];
        for &t in tree {
            tm[t] = true;
        }
        let mut sh = -self.realized_r(&tm, e);
        if let Some(b) = self.h.edge_bundle[e] {
            match self.h.bundles[b].kind {
                BundleKind::Top { .. } => sh += self.realized_i_bundle(&tm, b) * self.x[e] / self.h.bundles[b].x,
                BundleKind::Bottom { cut } => {
                    sh += self.x[e] * (self.realized_i_up(&tm, cut) + self.realized_i_right(&tm, cut))
                }
            }
        }
        let gamma = self.k.gamma;
        self.cost[e] * (gamma * self.s_bad(e) + (1.0 - gamma) * sh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuts::CutStructure;
    use crate::fixtures::{blown_k4_lp, necklace_lp, prepare_on_circle, Prepared};
    use crate::graph::set_members;

    fn setup(raw: &crate::instance::LpSolution, k: &Constants) -> (Prepared, SSlack) {
        let p = prepare_on_circle(raw).unwrap();
        let g = &p.sg.contracted;
        let cs = CutStructure::build(g, &p.sg.x, p.sg.root, k.eta).unwrap();
        let h = Hierarchy::build(g, &p.sg.x, &cs, k).unwrap();
        let s = SSlack::build(g, &p.sg.x, &p.sg.cost, p.sg.g.n(), &h, k, &p.dist).unwrap();
        (p, s)
    }

    fn trees(g: &Graph) -> Vec<Vec<EdgeId>> {
        let k = g.n() - 1;
        (0u64..(1 << g.m()))
            .filter(|m| m.count_ones() as usize == k)
            .map(set_members)
            .filter(|t| g.is_spanning_tree(t))
            .collect()
    }

    fn profile() -> Constants {
        Constants::test().with_eta(0.1)
    }

    #[test]
    fn reduction_events_have_probability_p() {
        for raw in [necklace_lp(), blown_k4_lp()] {
            let (p, s) = setup(&raw, &profile());
            let view = p.dist.view();
            for (&(b, u), t) in &s.types {
                let v = s.r_edge_form(b, u).eval(&view).unwrap();
                if t.ty != EdgeType::Bad {
                    assert!((v - s.k.p).abs() < 1e-9, "{t:?}: {v}");
                } else {
                    assert_eq!(v, 0.0);
                }
            }
            assert!(!s.flows.is_empty());
            for (&c, f) in &s.flows {
                assert!(f.rate > 0.0 && f.rate < 1.0);
                let v = s.r_cut_form(c).eval(&view).unwrap();
                assert!((v - s.k.p).abs() < 1e-12, "{v}");
            }
            assert!(s.violations.is_empty(), "{:?}", s.violations);
        }
    }

    fn check_forms(p: &Prepared, s: &SSlack) {
        let all = trees(&p.sg.g);
        let probs: Vec<f64> = all.iter().map(|t| p.dist.tree_probability(t)).collect();
        let view = p.dist.view();
        let mut nonzero = 0;
        for e in 0..s.g.m() {
            let f = s.exp_c_s(e);
            let mut want = 0.0;
            for (t, &pr) in all.iter().zip(&probs) {
                let r = s.realized_c_s(t, e);
                assert!((f.eval_on_tree(t) - r).abs() < 1e-12, "edge {e}");
                want += pr * r;
            }
            assert!((f.eval(&view).unwrap() - want).abs() < 1e-9);
            if s.r_form(e).eval(&view).unwrap() > 0.0 {
                nonzero += 1;
            }
        }
        assert!(nonzero > 0);
    }

    #[test]
    fn forms_match_realized_values() {
        for raw in [necklace_lp(), blown_k4_lp()] {
            let (p, s) = setup(&raw, &profile());
            check_forms(&p, &s);
        }
    }

    #[test]
    fn two_two_two_pair_under_degree_parent() {
        let (p, mut s) = setup(&blown_k4_lp(), &profile());
        let u = (0..s.h.nodes.len()).find(|&i| s.h.nodes[i].set == 0b110000).unwrap();
        assert_eq!(s.h.nodes[u].kind, CutKind::Triangle);
        let at = s.h.bundles_at(u);
        let (e, f) = (at[0], at[1]);
        let ctx = Ctx { g: &p.sg.contracted, n: s.n };
        let view = p.dist.view();
        let base = prob(&view, s.n, &s.h222_query(&ctx, e, f, u)).unwrap();
        assert!(base > s.k.p);
        let rate = s.k.p / base;
        s.types.insert((e, u), TypeEntry { ty: EdgeType::TwoTwoTwo { partner: f }, base, rate });
        s.types.insert((f, u), TypeEntry { ty: EdgeType::TwoTwoTwo { partner: e }, base, rate });
        s.pairs.insert(u, (e, f));
        s.build_forms().unwrap();
        let v = s.r_edge_form(e, u).eval(&view).unwrap();
        assert!((v - s.k.p).abs() < 1e-12);
        assert!(s.i_right_form(u).unwrap().eval(&view).unwrap() > 0.0);
        check_forms(&p, &s);
    }

    #[test]
    fn matching_respects_capacities() {
        let (_, s) = setup(&blown_k4_lp(), &profile());
        let root = s.h.root;
        let mut total = 0.0;
        for &c in &s.h.nodes[root].children {
            let up = Graph::weight(&s.x, &s.h.nodes[c].up);
            let got: f64 = s.matching.iter().filter(|((_, u), _)| *u == c).map(|(_, m)| m).sum();
            assert!(got <= 2.0 * up / (1.0 - s.k.eps_b) + 1e-9);
            total += got;
        }
        let good: f64 = (0..s.h.bundles.len())
            .filter(|&b| s.p22[b].is_some_and(|p| p >= s.k.p))
            .map(|b| s.h.bundles[b].x)
            .sum();
        assert!(total <= 2.0 * (1.0 + s.k.alpha) * good / (1.0 - s.k.eps_b) + 1e-9);
    }
}
