//! Metric instances, LP solutions, the vertex split and the support graph.

use std::fmt::Write as _;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{bit, full_set, Edge, EdgeId, Graph, VSet};

pub const METRIC_TOL: f64 = 1e-9;
/// Exhaustive cut checks are used up to this many vertices.
pub const EXHAUSTIVE_CUT_LIMIT: usize = 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricInstance {
    pub name: String,
    pub n: usize,
    pub cost: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IngestOptions {
    /// Round EUC_2D distances to the nearest integer as TSPLIB does.
    pub round_euc2d: bool,
}

#[derive(Clone, Debug)]
pub struct Ingested {
    pub instance: MetricInstance,
    pub warnings: Vec<String>,
}

impl MetricInstance {
    pub fn from_matrix(name: &str, n: usize, cost: Vec<f64>) -> Result<Self> {
        if cost.len() != n * n {
            return Err(Error::Parse(format!("expected {} entries, got {}", n * n, cost.len())));
        }
        for i in 0..n {
            if cost[i * n + i].abs() > METRIC_TOL {
                return Err(Error::Parse(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let c = cost[i * n + j];
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::Parse(format!("invalid cost at ({i}, {j})")));
                }
                if (c - cost[j * n + i]).abs() > METRIC_TOL {
                    return Err(Error::Asymmetric(i, j));
                }
            }
        }
        Ok(MetricInstance {
            name: name.to_string(),
            n,
            cost,
        })
    }

    pub fn from_points(name: &str, pts: &[(f64, f64)], round: bool) -> Self {
        let n = pts.len();
        let mut cost = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let d = ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
                cost[i * n + j] = if round { (d + 0.5).floor() } else { d };
            }
        }
        MetricInstance {
            name: name.to_string(),
            n,
            cost,
        }
    }

    pub fn c(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j]
    }

    /// First triple violating the triangle inequality beyond tolerance.
    pub fn triangle_violation(&self) -> Option<(usize, usize, usize)> {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if self.c(i, j) > self.c(i, k) + self.c(k, j) + METRIC_TOL {
                        return Some((i, j, k));
                    }
                }
            }
        }
        None
    }

    /// Shortest-path closure of the costs.
    pub fn metric_completion(&self) -> MetricInstance {
        let n = self.n;
        let mut d = self.cost.clone();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i * n + k] + d[k * n + j];
                    if via < d[i * n + j] {
                        d[i * n + j] = via;
                    }
                }
            }
        }
        MetricInstance {
            name: self.name.clone(),
            n,
            cost: d,
        }
    }

    pub fn tour_cost(&self, order: &[usize]) -> f64 {
        (0..order.len())
            .map(|i| self.c(order[i], order[(i + 1) % order.len()]))
            .sum()
    }
}

pub fn ingest_instance(path: &Path, opts: IngestOptions) -> Result<Ingested> {
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_instance(&text, &name, opts)
}

/// TSPLIB (EXPLICIT FULL_MATRIX or EUC_2D) or a plain matrix: `n` followed
/// by `n*n` numbers.
pub fn parse_instance(text: &str, default_name: &str, opts: IngestOptions) -> Result<Ingested> {
    let looks_tsplib = text
        .lines()
        .any(|l| l.trim_start().to_ascii_uppercase().starts_with("DIMENSION"));
    let instance = if looks_tsplib {
        parse_tsplib(text, default_name, opts)?
    } else {
        let nums = numbers(text)?;
        let n = *nums.first().ok_or_else(|| Error::Parse("empty input".into()))? as usize;
        MetricInstance::from_matrix(default_name, n, nums[1..].to_vec())?
    };
    let mut warnings = Vec::new();
    if let Some((i, j, k)) = instance.triangle_violation() {
        warnings.push(format!(
            "triangle inequality violated: c({i},{j}) > c({i},{k}) + c({k},{j}); metric completion will be used"
        ));
    }
    Ok(Ingested { instance, warnings })
}

fn numbers(text: &str) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Parse(format!("not a number: {t}")))
        })
        .collect()
}

fn parse_tsplib(text: &str, default_name: &str, opts: IngestOptions) -> Result<MetricInstance> {
    let mut name = default_name.to_string();
    let mut dim = None;
    let mut wtype = String::new();
    let mut wformat = String::from("FULL_MATRIX");
    let mut lines = text.lines();
    let mut section = None;
    for line in lines.by_ref() {
        let l = line.trim();
        if l.is_empty() {
            continue;
        }
        let upper = l.to_ascii_uppercase();
        if upper.starts_with("EDGE_WEIGHT_SECTION") || upper.starts_with("NODE_COORD_SECTION") {
            section = Some(upper);
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            let key = k.trim().to_ascii_uppercase();
            let val = v.trim().to_string();
            match key.as_str() {
                "NAME" => name = val,
                "DIMENSION" => {
                    dim = Some(
                        val.parse::<usize>()
                            .map_err(|_| Error::Parse(format!("bad DIMENSION {val}")))?,
                    )
                }
                "EDGE_WEIGHT_TYPE" => wtype = val.to_ascii_uppercase(),
                "EDGE_WEIGHT_FORMAT" => wformat = val.to_ascii_uppercase(),
                _ => {}
            }
        }
    }
    let n = dim.ok_or_else(|| Error::Parse("missing DIMENSION".into()))?;
    let section = section.ok_or_else(|| Error::Parse("missing data section".into()))?;
    let body: String = lines
        .take_while(|l| !l.trim().eq_ignore_ascii_case("EOF"))
        .collect::<Vec<_>>()
        .join("\n");
    let nums = numbers(&body)?;
    match (wtype.as_str(), section.starts_with("EDGE_WEIGHT")) {
        ("EXPLICIT", true) => {
            if wformat != "FULL_MATRIX" {
                return Err(Error::Parse(format!("unsupported EDGE_WEIGHT_FORMAT {wformat}")));
            }
            if nums.len() < n * n {
                return Err(Error::Parse("truncated EDGE_WEIGHT_SECTION".into()));
            }
            MetricInstance::from_matrix(&name, n, nums[..n * n].to_vec())
        }
        ("EUC_2D", false) => {
            if nums.len() < 3 * n {
                return Err(Error::Parse("truncated NODE_COORD_SECTION".into()));
            }
            let pts: Vec<(f64, f64)> = (0..n).map(|i| (nums[3 * i + 1], nums[3 * i + 2])).collect();
            Ok(MetricInstance::from_points(&name, &pts, opts.round_euc2d))
        }
        _ => Err(Error::Parse(format!("unsupported EDGE_WEIGHT_TYPE {wtype}"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Ingested,
    SplitConstructed,
    HkSolved,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LpSolution {
    pub n: usize,
    pub edges: Vec<Edge>,
    pub x: Vec<f64>,
    #[serde(skip)]
    pub exact: Option<Vec<BigRational>>,
    pub e0: Option<EdgeId>,
    pub origin: Origin,
    /// City of each LP vertex; the two halves of a split vertex share one.
    pub city_of: Vec<usize>,
}

fn parse_rational(t: &str) -> Option<BigRational> {
    let (neg, body) = match t.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, t),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits = format!("{int}{frac}");
    let num: BigInt = digits.parse().ok()?;
    let den = BigInt::from(10u32).pow(frac.len() as u32);
    let r = BigRational::new(num, den);
    Some(if neg { -r } else { r })
}

impl LpSolution {
    pub fn graph(&self) -> Graph {
        Graph::new(self.n, self.edges.clone())
    }

    /// `n m` then `m` lines `u v num den` or `u v decimal`, `*` marks e0.
    pub fn parse(text: &str) -> Result<LpSolution> {
        let mut lines = text
            .lines()
            .map(|l| l.trim())
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty LP file".into()))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header {header}"))))
            .collect::<Result<_>>()?;
        if h.len() != 2 {
            return Err(Error::Parse("header must be `n m`".into()));
        }
        let (n, m) = (h[0], h[1]);
        let mut edges = Vec::with_capacity(m);
        let mut exact = Vec::with_capacity(m);
        let mut e0 = None;
        for _ in 0..m {
            let line = lines.next().ok_or_else(|| Error::Parse("missing edge lines".into()))?;
            let mut toks: Vec<&str> = line.split_whitespace().collect();
            if toks.last() == Some(&"*") {
                toks.pop();
                if e0.is_some() {
                    return Err(Error::Parse("more than one e0".into()));
                }
                e0 = Some(edges.len());
            } else if let Some(t) = toks.last_mut() {
                if let Some(s) = t.strip_suffix('*') {
                    *t = s;
                    e0 = Some(edges.len());
                }
            }
            let bad = || Error::Parse(format!("bad edge line: {line}"));
            if toks.len() < 3 {
                return Err(bad());
            }
            let u: usize = toks[0].parse().map_err(|_| bad())?;
            let v: usize = toks[1].parse().map_err(|_| bad())?;
            if u >= n || v >= n || u == v {
                return Err(bad());
            }
            let x = if toks.len() == 4 {
                let a: BigInt = toks[2].parse().map_err(|_| bad())?;
                let b: BigInt = toks[3].parse().map_err(|_| bad())?;
                if b.is_zero() {
                    return Err(bad());
                }
                BigRational::new(a, b)
            } else {
                parse_rational(toks[2]).ok_or_else(bad)?
            };
            edges.push(Edge::new(u, v));
            exact.push(x);
        }
        let x = exact.iter().map(|r| r.to_f64().unwrap_or(f64::NAN)).collect();
        Ok(LpSolution {
            n,
            edges,
            x,
            exact: Some(exact),
            e0,
            origin: Origin::Ingested,
            city_of: (0..n).collect(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.edges.len());
        for (i, e) in self.edges.iter().enumerate() {
            let val = match &self.exact {
                Some(ex) => format!("{} {}", ex[i].numer(), ex[i].denom()),
                None => format!("{}", self.x[i]),
            };
            let star = if Some(i) == self.e0 { " *" } else { "" };
            let _ = writeln!(s, "{} {} {}{}", e.u, e.v, val, star);
        }
        s
    }

    /// Attach the vertex-to-city map for an instance. An LP with one more
    /// vertex than the instance has cities must flag e0 on its last vertex,
    /// which becomes a copy of the other endpoint.
    pub fn bind_cities(&mut self, cities: usize) -> Result<()> {
        if self.n == cities {
            self.city_of = (0..cities).collect();
            return Ok(());
        }
        match self.e0 {
            Some(e) if self.n == cities + 1 => {
                let ed = self.edges[e];
                let (lo, hi) = (ed.u.min(ed.v), ed.u.max(ed.v));
                if hi != self.n - 1 {
                    return Err(Error::Parse("e0 must end at the last vertex".into()));
                }
                self.city_of = (0..self.n).map(|v| if v == hi { lo } else { v }).collect();
                Ok(())
            }
            _ => Err(Error::Parse(format!(
                "LP has {} vertices but the instance has {cities} cities",
                self.n
            ))),
        }
    }

    pub fn cost(&self, inst: &MetricInstance) -> f64 {
        self.edges
            .iter()
            .zip(&self.x)
            .map(|(e, x)| x * inst.c(self.city_of[e.u], self.city_of[e.v]))
            .sum()
    }

    /// Degree, cut and e0 invariants of the subtour LP.
    pub fn validate(&self) -> Result<()> {
        let g = self.graph();
        for v in 0..self.n {
            let d = g.cut_value(&self.x, bit(v));
            if (d - 2.0).abs() > 1e-9 {
                return Err(Error::Infeasible(format!("x(δ({v})) = {d}")));
            }
        }
        if let Some(e) = self.e0 {
            if (self.x[e] - 1.0).abs() > 1e-12 {
                return Err(Error::Infeasible("x(e0) != 1".into()));
            }
        }
        let (val, s) = min_cut(&g, &self.x);
        if val < 2.0 - 1e-9 {
            return Err(Error::Infeasible(format!("cut {s:#b} has value {val}")));
        }
        Ok(())
    }
}

/// Global minimum cut `(value, side)` over nontrivial sets; exhaustive for
/// small graphs, Stoer–Wagner otherwise.
pub fn min_cut(g: &Graph, x: &[f64]) -> (f64, VSet) {
    let n = g.n();
    if n < 2 {
        return (f64::INFINITY, 0);
    }
    if n <= EXHAUSTIVE_CUT_LIMIT + 1 {
        let mut best = (f64::INFINITY, 0);
        let all = full_set(n);
        for s in (2..all).step_by(2) {
            let v = g.cut_value(x, s);
            if v < best.0 {
                best = (v, s);
            }
        }
        return best;
    }
    stoer_wagner(g, x)
}

fn stoer_wagner(g: &Graph, x: &[f64]) -> (f64, VSet) {
    let n = g.n();
    let mut w = vec![vec![0.0; n]; n];
    for (e, ed) in g.edges().iter().enumerate() {
        if !ed.is_loop() {
            w[ed.u][ed.v] += x[e];
            w[ed.v][ed.u] += x[e];
        }
    }
    let mut members: Vec<VSet> = (0..n).map(bit).collect();
    let mut alive: Vec<usize> = (0..n).collect();
    let mut best = (f64::INFINITY, 0);
    while alive.len() > 1 {
        let mut used = vec![false; n];
        let mut conn = vec![0.0; n];
        let mut prev = alive[0];
        let mut last = alive[0];
        for step in 0..alive.len() {
            let next = *alive
                .iter()
                .filter(|&&v| !used[v])
                .max_by(|&&a, &&b| conn[a].partial_cmp(&conn[b]).unwrap())
                .unwrap();
            used[next] = true;
            if step == alive.len() - 1 {
                if conn[next] < best.0 {
                    best = (conn[next], members[next]);
                }
                prev = last;
                last = next;
                break;
            }
            prev = last;
            last = next;
            for &v in &alive {
                conn[v] += w[next][v];
            }
        }
        members[prev] |= members[last];
        for &v in &alive {
            w[prev][v] += w[last][v];
            w[v][prev] = w[prev][v];
        }
        alive.retain(|&v| v != last);
    }
    best
}

/// Split the lowest-index vertex into `u0 = 0` and a new last vertex `v0`.
pub fn split_vertex(raw: &LpSolution) -> Result<LpSolution> {
    if raw.e0.is_some() {
        return Err(Error::Infeasible("solution already has e0".into()));
    }
    raw.validate()?;
    let u = 0;
    let v0 = raw.n;
    let mut edges = Vec::new();
    let mut x = Vec::new();
    let mut exact = raw.exact.as_ref().map(|_| Vec::new());
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    for (i, e) in raw.edges.iter().enumerate() {
        if e.u == u || e.v == u {
            let w = e.other(u);
            edges.push(Edge::new(u, w));
            edges.push(Edge::new(v0, w));
            x.push(raw.x[i] / 2.0);
            x.push(raw.x[i] / 2.0);
            if let (Some(out), Some(src)) = (exact.as_mut(), raw.exact.as_ref()) {
                out.push(&src[i] * &half);
                out.push(&src[i] * &half);
            }
        } else {
            edges.push(*e);
            x.push(raw.x[i]);
            if let (Some(out), Some(src)) = (exact.as_mut(), raw.exact.as_ref()) {
                out.push(src[i].clone());
            }
        }
    }
    edges.push(Edge::new(u, v0));
    x.push(1.0);
    if let Some(out) = exact.as_mut() {
        out.push(BigRational::from_integer(BigInt::from(1)));
    }
    let mut city_of = raw.city_of.clone();
    city_of.push(raw.city_of[u]);
    let sol = LpSolution {
        n: raw.n + 1,
        e0: Some(edges.len() - 1),
        edges,
        x,
        exact,
        origin: Origin::SplitConstructed,
        city_of,
    };
    sol.validate()?;
    Ok(sol)
}

/// `G = (V, E, x)` without e0, plus `G/e0` sharing its edge ids.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupportGraph {
    pub g: Graph,
    pub x: Vec<f64>,
    pub cost: Vec<f64>,
    /// Index of each support edge in the LP solution.
    pub lp_edge: Vec<EdgeId>,
    pub u0: usize,
    pub v0: usize,
    pub contracted: Graph,
    pub to_contracted: Vec<usize>,
    pub root: usize,
    pub city_of: Vec<usize>,
    pub e0_cost: f64,
}

pub fn support_graph(sol: &LpSolution, inst: &MetricInstance) -> Result<SupportGraph> {
    let e0 = sol
        .e0
        .ok_or_else(|| Error::Infeasible("LP solution has no e0; split it first".into()))?;
    let ed0 = sol.edges[e0];
    let (u0, v0) = (ed0.u.min(ed0.v), ed0.u.max(ed0.v));
    let mut edges = Vec::new();
    let mut x = Vec::new();
    let mut cost = Vec::new();
    let mut lp_edge = Vec::new();
    for (i, e) in sol.edges.iter().enumerate() {
        if i == e0 || sol.x[i] <= 0.0 {
            continue;
        }
        edges.push(*e);
        x.push(sol.x[i]);
        cost.push(inst.c(sol.city_of[e.u], sol.city_of[e.v]));
        lp_edge.push(i);
    }
    let g = Graph::new(sol.n, edges);
    let to_contracted: Vec<usize> = (0..sol.n)
        .map(|w| match w.cmp(&v0) {
            std::cmp::Ordering::Less => w,
            std::cmp::Ordering::Equal => u0,
            std::cmp::Ordering::Greater => w - 1,
        })
        .collect();
    let contracted = g.quotient(&to_contracted, sol.n - 1);
    Ok(SupportGraph {
        e0_cost: inst.c(sol.city_of[u0], sol.city_of[v0]),
        g,
        x,
        cost,
        lp_edge,
        u0,
        v0,
        contracted,
        root: to_contracted[u0],
        to_contracted,
        city_of: sol.city_of.clone(),
    })
}

impl SupportGraph {
    pub fn m(&self) -> usize {
        self.g.m()
    }

    /// `c(x)` including e0.
    pub fn lp_cost(&self) -> f64 {
        self.x.iter().zip(&self.cost).map(|(a, b)| a * b).sum::<f64>() + self.e0_cost
    }

    /// Lift a vertex set of `G/e0` to `G`, expanding the root into u0, v0.
    pub fn lift(&self, s: VSet) -> VSet {
        let mut out = 0;
        for w in 0..self.g.n() {
            if s & bit(self.to_contracted[w]) != 0 {
                out |= bit(w);
            }
        }
        out
    }

    /// Spanning-tree polytope membership, exhaustively for small graphs.
    pub fn check_tree_polytope(&self) -> Result<()> {
        let n = self.g.n();
        let total: f64 = self.x.iter().sum();
        if (total - (n as f64 - 1.0)).abs() > 1e-9 {
            return Err(Error::Infeasible(format!("x(E) = {total}, |V| - 1 = {}", n - 1)));
        }
        if n <= EXHAUSTIVE_CUT_LIMIT + 2 {
            for s in 1..full_set(n) {
                let inside = Graph::weight(&self.x, &self.g.inside(s));
                if inside > s.count_ones() as f64 - 1.0 + 1e-9 {
                    return Err(Error::Infeasible(format!("x(E(S)) too large on {s:#b}")));
                }
            }
        }
        Ok(())
    }
}
