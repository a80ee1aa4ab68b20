//! Small feasible LP solutions used by tests, benches and the CLI demos.

use crate::error::Result;
use crate::graph::Edge;
use crate::instance::{split_vertex, support_graph, LpSolution, MetricInstance, Origin, SupportGraph};
use crate::treedist::{fit_max_entropy, FitOptions, TreeDistribution};

pub fn lp(n: usize, pairs: &[(usize, usize)], x: &[f64]) -> LpSolution {
    LpSolution {
        n,
        edges: pairs.iter().map(|&(u, v)| Edge::new(u, v)).collect(),
        x: x.to_vec(),
        exact: None,
        e0: None,
        origin: Origin::Ingested,
        city_of: (0..n).collect(),
    }
}

/// `x = 1` on the cycle `0, 1, ..., n-1`.
pub fn cycle_lp(n: usize) -> LpSolution {
    let pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    lp(n, &pairs, &vec![1.0; n])
}

/// `x = 2/(n-1)` on every edge of `K_n`.
pub fn complete_lp(n: usize) -> LpSolution {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    let x = vec![2.0 / (n as f64 - 1.0); pairs.len()];
    lp(n, &pairs, &x)
}

/// The cycle `0, 1, ..., n-1` at `1 - delta` with the remaining value spread
/// evenly over the chords, so every arc is a near-minimum cut that is not tight.
pub fn perturbed_ring_lp(n: usize, delta: f64) -> LpSolution {
    let mut pairs = Vec::new();
    let mut x = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
            let ring = j == i + 1 || (i == 0 && j == n - 1);
            x.push(if ring { 1.0 - delta } else { 2.0 * delta / (n as f64 - 3.0) });
        }
    }
    lp(n, &pairs, &x)
}

/// A ring of blocks `[0], [1,2], [3], [4,5], [6]`; consecutive blocks share
/// total value one and the two-vertex blocks have an internal unit edge.
/// Arcs of blocks are minimum cuts; with vertex 0 as the root the arc
/// `{3, 4, 5}` is crossed on both sides.
pub fn necklace_lp() -> LpSolution {
    let pairs = [
        (0, 1),
        (0, 2),
        (1, 2),
        (1, 3),
        (2, 3),
        (3, 4),
        (3, 5),
        (4, 5),
        (4, 6),
        (5, 6),
        (6, 0),
    ];
    let x = [0.5, 0.5, 1.0, 0.5, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 1.0];
    lp(7, &pairs, &x)
}

/// `K4` on `0..4` at one half, with vertex pair `{4, 5}` joined by a unit
/// edge; 4 sees 0 and 1, 5 sees 2 and 3.
pub fn blown_k4_lp() -> LpSolution {
    let pairs = [
        (0, 1),
        (0, 2),
        (0, 3),
        (1, 2),
        (1, 3),
        (2, 3),
        (4, 5),
        (0, 4),
        (1, 4),
        (2, 5),
        (3, 5),
    ];
    let x = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5, 0.5];
    lp(6, &pairs, &x)
}

/// The Petersen graph at two thirds: outer 5-cycle, inner pentagram, spokes.
pub fn petersen_lp() -> LpSolution {
    let mut pairs = Vec::new();
    for i in 0..5 {
        pairs.push((i, (i + 1) % 5));
        pairs.push((5 + i, 5 + (i + 2) % 5));
        pairs.push((i, 5 + i));
    }
    lp(10, &pairs, &[2.0 / 3.0; 15])
}

/// Cities on a slightly perturbed circle.
pub fn circle_instance(n: usize) -> MetricInstance {
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            let r = 10.0 + (i % 3) as f64 * 0.5;
            (r * t.cos(), r * t.sin())
        })
        .collect();
    MetricInstance::from_points(&format!("circle{n}"), &pts, false)
}

/// An LP solution split at vertex 0, its support graph and the fitted
/// max-entropy distribution.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub inst: MetricInstance,
    pub sol: LpSolution,
    pub sg: SupportGraph,
    pub dist: TreeDistribution,
}

pub fn prepare(raw: &LpSolution, inst: &MetricInstance) -> Result<Prepared> {
    let sol = split_vertex(raw)?;
    let sg = support_graph(&sol, inst)?;
    let fit = fit_max_entropy(&sg.g, &sg.x, &FitOptions::default())?;
    Ok(Prepared {
        inst: inst.clone(),
        sol,
        sg,
        dist: fit.dist,
    })
}

/// [`prepare`] on a circle instance with one city per LP vertex.
pub fn prepare_on_circle(raw: &LpSolution) -> Result<Prepared> {
    prepare(raw, &circle_instance(raw.n))
}
