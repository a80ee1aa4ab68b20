//! End-to-end solve: split, fit, preprocess, derandomize, assemble.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{Constants, DegreeConstants};
use crate::cuts::CutStructure;
use crate::degree::{check_degree_cut_case, DegreeCase};
use crate::derandomize::{derandomize, Mode, Objective, Trace};
use crate::error::{Error, Result};
use crate::graph::EdgeId;
use crate::heldkarp::solve_held_karp;
use crate::hierarchy::Hierarchy;
use crate::instance::{split_vertex, support_graph, LpSolution, MetricInstance, SupportGraph};
use crate::sslack::SSlack;
use crate::sstar::SStar;
use crate::tour::{assemble, christofides, TourResult};
use crate::treedist::{fit_max_entropy, FitOptions, TreeDistribution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    Auto,
    Degree,
    General,
    ChristofidesBaseline,
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    pub mode: SolveMode,
    pub constants: Constants,
    pub degree: DegreeConstants,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveReport {
    pub mode: SolveMode,
    pub order: Vec<usize>,
    pub cost: f64,
    pub tree_cost: f64,
    pub matching_cost: f64,
    pub lp_cost: f64,
    pub initial_objective: Option<f64>,
    pub final_objective: Option<f64>,
    pub trace: Option<Trace>,
    pub violations: Vec<String>,
}

/// The split support graph and its fitted distribution.
#[derive(Clone, Debug)]
pub struct Fitted {
    pub sg: SupportGraph,
    pub dist: TreeDistribution,
    pub max_rel_err: f64,
}

/// Split `lp` if it has no e0 yet, build `G` and fit λ.
pub fn fit(lp: &LpSolution, inst: &MetricInstance) -> Result<Fitted> {
    let sol = if lp.e0.is_some() { lp.clone() } else { split_vertex(lp)? };
    let sg = support_graph(&sol, inst)?;
    let rep = fit_max_entropy(&sg.g, &sg.x, &FitOptions::default())?;
    Ok(Fitted {
        sg,
        dist: rep.dist,
        max_rel_err: rep.max_rel_err,
    })
}

/// The hierarchy-side tables for general mode.
#[derive(Clone, Debug)]
pub struct GeneralTables {
    pub cuts: CutStructure,
    pub sstar: SStar,
    pub hierarchy: Hierarchy,
    pub sslack: SSlack,
}

impl GeneralTables {
    pub fn build(f: &Fitted, k: &Constants) -> Result<GeneralTables> {
        let g = &f.sg.contracted;
        let n = f.sg.g.n();
        let cuts = CutStructure::build(g, &f.sg.x, f.sg.root, k.eta)?;
        let sstar = SStar::build(g, &f.sg.x, n, &cuts)?;
        let hierarchy = Hierarchy::build(g, &f.sg.x, &cuts, k)?;
        let sslack = SSlack::build(g, &f.sg.x, &f.sg.cost, n, &hierarchy, k, &f.dist)?;
        Ok(GeneralTables { cuts, sstar, hierarchy, sslack })
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = self.sstar.violations();
        v.extend(self.sslack.violations.iter().cloned());
        v
    }
}

pub fn resolve_mode(f: &Fitted, cfg: &SolveConfig) -> Result<SolveMode> {
    Ok(match cfg.mode {
        SolveMode::Auto => {
            if check_degree_cut_case(&f.sg.contracted, &f.sg.x, cfg.degree.eta)? {
                SolveMode::Degree
            } else {
                SolveMode::General
            }
        }
        m => m,
    })
}

pub fn lp_or_held_karp(lp: Option<LpSolution>, inst: &MetricInstance) -> Result<LpSolution> {
    match lp {
        Some(mut lp) => {
            if lp.city_of.len() != lp.n {
                lp.bind_cities(inst.n)?;
            }
            Ok(lp)
        }
        None => Ok(solve_held_karp(inst)?.solution),
    }
}

pub fn solve(lp: &LpSolution, inst: &MetricInstance, cfg: &SolveConfig) -> Result<SolveReport> {
    if cfg.mode == SolveMode::ChristofidesBaseline {
        let t = christofides(inst)?;
        return Ok(report(SolveMode::ChristofidesBaseline, t, lp.cost(inst), None, Vec::new()));
    }
    let f = fit(lp, inst)?;
    let mode = resolve_mode(&f, cfg)?;
    let (obj, mut violations) = match mode {
        SolveMode::Degree => {
            if !check_degree_cut_case(&f.sg.contracted, &f.sg.x, cfg.degree.eta)? {
                return Err(Error::Structure(format!(
                    "not a degree-cut instance at eta = {}",
                    cfg.degree.eta
                )));
            }
            let dc = DegreeCase::build(&f.sg, &cfg.degree, &f.dist)?;
            (Objective::degree(&dc), dc.violations)
        }
        _ => {
            let t = GeneralTables::build(&f, &cfg.constants)?;
            (Objective::general(&f.sg, &cfg.constants, &t.sstar, &t.sslack), t.violations())
        }
    };
    let (tree, trace) = derandomize(&f.dist, |v| obj.value(v))?;
    if !trace.is_monotone() {
        violations.push(format!("objective increased at edges {:?}", trace.increases));
    }
    debug_assert_eq!(obj.mode, if mode == SolveMode::Degree { Mode::Degree } else { Mode::General });
    let t = assemble(&f.sg, inst, &tree)?;
    Ok(report(mode, t, f.sg.lp_cost(), Some(trace), violations))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct McCheck {
    pub mode: SolveMode,
    pub samples: usize,
    pub seed: u64,
    /// The objective at `Set = ∅`.
    pub exact: f64,
    pub mean: f64,
    pub std_err: f64,
}

/// Compare the initial objective with the sample mean of its realized value.
pub fn monte_carlo_check(lp: &LpSolution, inst: &MetricInstance, cfg: &SolveConfig, samples: usize, seed: u64) -> Result<McCheck> {
    if samples < 2 {
        return Err(Error::Structure("need at least two samples".into()));
    }
    let f = fit(lp, inst)?;
    let mode = resolve_mode(&f, cfg)?;
    let view = f.dist.view();
    let c_t = |t: &[EdgeId]| t.iter().map(|&e| f.sg.cost[e]).sum::<f64>();
    let (exact, values): (f64, Vec<f64>) = match mode {
        SolveMode::ChristofidesBaseline => {
            return Err(Error::Structure("no objective in christofides-baseline mode".into()))
        }
        SolveMode::Degree => {
            let dc = DegreeCase::build(&f.sg, &cfg.degree, &f.dist)?;
            let exact = Objective::degree(&dc).value(&view)?;
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let values = (0..samples)
                .map(|_| {
                    let t = f.dist.sample_tree_with(&mut r);
                    c_t(&t) + dc.m_vector(&t).iter().zip(&dc.cost).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            (exact, values)
        }
        _ => {
            let k = &cfg.constants;
            let t = GeneralTables::build(&f, k)?;
            let exact = Objective::general(&f.sg, k, &t.sstar, &t.sslack).value(&view)?;
            let (g, x, c) = (&f.sg.contracted, &f.sg.x, &f.sg.cost);
            let half = 0.5 * f.sg.lp_cost();
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let values = (0..samples)
                .map(|_| {
                    let tr = f.dist.sample_tree_with(&mut r);
                    let rest: f64 = (0..f.sg.m())
                        .map(|e| t.sstar.realized(g, k, e, x[e], c[e], &tr) + t.sslack.realized_c_s(&tr, e))
                        .sum();
                    c_t(&tr) + half + rest
                })
                .collect();
            (exact, values)
        }
    };
    let n = samples as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(McCheck {
        mode,
        samples,
        seed,
        exact,
        mean,
        std_err: (var / n).sqrt(),
    })
}

fn report(mode: SolveMode, t: TourResult, lp_cost: f64, trace: Option<Trace>, violations: Vec<String>) -> SolveReport {
    SolveReport {
        mode,
        order: t.order,
        cost: t.tour_cost,
        tree_cost: t.tree_cost,
        matching_cost: t.matching_cost,
        lp_cost,
        initial_objective: trace.as_ref().map(|t| t.initial),
        final_objective: trace.as_ref().map(|t| t.final_value),
        trace,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{blown_k4_lp, circle_instance, complete_lp, cycle_lp};

    fn cfg(mode: SolveMode) -> SolveConfig {
        SolveConfig {
            mode,
            constants: Constants::test().with_eta(0.1),
            degree: DegreeConstants { p: 0.05, eta: 0.5 },
        }
    }

    #[test]
    fn cycle_gives_the_cycle() {
        let inst = circle_instance(6);
        let r = solve(&cycle_lp(6), &inst, &cfg(SolveMode::Auto)).unwrap();
        assert_eq!(r.mode, SolveMode::General);
        assert!((r.cost - r.lp_cost).abs() < 1e-9);
        let mut o = r.order.clone();
        o.sort();
        assert_eq!(o, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn auto_picks_degree_on_complete_graph() {
        let inst = circle_instance(5);
        let r = solve(&complete_lp(5), &inst, &cfg(SolveMode::Auto)).unwrap();
        assert_eq!(r.mode, SolveMode::Degree);
        assert!(r.violations.is_empty());
        assert!(r.cost <= r.tree_cost + r.matching_cost + 1e-9);
        assert!(r.tree_cost + r.matching_cost <= r.initial_objective.unwrap() + 1e-6);
    }

    #[test]
    fn general_mode_is_monotone() {
        let inst = circle_instance(6);
        let r = solve(&blown_k4_lp(), &inst, &cfg(SolveMode::General)).unwrap();
        assert!(r.trace.as_ref().unwrap().is_monotone());
        assert!(r.final_objective.unwrap() <= r.initial_objective.unwrap() + 1e-6);
        assert!(r.cost <= r.tree_cost + r.matching_cost + 1e-9);
    }

    #[test]
    fn monte_carlo_check_agrees() {
        let inst = circle_instance(5);
        let mc = monte_carlo_check(&complete_lp(5), &inst, &cfg(SolveMode::Auto), 4000, 3).unwrap();
        assert_eq!(mc.mode, SolveMode::Degree);
        assert!((mc.mean - mc.exact).abs() <= 4.0 * mc.std_err + 1e-9);
    }

    #[test]
    fn unit_square_from_held_karp() {
        let sq = MetricInstance::from_points("sq", &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], false);
        let lp = lp_or_held_karp(None, &sq).unwrap();
        let r = solve(&lp, &sq, &cfg(SolveMode::Auto)).unwrap();
        assert!((r.cost - 4.0).abs() < 1e-9);
    }
}
