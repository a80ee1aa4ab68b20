//! Method of conditional expectations over the edges of `G`.

use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::degree::DegreeCase;
use crate::error::{Error, Result};
use crate::graph::EdgeId;
use crate::instance::SupportGraph;
use crate::linform::LinearForm;
use crate::sslack::SSlack;
use crate::sstar::SStar;
use crate::treedist::{Conditioned, TreeDistribution};

/// Branches with conditional probability below this are never entered.
pub const MIN_BRANCH_PROB: f64 = 1e-12;
pub const MONOTONE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Degree,
    General,
}

/// `𝔼[c(T) | Set] + 𝔼[rest | Set] + constant`.
#[derive(Clone, Debug)]
pub struct Objective {
    pub mode: Mode,
    pub tree_cost: Vec<f64>,
    pub rest: LinearForm,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub tree: f64,
    pub rest: f64,
    pub total: f64,
}

impl Objective {
    /// `𝔼[c(T) + c(m) | Set]`.
    pub fn degree(dc: &DegreeCase) -> Objective {
        Objective {
            mode: Mode::Degree,
            tree_cost: dc.cost.clone(),
            rest: dc.exp_c_m(),
        }
    }

    /// `𝔼[c(T) | Set] + Σ_e (𝔼_{c(s*)}(e) + 𝔼_{c(s)}(e)) + c(x)/2`.
    pub fn general(sg: &SupportGraph, k: &Constants, sstar: &SStar, s: &SSlack) -> Objective {
        let n = sg.g.n();
        let mut rest = LinearForm::constant(n, 0.5 * sg.lp_cost());
        for e in 0..sg.m() {
            rest.add(&sstar.exp_c_sstar(&sg.contracted, k, e, sg.x[e], sg.cost[e]), 1.0);
            rest.add(&s.exp_c_s(e), 1.0);
        }
        Objective {
            mode: Mode::General,
            tree_cost: sg.cost.clone(),
            rest,
        }
    }

    pub fn components(&self, view: &Conditioned<'_>) -> Result<Components> {
        let marg = view.marginals_fast();
        let tree = self.tree_cost.iter().zip(&marg).map(|(c, p)| c * p).sum::<f64>();
        let rest = self.rest.eval(view)?;
        Ok(Components { tree, rest, total: tree + rest })
    }

    pub fn value(&self, view: &Conditioned<'_>) -> Result<f64> {
        Ok(self.components(view)?.total)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Step {
    pub edge: EdgeId,
    /// `S⁺`, absent when the 1-branch is empty.
    pub plus: Option<f64>,
    pub minus: Option<f64>,
    pub choice: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Trace {
    pub initial: f64,
    pub steps: Vec<Step>,
    pub final_value: f64,
    /// Steps whose chosen value exceeds the previous one by more than the tolerance.
    pub increases: Vec<EdgeId>,
}

impl Trace {
    pub fn is_monotone(&self) -> bool {
        self.increases.is_empty()
    }
}

/// Fix every free edge in ascending id order, keeping the branch with the
/// smaller conditional objective (ties to the 0-branch).
pub fn derandomize<F>(dist: &TreeDistribution, objective: F) -> Result<(Vec<EdgeId>, Trace)>
where
    F: Fn(&Conditioned<'_>) -> Result<f64> + Sync,
{
    let mut view = dist.view();
    let mut current = objective(&view)?;
    let mut trace = Trace { initial: current, ..Trace::default() };
    for e in 0..dist.graph().m() {
        if view.forced(e).is_some() {
            continue;
        }
        let p1 = view.marginal(e);
        let branch = |value: bool, prob: f64| -> Result<Option<(Conditioned<'_>, f64)>> {
            if prob < MIN_BRANCH_PROB {
                return Ok(None);
            }
            let next = view.extend(&[(e, value)])?;
            let v = objective(&next)?;
            Ok(Some((next, v)))
        };
        let (plus, minus) = rayon::join(|| branch(true, p1), || branch(false, 1.0 - p1));
        let (plus, minus) = (plus?, minus?);
        let step_plus = plus.as_ref().map(|b| b.1);
        let step_minus = minus.as_ref().map(|b| b.1);
        let (choice, next) = match (plus, minus) {
            (Some(p), Some(m)) => {
                if p.1 < m.1 {
                    (true, p)
                } else {
                    (false, m)
                }
            }
            (Some(p), None) => (true, p),
            (None, Some(m)) => (false, m),
            (None, None) => return Err(Error::Structure(format!("both branches of edge {e} are empty"))),
        };
        if next.1 > current + MONOTONE_TOL {
            trace.increases.push(e);
        }
        trace.steps.push(Step { edge: e, plus: step_plus, minus: step_minus, choice });
        view = next.0;
        current = next.1;
    }
    trace.final_value = current;
    let tree: Vec<EdgeId> = (0..dist.graph().m()).filter(|&e| view.forced(e) == Some(true)).collect();
    if !dist.graph().is_spanning_tree(&tree) {
        return Err(Error::Structure("fixed edges do not form a spanning tree".into()));
    }
    Ok((tree, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::DegreeConstants;
    use crate::fixtures::{complete_lp, prepare_on_circle};
    use crate::graph::Graph;

    #[test]
    fn triangle_tree_cost_reaches_minimum() {
        let g = Graph::from_pairs(3, &[(0, 1), (1, 2), (0, 2)]);
        let dist = TreeDistribution::from_lambda(g, vec![1.0; 3]).unwrap();
        let cost = [1.0, 2.0, 3.0];
        let obj = |v: &Conditioned<'_>| -> Result<f64> { Ok((0..3).map(|e| cost[e] * v.marginal(e)).sum()) };
        let (tree, trace) = derandomize(&dist, obj).unwrap();
        assert_eq!(tree, vec![0, 1]);
        assert!((trace.final_value - 3.0).abs() < 1e-12);
        assert!(trace.is_monotone());
        assert!((trace.initial - 4.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_keeps_its_tree() {
        let g = Graph::from_pairs(3, &[(0, 1), (1, 2)]);
        let dist = TreeDistribution::from_lambda(g, vec![1.0; 2]).unwrap();
        let (tree, trace) = derandomize(&dist, |_| Ok(7.0)).unwrap();
        assert_eq!(tree, vec![0, 1]);
        assert!(trace.steps.iter().all(|s| s.choice && s.minus.is_none()));
        assert_eq!(trace.final_value, 7.0);
    }

    #[test]
    fn degree_mode_is_monotone() {
        let p = prepare_on_circle(&complete_lp(5)).unwrap();
        let dc = DegreeCase::build(&p.sg, &DegreeConstants { p: 0.05, eta: 0.5 }, &p.dist).unwrap();
        let obj = Objective::degree(&dc);
        let (tree, trace) = derandomize(&p.dist, |v| obj.value(v)).unwrap();
        assert!(trace.is_monotone());
        assert!(trace.final_value <= trace.initial + 1e-6);
        let c_t: f64 = tree.iter().map(|&e| p.sg.cost[e]).sum();
        let m = dc.m_vector(&tree);
        let c_m: f64 = m.iter().zip(&dc.cost).map(|(a, b)| a * b).sum();
        assert!((c_t + c_m - trace.final_value).abs() < 1e-9);
    }
}
