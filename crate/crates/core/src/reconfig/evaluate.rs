use serde::{Deserialize, Serialize};

use super::{ObjectiveTerms, ObjectiveWeights, ReconfigSolution};
use crate::acpf::{solve_acpf, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::network::{build_tree, Network};

/// Exact re-evaluation of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AcEvaluation {
    Converged {
        objective: f64,
        terms: ObjectiveTerms,
        loss_kw: f64,
        /// Mean voltage magnitude over all buses.
        v_avg: f64,
        v_min: f64,
    },
    /// The AC power flow has no solution for this configuration.
    NotApplicable { reason: String },
}

impl AcEvaluation {
    pub fn loss_kw(&self) -> Option<f64> {
        match self {
            AcEvaluation::Converged { loss_kw, .. } => Some(*loss_kw),
            AcEvaluation::NotApplicable { .. } => None,
        }
    }

    pub fn objective(&self) -> Option<f64> {
        match self {
            AcEvaluation::Converged { objective, .. } => Some(*objective),
            AcEvaluation::NotApplicable { .. } => None,
        }
    }
}

/// Runs the AC power flow on the solution's topology with compensator
/// outputs applied as fixed injections and recomputes the objective from
/// exact voltages and flows.
pub fn evaluate_with_acpf(
    network: &Network<f64>,
    solution: &ReconfigSolution,
    weights: ObjectiveWeights,
) -> Result<AcEvaluation> {
    if solution.closed.len() != network.n_branches() {
        return Err(Error::Validation("solution does not match the network's branches".into()));
    }
    let topo = build_tree(network, &solution.closed)?;
    let mut fixed = Vec::with_capacity(solution.svc_setpoints.len());
    for sp in &solution.svc_setpoints {
        let i = network
            .bus_index(sp.bus)
            .ok_or_else(|| Error::Validation(format!("unknown compensator bus {}", sp.bus)))?;
        fixed.push((i, sp.q));
    }
    let exact_net = network.with_fixed_svc(&fixed);
    let ac = match solve_acpf(&exact_net, &topo, DEFAULT_TOL, DEFAULT_MAX_ITER) {
        Ok(ac) => ac,
        Err(e @ (Error::NonConvergent { .. } | Error::Diverged { .. })) => {
            return Ok(AcEvaluation::NotApplicable { reason: e.to_string() });
        }
        Err(e) => return Err(e),
    };
    let normal = network.normal_closed();
    let mut terms = ObjectiveTerms::default();
    for (l, br) in network.branches().iter().enumerate() {
        if let Some(s) = topo.sending_bus(l) {
            let v = ac.v[s];
            terms.loss +=
                weights.alpha * network.base_mva() * br.r * (ac.p_flow[l].powi(2) + ac.q_flow[l].powi(2)) / (v * v);
        }
        if br.switchable && solution.closed[l] != normal[l] {
            terms.switching += weights.beta;
        }
    }
    terms.deviation = ac.v.iter().map(|&v| weights.gamma * (v - 1.0).powi(2)).sum();
    let n = network.n_buses() as f64;
    Ok(AcEvaluation::Converged {
        objective: terms.total(),
        terms,
        loss_kw: ac.loss_total * network.base_mva() * 1000.0,
        v_avg: ac.v.iter().sum::<f64>() / n,
        v_min: ac.min_voltage(),
    })
}
