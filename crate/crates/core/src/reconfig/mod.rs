//! Joint network reconfiguration and VAR optimization on the modified
//! DistFlow model, solved exactly by branch-and-bound over the switch
//! states, with exhaustive enumeration as an independent check.

mod bnb;
mod enumerate;
mod evaluate;
mod model;
mod qp;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{build_tree, BusId, Network};

pub use bnb::{solve_miqp, SolveOptions};
pub use enumerate::{candidate_count, enumerate_radial, EnumerationOptions, DEFAULT_ENUMERATION_CAP};
pub use evaluate::{evaluate_with_acpf, AcEvaluation};
pub use model::{build_miqp, overlap_loop_cuts, Constraint, ConstraintGroup, MiqpModel, RowKind, ThermalLimit};
pub use qp::SparseRow;

/// Weights of the loss, switching and voltage-deviation terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    /// Per MWh of loss over a one-hour horizon.
    pub alpha: f64,
    /// Per switching operation relative to the normal configuration.
    pub beta: f64,
    /// On the summed squared deviation of bus voltages from 1 p.u.
    pub gamma: f64,
}

impl ObjectiveWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let w = Self { alpha, beta, gamma };
        w.validate()?;
        Ok(w)
    }

    /// Loss only, scaled so the objective reads in kW.
    pub fn loss_kw() -> Self {
        Self { alpha: 1000.0, beta: 0.0, gamma: 0.0 }
    }

    /// Energy cost at 30 per MWh plus 0.2 per switching operation.
    pub fn operating_cost() -> Self {
        Self { alpha: 30.0, beta: 0.2, gamma: 0.0 }
    }

    /// Voltage deviation with weight 100.
    pub fn voltage_deviation() -> Self {
        Self { alpha: 0.0, beta: 0.0, gamma: 100.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.gamma];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Validation("objective weights must be finite and non-negative".into()));
        }
        if all.iter().all(|&w| w == 0.0) {
            return Err(Error::Validation("at least one objective weight must be positive".into()));
        }
        Ok(())
    }
}

/// Model-building switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiqpOptions {
    /// Add one equality per overlapping loop set fixing its number of open branches.
    pub loop_cuts: bool,
    /// Minimum power factor at the supply point.
    pub power_factor: Option<f64>,
    /// Multiplier on every big-M constant.
    pub big_m_scale: f64,
    /// Violation tolerance for the thermal-limit outer approximation.
    pub thermal_tol: f64,
}

impl Default for MiqpOptions {
    fn default() -> Self {
        Self { loop_cuts: true, power_factor: None, big_m_scale: 1.0, thermal_tol: 1e-8 }
    }
}

impl MiqpOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some(eta) = self.power_factor {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(Error::Validation("power factor limit must lie in (0, 1)".into()));
            }
        }
        if !(self.big_m_scale >= 1.0 && self.big_m_scale.is_finite()) {
            return Err(Error::Validation("big-M scale must be at least 1".into()));
        }
        if !(self.thermal_tol > 0.0) {
            return Err(Error::Validation("thermal tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Incomplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BranchAndBound,
    Enumeration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcSetpoint {
    pub bus: BusId,
    /// Modified output `Q/V` as optimized.
    pub q_hat: f64,
    /// Physical output `Q_hat / W`.
    pub q: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub loss: f64,
    pub switching: f64,
    pub deviation: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.loss + self.switching + self.deviation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconfigSolution {
    pub method: Method,
    pub status: SolveStatus,
    /// Labels of open branches in network order.
    pub open_branches: Vec<String>,
    pub closed: Vec<bool>,
    pub svc_setpoints: Vec<SvcSetpoint>,
    pub objective_model: f64,
    pub terms: ObjectiveTerms,
    /// Modified DistFlow state at the optimum.
    pub w: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub q_hat: Vec<f64>,
    pub gap: f64,
    /// Branch-and-bound nodes, or radial candidates evaluated by enumeration.
    pub nodes: usize,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<AcEvaluation>,
}

impl ReconfigSolution {
    pub(crate) fn open_labels(network: &Network<f64>, closed: &[bool]) -> Vec<String> {
        (0..network.n_branches()).filter(|&l| !closed[l]).map(|l| network.branch_label(l)).collect()
    }

    /// Open branches as a sorted set of labels, for order-insensitive comparison.
    pub fn open_set(&self) -> std::collections::BTreeSet<String> {
        self.open_branches.iter().cloned().collect()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::Io(e.into()))
    }

    /// Summary row: objective, opened branches, AC-evaluated objective, loss and mean voltage.
    pub fn write_summary_csv<W: Write>(&self, out: W, scenario: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "scenario",
            "objective_model",
            "opened",
            "objective_acpf",
            "loss_acpf_kw",
            "v_avg",
            "gap",
            "nodes",
            "wall_time_s",
        ])?;
        let (obj, loss, vavg) = match &self.evaluation {
            Some(AcEvaluation::Converged { objective, loss_kw, v_avg, .. }) => {
                (format!("{objective:.6}"), format!("{loss_kw:.4}"), format!("{v_avg:.6}"))
            }
            Some(AcEvaluation::NotApplicable { .. }) => ("N/A".into(), "N/A".into(), "N/A".into()),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            scenario.to_string(),
            format!("{:.6}", self.objective_model),
            self.open_branches.join(" "),
            obj,
            loss,
            vavg,
            format!("{:e}", self.gap),
            self.nodes.to_string(),
            format!("{:.3}", self.wall_time_s),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Per branch, the (sending, receiving) buses of the nominal orientation:
/// the endpoint nearer the supply point in the normal configuration sends.
pub fn nominal_orientation(network: &Network<f64>) -> Result<Vec<(usize, usize)>> {
    let normal = build_tree(network, &network.normal_closed())?;
    Ok((0..network.n_branches())
        .map(|l| {
            let (a, b) = network.ends(l);
            if normal.depth(b) < normal.depth(a) {
                (b, a)
            } else {
                (a, b)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_validation() {
        assert!(ObjectiveWeights::new(0.0, 0.0, 0.0).is_err());
        assert!(ObjectiveWeights::new(-1.0, 0.0, 1.0).is_err());
        assert!(ObjectiveWeights::new(1.0, 0.0, f64::NAN).is_err());
        assert!(ObjectiveWeights::loss_kw().validate().is_ok());
    }

    #[test]
    fn option_validation() {
        let mut o = MiqpOptions::default();
        assert!(o.validate().is_ok());
        o.power_factor = Some(1.0);
        assert!(o.validate().is_err());
        o.power_factor = None;
        o.big_m_scale = 0.5;
        assert!(o.validate().is_err());
    }
}
