use std::io::Write;

use serde::Serialize;

use super::LinearSolution;
use crate::acpf::AcSolution;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::scalar::Scalar;

/// AC flows smaller than this are reported as absolute errors only.
pub const SMALL_FLOW: f64 = 1e-6;

/// Average and maximum percentage error for one quantity.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct QuantityError {
    pub avg_pct: f64,
    pub max_pct: f64,
    /// Bus or branch label at which the maximum occurs.
    pub argmax: Option<String>,
    pub samples: usize,
    /// Largest absolute error among entries excluded as near-zero.
    pub small_abs: f64,
}

impl QuantityError {
    fn collect(items: impl Iterator<Item = (String, f64, f64)>) -> Self {
        let mut out = QuantityError::default();
        let mut total = 0.0;
        for (label, lin, ac) in items {
            if ac.abs() < SMALL_FLOW {
                out.small_abs = out.small_abs.max((lin - ac).abs());
                continue;
            }
            let pct = (lin - ac).abs() / ac.abs() * 100.0;
            total += pct;
            out.samples += 1;
            if out.argmax.is_none() || pct > out.max_pct {
                out.max_pct = pct;
                out.argmax = Some(label);
            }
        }
        if out.samples > 0 {
            out.avg_pct = total / out.samples as f64;
        }
        out
    }
}

/// Linear-model errors relative to the AC solution on the same topology.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub voltage: QuantityError,
    pub p_flow: QuantityError,
    pub q_flow: QuantityError,
}

impl ErrorReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["quantity", "avg_pct", "max_pct", "argmax", "samples", "small_abs"])?;
        for (name, q) in [("voltage", &self.voltage), ("p_flow", &self.p_flow), ("q_flow", &self.q_flow)] {
            w.write_record([
                name.to_string(),
                format!("{:.6}", q.avg_pct),
                format!("{:.6}", q.max_pct),
                q.argmax.clone().unwrap_or_default(),
                q.samples.to_string(),
                format!("{:e}", q.small_abs),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Compares voltages at non-root buses and sending-end flows on closed branches.
pub fn compare_errors<T: Scalar>(
    network: &Network<T>,
    linear: &LinearSolution<T>,
    ac: &AcSolution<T>,
) -> Result<ErrorReport> {
    let n = network.n_buses();
    if linear.v.len() != n || ac.v.len() != n {
        return Err(Error::Validation("solutions do not match the network's buses".into()));
    }
    if linear.in_tree() != ac.in_tree() || linear.p_flow.len() != network.n_branches() {
        return Err(Error::Validation("solutions were computed on different topologies".into()));
    }
    let root = network.root();
    let voltage = QuantityError::collect(
        (0..n)
            .filter(|&i| i != root)
            .map(|i| (network.buses()[i].id.to_string(), linear.v[i].to_f64_lossy(), ac.v[i].to_f64_lossy())),
    );
    let flows = |lin: &[T], exact: &[T]| {
        QuantityError::collect(
            (0..network.n_branches())
                .filter(|&l| ac.in_tree[l])
                .map(|l| (network.branch_label(l), lin[l].to_f64_lossy(), exact[l].to_f64_lossy())),
        )
    };
    Ok(ErrorReport { voltage, p_flow: flows(&linear.p_flow, &ac.p_flow), q_flow: flows(&linear.q_flow, &ac.q_flow) })
}

/// One row per bus: linear voltage and, when given, the AC voltage and error.
pub fn write_bus_trace<T: Scalar, W: Write>(
    out: W,
    network: &Network<T>,
    linear: &LinearSolution<T>,
    ac: Option<&AcSolution<T>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bus", "v_linear", "v_ac", "err_pct"])?;
    for (i, bus) in network.buses().iter().enumerate() {
        let v = linear.v[i].to_f64_lossy();
        let (v_ac, err) = match ac {
            Some(ac) => {
                let e = ac.v[i].to_f64_lossy();
                (format!("{e:.10}"), format!("{:.6}", (v - e).abs() / e * 100.0))
            }
            None => (String::new(), String::new()),
        };
        w.write_record([bus.id.to_string(), format!("{v:.10}"), v_ac, err])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per closed branch with linear and, when given, AC sending-end flows.
pub fn write_branch_trace<T: Scalar, W: Write>(
    out: W,
    network: &Network<T>,
    linear: &LinearSolution<T>,
    ac: Option<&AcSolution<T>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["branch", "p_linear", "q_linear", "p_ac", "q_ac"])?;
    let in_tree = linear.in_tree();
    for l in (0..network.n_branches()).filter(|&l| in_tree[l]) {
        let (p_ac, q_ac) = match ac {
            Some(ac) => {
                (format!("{:.10}", ac.p_flow[l].to_f64_lossy()), format!("{:.10}", ac.q_flow[l].to_f64_lossy()))
            }
            None => (String::new(), String::new()),
        };
        w.write_record([
            network.branch_label(l),
            format!("{:.10}", linear.p_flow[l].to_f64_lossy()),
            format!("{:.10}", linear.q_flow[l].to_f64_lossy()),
            p_ac,
            q_ac,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_flows_are_excluded_from_percentages() {
        let q = QuantityError::collect(
            vec![("a".to_string(), 1.01, 1.0), ("b".to_string(), 2e-7, 0.0), ("c".to_string(), 0.97, 1.0)].into_iter(),
        );
        assert_eq!(q.samples, 2);
        assert!((q.max_pct - 3.0).abs() < 1e-9);
        assert!((q.avg_pct - 2.0).abs() < 1e-9);
        assert_eq!(q.argmax.as_deref(), Some("c"));
        assert!((q.small_abs - 2e-7).abs() < 1e-20);
    }

    #[test]
    fn empty_input_is_zero() {
        let q = QuantityError::collect(std::iter::empty());
        assert_eq!(q, QuantityError::default());
    }
}
