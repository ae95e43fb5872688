//! Modified DistFlow: power-to-voltage ratios as flow states and `W = 2 - V`
//! as the linearized reciprocal voltage, plus the simplified DistFlow
//! benchmark and error reporting against the AC solution.
//!
//! Sign conventions: bus injections are generation minus demand; branch
//! flows are positive from the parent (sending) bus to the child.

mod report;

use serde::Serialize;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::network::{Network, RadialTopology};
use crate::scalar::Scalar;

pub use report::{compare_errors, write_branch_trace, write_bus_trace, ErrorReport, QuantityError};

/// Condition estimates above this are logged and flagged on the solution.
pub const CONDITION_WARN: f64 = 1e8;
/// Closed-form solves with a worse condition estimate are rejected.
pub const CONDITION_FAIL: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearModel {
    ModifiedDistFlow,
    SimplifiedDistFlow,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearSolution<T> {
    pub model: LinearModel,
    /// Per bus, `W_i ~ 1/V_i`.
    pub w: Vec<T>,
    /// Per bus, `V_i = 2 - W_i`.
    pub v: Vec<T>,
    /// Modified branch flows `P/V_sending` per network branch (zero when open).
    pub p_hat: Vec<T>,
    pub q_hat: Vec<T>,
    /// Recovered physical sending-end flows.
    pub p_flow: Vec<T>,
    pub q_flow: Vec<T>,
    /// `sum R (P_hat^2 + Q_hat^2)`.
    pub loss_est: T,
    pub iterations: Option<usize>,
    pub condition: Option<f64>,
    #[serde(skip)]
    pub(crate) root: usize,
    #[serde(skip)]
    pub(crate) sending: Vec<Option<usize>>,
}

impl<T: Scalar> LinearSolution<T> {
    pub fn min_voltage(&self) -> T {
        self.v.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn in_tree(&self) -> Vec<bool> {
        self.sending.iter().map(Option::is_some).collect()
    }

    /// Largest violation of the linear KCL balance at any non-root bus.
    pub fn kcl_residual(&self, network: &Network<T>, topology: &RadialTopology) -> T {
        let (p, q) = network.injections();
        topology.depth_order()[1..]
            .iter()
            .map(|&i| {
                let parent = topology.parent(i).expect("non-root bus").branch;
                let mut rp = -self.p_hat[parent] - p[i] * self.w[i];
                let mut rq = -self.q_hat[parent] - q[i] * self.w[i];
                for &c in topology.children(i) {
                    let l = topology.parent(c).expect("child").branch;
                    rp = rp + self.p_hat[l];
                    rq = rq + self.q_hat[l];
                }
                rp.abs().max(rq.abs())
            })
            .fold(T::zero(), T::max)
    }
}

/// Coefficient pieces shared by the closed-form and fixed-point solvers.
struct MatrixForm<T> {
    /// `T^T R_N T P_N + T^T X_N T Q_N`
    coupling: DenseMatrix<T>,
    dim: usize,
}

fn matrix_form<T: Scalar>(network: &Network<T>, topology: &RadialTopology) -> MatrixForm<T> {
    let incidence: DenseMatrix<T> = topology.path_incidence();
    let rows = topology.rows();
    let r: Vec<T> = rows.iter().map(|&l| network.branches()[l].r).collect();
    let x: Vec<T> = rows.iter().map(|&l| network.branches()[l].x).collect();
    let (p_all, q_all) = network.injections();
    let p: Vec<T> = topology.columns().iter().map(|&b| p_all[b]).collect();
    let q: Vec<T> = topology.columns().iter().map(|&b| q_all[b]).collect();
    let tt = incidence.transpose();
    let resistive = tt.matmul(&incidence.scale_rows(&r));
    let reactive = tt.matmul(&incidence.scale_rows(&x));
    let coupling = resistive.scale_cols(&p).add(&reactive.scale_cols(&q));
    MatrixForm { coupling, dim: p.len() }
}

/// Assembles a full solution from the non-root `W` values in column order.
fn assemble<T: Scalar>(
    network: &Network<T>,
    topology: &RadialTopology,
    w_cols: &[T],
    q_hat_extra: &[T],
    iterations: Option<usize>,
    condition: Option<f64>,
) -> Result<LinearSolution<T>> {
    let n = network.n_buses();
    let two = T::two();
    let mut w = vec![two - network.v0(); n];
    for (k, &b) in topology.columns().iter().enumerate() {
        w[b] = w_cols[k];
    }
    let (p, q) = network.injections();
    let p_inj: Vec<T> = (0..n).map(|i| p[i] * w[i]).collect();
    let q_inj: Vec<T> = (0..n).map(|i| q[i] * w[i] + q_hat_extra[i]).collect();
    let (p_hat, q_hat) = path_sum_flows(topology, &p_inj, &q_inj);
    finish(network, topology, LinearModel::ModifiedDistFlow, w, p_hat, q_hat, iterations, condition)
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Scalar>(
    network: &Network<T>,
    topology: &RadialTopology,
    model: LinearModel,
    w: Vec<T>,
    p_hat: Vec<T>,
    q_hat: Vec<T>,
    iterations: Option<usize>,
    condition: Option<f64>,
) -> Result<LinearSolution<T>> {
    let (p_flow, q_flow) = recover_branch_flows(network, topology, &w, &p_hat, &q_hat)?;
    let loss_est = network
        .branches()
        .iter()
        .zip(p_hat.iter().zip(&q_hat))
        .map(|(br, (&ph, &qh))| br.r * (ph * ph + qh * qh))
        .sum();
    let two = T::two();
    Ok(LinearSolution {
        model,
        v: w.iter().map(|&wi| two - wi).collect(),
        w,
        p_hat,
        q_hat,
        p_flow,
        q_flow,
        loss_est,
        iterations,
        condition,
        root: topology.root(),
        sending: (0..network.n_branches()).map(|l| topology.sending_bus(l)).collect(),
    })
}

/// Closed-form modified DistFlow:
/// `V_R = 2 - (I + T^T R_N T P_N + T^T X_N T Q_N)^{-1} (2 - V_0)`.
pub fn solve_md_closed_form<T: Scalar>(network: &Network<T>, topology: &RadialTopology) -> Result<LinearSolution<T>> {
    let form = matrix_form(network, topology);
    let m = form.dim;
    let system = DenseMatrix::identity(m).add(&form.coupling);
    let lu = system.lu()?;
    let condition = lu.condition_estimate();
    if !condition.is_finite() || condition > CONDITION_FAIL {
        return Err(Error::IllConditioned { condition });
    }
    if condition > CONDITION_WARN {
        log::warn!("modified DistFlow system condition estimate {condition:e}");
    }
    let rhs = vec![T::two() - network.v0(); m];
    let w_cols = lu.solve(&rhs);
    let zeros = vec![T::zero(); network.n_buses()];
    assemble(network, topology, &w_cols, &zeros, None, Some(condition))
}

pub const DEFAULT_FIXED_POINT_TOL: f64 = 1e-12;
pub const DEFAULT_FIXED_POINT_MAX_ITER: usize = 1000;

/// Fixed-point iteration `W <- (2 - V0) - (T^T R_N T P_N + T^T X_N T Q_N) W`
/// from `W = 1`.
pub fn solve_md_fixed_point<T: Scalar>(
    network: &Network<T>,
    topology: &RadialTopology,
    tol: T,
    max_iter: usize,
) -> Result<LinearSolution<T>> {
    let form = matrix_form(network, topology);
    let m = form.dim;
    let base = T::two() - network.v0();
    let step = |w: &[T]| -> Vec<T> { form.coupling.mul_vec(w).into_iter().map(|aw| base - aw).collect() };
    let mut w = step(&vec![T::one(); m]);
    let mut delta = T::infinity();
    for k in 1..=max_iter {
        let next = step(&w);
        delta = next.iter().zip(&w).map(|(&a, &b)| (a - b).abs()).fold(T::zero(), T::max);
        w = next;
        if !delta.is_finite() {
            break;
        }
        if delta <= tol {
            let zeros = vec![T::zero(); network.n_buses()];
            return assemble(network, topology, &w, &zeros, Some(k), None);
        }
    }
    Err(Error::NonConvergent { iterations: max_iter, residual: delta.to_f64_lossy() })
}

/// Modified DistFlow by a leaf-to-root elimination: each subtree's modified
/// injection is affine in its parent's `W`, so one upward and one downward
/// pass solve the model exactly in linear time.
pub fn solve_md_path_sum<T: Scalar>(network: &Network<T>, topology: &RadialTopology) -> Result<LinearSolution<T>> {
    solve_md_with_reactive(network, topology, &vec![T::zero(); network.n_buses()])
}

/// [`solve_md_path_sum`] with additional modified reactive injections
/// `q_hat_extra` (per bus, e.g. compensator outputs `Q_hat^C`).
pub fn solve_md_with_reactive<T: Scalar>(
    network: &Network<T>,
    topology: &RadialTopology,
    q_hat_extra: &[T],
) -> Result<LinearSolution<T>> {
    let n = network.n_buses();
    assert_eq!(q_hat_extra.len(), n, "one extra reactive injection per bus");
    let (p, q) = network.injections();
    let branches = network.branches();
    // subtree sums expressed in the parent's W: S = slope * W_parent + offset
    let mut sp = vec![(T::zero(), T::zero()); n];
    let mut sq = vec![(T::zero(), T::zero()); n];
    // own coefficients: S_j = e W_j + f, denominators D_j
    let mut own = vec![(T::zero(), T::zero(), T::zero(), T::zero(), T::one()); n];
    let order = topology.depth_order();
    for &j in order[1..].iter().rev() {
        let l = topology.parent(j).expect("non-root bus").branch;
        let (r, x) = (branches[l].r, branches[l].x);
        let (mut e, mut f, mut g, mut h) = (p[j], T::zero(), q[j], q_hat_extra[j]);
        for &c in topology.children(j) {
            e = e + sp[c].0;
            f = f + sp[c].1;
            g = g + sq[c].0;
            h = h + sq[c].1;
        }
        let d = T::one() + r * e + x * g;
        if !(d > T::zero()) {
            return Err(Error::IllConditioned { condition: f64::INFINITY });
        }
        let shift = r * f + x * h;
        sp[j] = (e / d, f - e * shift / d);
        sq[j] = (g / d, h - g * shift / d);
        own[j] = (e, f, g, h, d);
    }
    let mut w = vec![T::two() - network.v0(); n];
    for &j in &order[1..] {
        let par = topology.parent(j).expect("non-root bus");
        let (r, x) = (branches[par.branch].r, branches[par.branch].x);
        let (_, f, _, h, d) = own[j];
        w[j] = (w[par.bus] - r * f - x * h) / d;
    }
    let w_cols: Vec<T> = topology.columns().iter().map(|&b| w[b]).collect();
    assemble(network, topology, &w_cols, q_hat_extra, None, None)
}

/// Branch flows as the negated sum of modified injections over each
/// branch's downstream buses. Out-of-tree branches carry zero.
pub fn path_sum_flows<T: Scalar>(topology: &RadialTopology, p_hat_inj: &[T], q_hat_inj: &[T]) -> (Vec<T>, Vec<T>) {
    let n_br = topology.closed().len();
    let mut p = vec![T::zero(); n_br];
    let mut q = vec![T::zero(); n_br];
    let mut acc_p = vec![T::zero(); topology.n_buses()];
    let mut acc_q = vec![T::zero(); topology.n_buses()];
    for &j in topology.depth_order()[1..].iter().rev() {
        let par = topology.parent(j).expect("non-root bus");
        acc_p[j] = acc_p[j] - p_hat_inj[j];
        acc_q[j] = acc_q[j] - q_hat_inj[j];
        p[par.branch] = acc_p[j];
        q[par.branch] = acc_q[j];
        acc_p[par.bus] = acc_p[par.bus] + acc_p[j];
        acc_q[par.bus] = acc_q[par.bus] + acc_q[j];
    }
    (p, q)
}

/// Physical flows `P = P_hat / W_sending`.
pub fn recover_branch_flows<T: Scalar>(
    network: &Network<T>,
    topology: &RadialTopology,
    w: &[T],
    p_hat: &[T],
    q_hat: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    if let Some(bad) = w.iter().position(|&wi| !(wi > T::zero())) {
        return Err(Error::DegenerateVoltage { bus: network.buses()[bad].id.0 });
    }
    let n_br = network.n_branches();
    let mut p = vec![T::zero(); n_br];
    let mut q = vec![T::zero(); n_br];
    for l in 0..n_br {
        if let Some(s) = topology.sending_bus(l) {
            p[l] = p_hat[l] / w[s];
            q[l] = q_hat[l] / w[s];
        }
    }
    Ok((p, q))
}

/// Simplified DistFlow benchmark: lossless flows `P_ij = -sum P_k` and the
/// squared-voltage drop `V_j^2 = V_i^2 - 2 (R P_ij + X Q_ij)`.
///
/// The result is expressed in the same shape as the modified model:
/// `w = 2 - v` and `p_hat = p_flow * w_sending`.
pub fn solve_simplified_distflow<T: Scalar>(
    network: &Network<T>,
    topology: &RadialTopology,
) -> Result<LinearSolution<T>> {
    let n = network.n_buses();
    let (p, q) = network.injections();
    let (p_flow, q_flow) = path_sum_flows(topology, &p, &q);
    let branches = network.branches();
    let two = T::two();
    let mut u = vec![network.v0() * network.v0(); n];
    for &j in &topology.depth_order()[1..] {
        let par = topology.parent(j).expect("non-root bus");
        let br = &branches[par.branch];
        u[j] = u[par.bus] - two * (br.r * p_flow[par.branch] + br.x * q_flow[par.branch]);
        if !(u[j] > T::zero()) {
            return Err(Error::DegenerateVoltage { bus: network.buses()[j].id.0 });
        }
    }
    let w: Vec<T> = u.iter().map(|&ui| two - ui.sqrt()).collect();
    let mut p_hat = vec![T::zero(); network.n_branches()];
    let mut q_hat = vec![T::zero(); network.n_branches()];
    for l in 0..network.n_branches() {
        if let Some(s) = topology.sending_bus(l) {
            p_hat[l] = p_flow[l] * w[s];
            q_hat[l] = q_flow[l] * w[s];
        }
    }
    finish(network, topology, LinearModel::SimplifiedDistFlow, w, p_hat, q_hat, None, None)
}

/// Percentage error of the `W ~ 2 - V` linearization across a branch:
/// `100 |(1/V_i - (2 - V_i)) - (1/V_j - (2 - V_j))|`.
pub fn linearization_error<T: Scalar>(v_i: T, v_j: T) -> T {
    let two = T::two();
    let gap = |v: T| v.recip() - (two - v);
    T::of(100.0) * (gap(v_i) - gap(v_j)).abs()
}
