use serde::Serialize;

use super::qp::SparseRow;
use super::{nominal_orientation, MiqpOptions, ObjectiveWeights};
use crate::error::{Error, Result};
use crate::network::{loop_structure, LoopStructure, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintGroup {
    /// Flow forced to zero on open branches.
    FlowLink,
    /// Nodal balance of modified active and reactive power.
    Balance,
    /// Voltage drop along closed branches.
    VoltageDrop,
    /// Compensator output range.
    Compensator,
    /// Closed-branch count of a spanning tree.
    Radiality,
    /// Single-commodity flow connecting generators and compensators to the root.
    Commodity,
    /// Active and reactive branch capacity.
    Capacity,
    /// Phase-angle difference across branches.
    AngleLimit,
    /// Minimum power factor at the supply point.
    PowerFactor,
    /// Open-branch count per overlapping loop set.
    LoopCut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Eq,
    Le,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub group: ConstraintGroup,
    pub kind: RowKind,
    #[serde(skip)]
    pub row: SparseRow,
}

/// `P_hat^2 + Q_hat^2 <= cap^2` on one branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalLimit {
    pub branch: usize,
    pub cap: f64,
}

/// Epigraph `theta >= (P_hat^2 + Q_hat^2) / x` of a switchable branch's loss,
/// used by the relaxations in place of the plain quadratic. It coincides with
/// the loss whenever `x` is 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossEpigraph {
    pub branch: usize,
    pub var: usize,
    /// Objective coefficient of `theta`.
    pub weight: f64,
}

/// Assembled mixed-integer QP. The objective is separable:
/// `sum_j quad_j z_j^2 + lin_j z_j + constant`.
#[derive(Debug, Clone)]
pub struct MiqpModel {
    pub(crate) network: Network<f64>,
    pub(crate) weights: ObjectiveWeights,
    pub(crate) options: MiqpOptions,
    pub(crate) x: Vec<usize>,
    pub(crate) p_hat: Vec<usize>,
    pub(crate) q_hat: Vec<usize>,
    pub(crate) w: Vec<usize>,
    pub(crate) q_svc: Vec<Option<usize>>,
    pub(crate) commodity: Option<Vec<usize>>,
    pub(crate) lower: Vec<f64>,
    pub(crate) upper: Vec<f64>,
    pub(crate) binary: Vec<bool>,
    pub(crate) quad: Vec<f64>,
    pub(crate) lin: Vec<f64>,
    pub(crate) constant: f64,
    pub(crate) constraints: Vec<Constraint>,
    pub(crate) thermal: Vec<ThermalLimit>,
    pub(crate) epigraphs: Vec<LossEpigraph>,
    pub(crate) flow_big_m: Vec<f64>,
    pub(crate) voltage_big_m: f64,
    pub(crate) loops: LoopStructure,
}

impl MiqpModel {
    pub fn network(&self) -> &Network<f64> {
        &self.network
    }

    pub fn weights(&self) -> ObjectiveWeights {
        self.weights
    }

    pub fn options(&self) -> MiqpOptions {
        self.options
    }

    pub fn n_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn n_binaries(&self) -> usize {
        self.x.iter().filter(|&&j| self.binary[j]).count()
    }

    /// Switch-state variable of each branch; non-switchable ones have fixed bounds.
    pub fn switch_vars(&self) -> &[usize] {
        &self.x
    }

    pub fn flow_vars(&self) -> (&[usize], &[usize]) {
        (&self.p_hat, &self.q_hat)
    }

    pub fn w_vars(&self) -> &[usize] {
        &self.w
    }

    pub fn svc_vars(&self) -> &[Option<usize>] {
        &self.q_svc
    }

    pub fn commodity_vars(&self) -> Option<&[usize]> {
        self.commodity.as_deref()
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn count(&self, group: ConstraintGroup) -> usize {
        self.constraints.iter().filter(|c| c.group == group).count()
    }

    pub fn thermal_limits(&self) -> &[ThermalLimit] {
        &self.thermal
    }

    pub fn loss_epigraphs(&self) -> &[LossEpigraph] {
        &self.epigraphs
    }

    pub fn flow_big_m(&self) -> &[f64] {
        &self.flow_big_m
    }

    pub fn voltage_big_m(&self) -> f64 {
        self.voltage_big_m
    }

    pub fn loops(&self) -> &LoopStructure {
        &self.loops
    }

    /// Objective value at a full variable assignment.
    pub fn objective(&self, z: &[f64]) -> f64 {
        self.constant
            + z.iter().zip(self.quad.iter().zip(&self.lin)).map(|(&v, (&q, &l))| q * v * v + l * v).sum::<f64>()
    }

    /// Objective of the relaxations: switchable-branch losses are charged
    /// through their epigraph variables.
    pub(crate) fn relaxation_objective(&self, z: &[f64]) -> f64 {
        let mut v = self.objective(z);
        for e in &self.epigraphs {
            let (p, q) = (z[self.p_hat[e.branch]], z[self.q_hat[e.branch]]);
            v += e.weight * (z[e.var] - p * p - q * q);
        }
        v
    }

    /// Largest violation of any row, bound or thermal limit at `z`.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let r = c.row.eval(z) - c.row.rhs;
            worst = worst.max(match c.kind {
                RowKind::Eq => r.abs(),
                RowKind::Le => r,
            });
        }
        for (j, &v) in z.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for t in &self.thermal {
            let (p, q) = (z[self.p_hat[t.branch]], z[self.q_hat[t.branch]]);
            worst = worst.max(p.hypot(q) - t.cap);
        }
        worst
    }
}

/// One equality per overlapping loop set: its branches keep exactly
/// `N_k - L_k` closed.
pub fn overlap_loop_cuts(loops: &LoopStructure, switch_vars: &[usize]) -> Vec<SparseRow> {
    loops
        .overlap_sets
        .iter()
        .map(|set| {
            SparseRow::new(
                set.branches.iter().map(|&l| (switch_vars[l], 1.0)).collect(),
                (set.n_branches() - set.n_links()) as f64,
            )
        })
        .collect()
}

struct Builder {
    lower: Vec<f64>,
    upper: Vec<f64>,
    binary: Vec<bool>,
    constraints: Vec<Constraint>,
}

impl Builder {
    fn var(&mut self, lower: f64, upper: f64) -> usize {
        self.lower.push(lower);
        self.upper.push(upper);
        self.binary.push(false);
        self.lower.len() - 1
    }

    fn eq(&mut self, group: ConstraintGroup, coefs: Vec<(usize, f64)>, rhs: f64) {
        self.constraints.push(Constraint { group, kind: RowKind::Eq, row: SparseRow::new(coefs, rhs) });
    }

    fn le(&mut self, group: ConstraintGroup, coefs: Vec<(usize, f64)>, rhs: f64) {
        self.constraints.push(Constraint { group, kind: RowKind::Le, row: SparseRow::new(coefs, rhs) });
    }
}

/// Assembles the reconfiguration MIQP on `network`.
///
/// Branch flow variables are oriented from each record's `from` bus to its
/// `to` bus. Bus voltages enter only through `W = 2 - V`, and nodal modified
/// injections are substituted as `P_i W_i`.
pub fn build_miqp(network: &Network<f64>, weights: ObjectiveWeights, options: MiqpOptions) -> Result<MiqpModel> {
    weights.validate()?;
    options.validate()?;
    let svc_buses = network.svc_buses();
    let n_switch = network.branches().iter().filter(|b| b.switchable).count();
    if n_switch == 0 && svc_buses.is_empty() {
        return Err(Error::NothingToOptimize);
    }
    let loops = loop_structure(network)?;
    let orientation = nominal_orientation(network)?;
    let n = network.n_buses();
    let n_br = network.n_branches();
    let root = network.root();
    let buses = network.buses();
    let branches = network.branches();

    let v_lo = buses.iter().map(|b| b.v_min).fold(f64::INFINITY, f64::min);
    let v_hi = buses.iter().map(|b| b.v_max).fold(f64::NEG_INFINITY, f64::max);
    let w_hi = 2.0 - v_lo;
    let s_total: f64 = buses
        .iter()
        .map(|b| {
            b.p_demand.hypot(b.q_demand)
                + b.dg.map_or(0.0, |g| g.p.hypot(g.q))
                + b.svc.map_or(0.0, |s| s.q_min.abs().max(s.q_max.abs()))
        })
        .sum();
    let flow_big_m: Vec<f64> = branches
        .iter()
        .map(|br| {
            let mut m = s_total / v_lo;
            for cap in [br.p_cap, br.q_cap].into_iter().flatten() {
                m = m.min(cap * w_hi);
            }
            if let Some(i) = br.i_cap {
                m = m.min(i);
            }
            m * options.big_m_scale
        })
        .collect();
    let max_drop = branches.iter().zip(&flow_big_m).map(|(br, m)| (br.r + br.x) * m).fold(0.0, f64::max);
    let voltage_big_m = ((v_hi - v_lo) + max_drop) * options.big_m_scale;

    let mut b = Builder { lower: Vec::new(), upper: Vec::new(), binary: Vec::new(), constraints: Vec::new() };
    let x: Vec<usize> = branches
        .iter()
        .map(|br| {
            if br.switchable {
                let j = b.var(0.0, 1.0);
                b.binary[j] = true;
                j
            } else {
                let fixed = if br.normally_open { 0.0 } else { 1.0 };
                b.var(fixed, fixed)
            }
        })
        .collect();
    let p_hat: Vec<usize> = flow_big_m.iter().map(|&m| b.var(-m, m)).collect();
    let q_hat: Vec<usize> = flow_big_m.iter().map(|&m| b.var(-m, m)).collect();
    let w: Vec<usize> = (0..n)
        .map(|i| {
            if i == root {
                let w0 = 2.0 - network.v0();
                b.var(w0, w0)
            } else {
                b.var(2.0 - buses[i].v_max, 2.0 - buses[i].v_min)
            }
        })
        .collect();
    let mut q_svc = vec![None; n];
    for &i in &svc_buses {
        let r = buses[i].svc.expect("compensator bus");
        let lo = (r.q_min * (2.0 - buses[i].v_max)).min(r.q_min * (2.0 - buses[i].v_min));
        let hi = (r.q_max * (2.0 - buses[i].v_min)).max(r.q_max * (2.0 - buses[i].v_max));
        q_svc[i] = Some(b.var(lo, hi));
    }
    let mut sources = network.dg_buses();
    sources.extend(&svc_buses);
    sources.sort_unstable();
    sources.dedup();
    let n_sources = sources.len() as f64;
    let commodity: Option<Vec<usize>> =
        (!sources.is_empty()).then(|| (0..n_br).map(|_| b.var(-n_sources, n_sources)).collect());

    let loss_scale = weights.alpha * network.base_mva();
    let epigraphs: Vec<LossEpigraph> = branches
        .iter()
        .enumerate()
        .filter(|(_, br)| br.switchable && loss_scale * br.r > 0.0)
        .map(|(l, br)| LossEpigraph {
            branch: l,
            var: b.var(0.0, 2.0 * flow_big_m[l] * flow_big_m[l]),
            weight: loss_scale * br.r,
        })
        .collect();

    use ConstraintGroup::*;
    for l in 0..n_br {
        let m = flow_big_m[l];
        for f in [p_hat[l], q_hat[l]] {
            b.le(FlowLink, vec![(f, 1.0), (x[l], -m)], 0.0);
            b.le(FlowLink, vec![(f, -1.0), (x[l], -m)], 0.0);
        }
    }

    let (p_inj, q_inj) = network.injections();
    for i in (0..n).filter(|&i| i != root) {
        let mut rp = vec![(w[i], -p_inj[i])];
        let mut rq = vec![(w[i], -q_inj[i])];
        if let Some(c) = q_svc[i] {
            rq.push((c, -1.0));
        }
        for l in 0..n_br {
            let (a, bb) = network.ends(l);
            let sign = if a == i {
                1.0
            } else if bb == i {
                -1.0
            } else {
                continue;
            };
            rp.push((p_hat[l], sign));
            rq.push((q_hat[l], sign));
        }
        b.eq(Balance, rp, 0.0);
        b.eq(Balance, rq, 0.0);
    }

    for (l, br) in branches.iter().enumerate() {
        let (a, bb) = network.ends(l);
        // W_b - W_a - R P_hat - X Q_hat within +-M (1 - x)
        let drop =
            |s: f64| vec![(w[bb], s), (w[a], -s), (p_hat[l], -s * br.r), (q_hat[l], -s * br.x), (x[l], voltage_big_m)];
        b.le(VoltageDrop, drop(1.0), voltage_big_m);
        b.le(VoltageDrop, drop(-1.0), voltage_big_m);
    }

    for &i in &svc_buses {
        let r = buses[i].svc.expect("compensator bus");
        let c = q_svc[i].expect("compensator variable");
        b.le(Compensator, vec![(w[i], r.q_min), (c, -1.0)], 0.0);
        b.le(Compensator, vec![(c, 1.0), (w[i], -r.q_max)], 0.0);
    }

    b.eq(Radiality, x.iter().map(|&j| (j, 1.0)).collect(), (n - 1) as f64);

    if let Some(k) = &commodity {
        for i in (0..n).filter(|&i| i != root) {
            let mut row = Vec::new();
            for (l, &kl) in k.iter().enumerate() {
                let (a, bb) = network.ends(l);
                if a == i {
                    row.push((kl, 1.0));
                } else if bb == i {
                    row.push((kl, -1.0));
                }
            }
            let supply = if sources.binary_search(&i).is_ok() { 1.0 } else { 0.0 };
            b.eq(Commodity, row, supply);
        }
        for l in 0..n_br {
            b.le(Commodity, vec![(k[l], 1.0), (x[l], -n_sources)], 0.0);
            b.le(Commodity, vec![(k[l], -1.0), (x[l], -n_sources)], 0.0);
        }
    }

    let mut thermal = Vec::new();
    for (l, br) in branches.iter().enumerate() {
        let (send, recv) = orientation[l];
        for (cap, f) in [(br.p_cap, p_hat[l]), (br.q_cap, q_hat[l])] {
            if let Some(cap) = cap {
                b.le(Capacity, vec![(f, 1.0), (w[send], -cap)], 0.0);
                b.le(Capacity, vec![(f, -1.0), (w[send], -cap)], 0.0);
            }
        }
        if let Some(cap) = br.i_cap {
            thermal.push(ThermalLimit { branch: l, cap });
        }
        let s = br.delta_cap.sin();
        for sign in [1.0, -1.0] {
            b.le(AngleLimit, vec![(p_hat[l], sign * br.x), (q_hat[l], -sign * br.r), (w[recv], s)], 2.0 * s);
        }
    }

    if let Some(eta) = options.power_factor {
        let c = (eta / (1.0 - eta)).sqrt();
        let mut p0 = Vec::new();
        let mut q0 = Vec::new();
        for l in 0..n_br {
            let (a, bb) = network.ends(l);
            let sign = if a == root {
                1.0
            } else if bb == root {
                -1.0
            } else {
                continue;
            };
            p0.push((p_hat[l], sign));
            q0.push((q_hat[l], sign));
        }
        for s in [1.0, -1.0] {
            let mut row: Vec<(usize, f64)> = p0.iter().map(|&(j, a)| (j, -a)).collect();
            row.extend(q0.iter().map(|&(j, a)| (j, s * c * a)));
            b.le(PowerFactor, row, 0.0);
        }
    }

    if options.loop_cuts {
        for row in overlap_loop_cuts(&loops, &x) {
            b.constraints.push(Constraint { group: LoopCut, kind: RowKind::Eq, row });
        }
    }

    let n_vars = b.lower.len();
    let mut quad = vec![0.0; n_vars];
    let mut lin = vec![0.0; n_vars];
    let mut constant = 0.0;
    for (l, br) in branches.iter().enumerate() {
        quad[p_hat[l]] += loss_scale * br.r;
        quad[q_hat[l]] += loss_scale * br.r;
        if br.switchable {
            let x0 = if br.normally_open { 0.0 } else { 1.0 };
            quad[x[l]] += weights.beta;
            lin[x[l]] -= 2.0 * weights.beta * x0;
            constant += weights.beta * x0 * x0;
        }
    }
    // (V - 1)^2 = (1 - W)^2
    for (i, &wi) in w.iter().enumerate() {
        if i == root {
            constant += weights.gamma * (network.v0() - 1.0).powi(2);
        } else {
            quad[wi] += weights.gamma;
            lin[wi] -= 2.0 * weights.gamma;
            constant += weights.gamma;
        }
    }

    Ok(MiqpModel {
        network: network.clone(),
        weights,
        options,
        x,
        p_hat,
        q_hat,
        w,
        q_svc,
        commodity,
        lower: b.lower,
        upper: b.upper,
        binary: b.binary,
        quad,
        lin,
        constant,
        constraints: b.constraints,
        thermal,
        epigraphs,
        flow_big_m,
        voltage_big_m,
        loops,
    })
}
