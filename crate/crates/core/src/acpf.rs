//! Exact AC power flow for radial feeders (backward/forward sweep).
//!
//! Used as the reference for linear-model errors and to re-evaluate
//! reconfiguration results.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{Network, RadialTopology};
use crate::scalar::Scalar;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 500;
/// A sweep that drives any voltage below this magnitude is treated as collapse.
pub const COLLAPSE_VOLTAGE: f64 = 0.3;

#[derive(Debug, Clone, Serialize)]
pub struct AcSolution<T> {
    pub v: Vec<T>,
    /// Phase angles in radians, root at zero.
    pub delta: Vec<T>,
    /// Sending-end (parent-side) flows per network branch; zero when open.
    pub p_flow: Vec<T>,
    pub q_flow: Vec<T>,
    pub loss_total: T,
    /// Complex power delivered by the supply point.
    pub p_root: T,
    pub q_root: T,
    pub iterations: usize,
    pub residual: T,
    #[serde(skip)]
    pub(crate) root: usize,
    #[serde(skip)]
    pub(crate) in_tree: Vec<bool>,
}

impl<T: Scalar> AcSolution<T> {
    pub fn min_voltage(&self) -> T {
        self.v.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn in_tree(&self) -> &[bool] {
        &self.in_tree
    }
}

/// Solves the AC power flow on `topology` from a flat start at `V0`.
pub fn solve_acpf<T: Scalar>(
    network: &Network<T>,
    topology: &RadialTopology,
    tol: T,
    max_iter: usize,
) -> Result<AcSolution<T>> {
    if !(tol > T::zero()) {
        return Err(Error::Validation("ACPF tolerance must be positive".into()));
    }
    let n = network.n_buses();
    let root = topology.root();
    let order = topology.depth_order();
    let branches = network.branches();
    let z = |bus: usize| {
        let l = topology.parent(bus).expect("non-root bus").branch;
        Complex::new(branches[l].r, branches[l].x)
    };
    let s_inj: Vec<Complex<T>> = (0..n)
        .map(|i| {
            let (p, q) = network.injection(i);
            Complex::new(p, q)
        })
        .collect();
    let collapse = T::of(COLLAPSE_VOLTAGE);

    let mut v = vec![Complex::new(network.v0(), T::zero()); n];
    let mut s_send = vec![Complex::new(T::zero(), T::zero()); n];
    let mut iterations = 0;
    let mut residual = T::infinity();
    while iterations < max_iter {
        iterations += 1;
        // backward: complex power entering each subtree, sending end
        for &j in order[1..].iter().rev() {
            let mut s = -s_inj[j];
            for &c in topology.children(j) {
                s = s + s_send[c];
            }
            let i_mag2 = s.norm_sqr() / v[j].norm_sqr();
            s_send[j] = s + z(j) * i_mag2;
        }
        // forward: voltages from the root
        for &j in &order[1..] {
            let p = topology.parent(j).expect("non-root bus").bus;
            let current = (s_send[j] / v[p]).conj();
            v[j] = v[p] - z(j) * current;
            let mag = v[j].norm();
            if !(mag >= collapse) {
                return Err(Error::Diverged {
                    bus: network.buses()[j].id.0,
                    iteration: iterations,
                    magnitude: mag.to_f64_lossy(),
                });
            }
        }
        residual = mismatch(topology, &v, &s_inj, &z);
        if residual <= tol {
            break;
        }
    }
    if !(residual <= tol) {
        return Err(Error::NonConvergent { iterations, residual: residual.to_f64_lossy() });
    }

    let mut p_flow = vec![T::zero(); network.n_branches()];
    let mut q_flow = vec![T::zero(); network.n_branches()];
    let mut loss_total = T::zero();
    let mut s_root = Complex::new(T::zero(), T::zero());
    for &j in &order[1..] {
        let par = topology.parent(j).expect("non-root bus");
        let current = (v[par.bus] - v[j]) / z(j);
        let s = v[par.bus] * current.conj();
        p_flow[par.branch] = s.re;
        q_flow[par.branch] = s.im;
        loss_total = loss_total + branches[par.branch].r * current.norm_sqr();
        if par.bus == root {
            s_root = s_root + s;
        }
    }
    let theta0 = v[root].arg();
    Ok(AcSolution {
        v: v.iter().map(|c| c.norm()).collect(),
        delta: v.iter().map(|c| c.arg() - theta0).collect(),
        p_flow,
        q_flow,
        loss_total,
        p_root: s_root.re,
        q_root: s_root.im,
        iterations,
        residual,
        root,
        in_tree: (0..network.n_branches()).map(|l| topology.in_tree(l)).collect(),
    })
}

/// Largest complex power mismatch over non-root buses, using branch
/// currents implied by the voltages.
fn mismatch<T: Scalar>(
    topology: &RadialTopology,
    v: &[Complex<T>],
    s_inj: &[Complex<T>],
    z: &impl Fn(usize) -> Complex<T>,
) -> T {
    let current = |j: usize| {
        let p = topology.parent(j).expect("non-root bus").bus;
        (v[p] - v[j]) / z(j)
    };
    topology.depth_order()[1..]
        .iter()
        .map(|&j| {
            let mut net_in = current(j);
            for &c in topology.children(j) {
                net_in = net_in - current(c);
            }
            let absorbed = v[j] * net_in.conj();
            (absorbed + s_inj[j]).norm()
        })
        .fold(T::zero(), T::max)
}

/// Exact operating point of a single line feeding a constant-power load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoBusSolution<T> {
    pub v_j: T,
    pub p_ij: T,
    pub q_ij: T,
    /// Angle of bus i minus angle of bus j, radians.
    pub delta_ij: T,
}

/// Closed-form solution of the two-bus system: the high-voltage root of
/// `U^2 + (2(rP + xQ) - V_i^2) U + (r^2 + x^2)(P^2 + Q^2) = 0`, `U = V_j^2`.
pub fn two_bus_exact<T: Scalar>(r: T, x: T, p_d: T, q_d: T, v_i: T) -> Result<TwoBusSolution<T>> {
    let two = T::two();
    let b = v_i * v_i - two * (r * p_d + x * q_d);
    let c = (r * r + x * x) * (p_d * p_d + q_d * q_d);
    let disc = b * b - T::of(4.0) * c;
    if disc < T::zero() || b <= T::zero() {
        return Err(Error::Infeasible("two-bus load is beyond the loadability limit".into()));
    }
    let u = (b + disc.sqrt()) / two;
    let v_j = u.sqrt();
    let loss_factor = (p_d * p_d + q_d * q_d) / u;
    let p_ij = p_d + r * loss_factor;
    let q_ij = q_d + x * loss_factor;
    let delta_ij = ((x * p_ij - r * q_ij) / (v_i * v_j)).asin();
    Ok(TwoBusSolution { v_j, p_ij, q_ij, delta_ij })
}
