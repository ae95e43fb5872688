//! Exhaustive search over radial configurations, used to validate the
//! branch-and-bound solver.
//!
//! Every candidate opens exactly `L_k` switchable branches of each
//! overlapping loop set. Candidates that form a spanning tree are solved with
//! the modified DistFlow sweep; compensator setpoints enter that model
//! affinely, so each tree reduces to a small convex problem in the setpoints.

use std::time::Instant;

use rayon::prelude::*;

use super::qp::{ConvexQp, QpOutcome, SparseRow};
use super::{
    nominal_orientation, Method, MiqpOptions, ObjectiveTerms, ObjectiveWeights, ReconfigSolution, SolveStatus,
    SvcSetpoint,
};
use crate::error::{Error, Result};
use crate::linear_flow::{solve_md_with_reactive, LinearSolution};
use crate::network::{build_tree, loop_structure, Network};

pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;
const FEAS_TOL: f64 = 1e-8;
/// Setpoint step used to measure each compensator's affine effect.
const PROBE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationOptions {
    pub cap: u128,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self { cap: DEFAULT_ENUMERATION_CAP }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Switchable branches of each overlap set and the number to open.
fn selections(network: &Network<f64>) -> Result<Vec<(Vec<usize>, usize)>> {
    let loops = loop_structure(network)?;
    loops
        .overlap_sets
        .iter()
        .map(|set| {
            let members: Vec<usize> =
                set.branches.iter().copied().filter(|&l| network.branches()[l].switchable).collect();
            if members.len() < set.n_links() {
                return Err(Error::Infeasible("a loop set has fewer switchable branches than links".into()));
            }
            Ok((members, set.n_links()))
        })
        .collect()
}

/// Number of candidate open-branch selections the enumeration visits.
pub fn candidate_count(network: &Network<f64>) -> Result<u128> {
    Ok(selections(network)?.iter().map(|(m, k)| binomial(m.len(), *k)).fold(1u128, |a, b| a.saturating_mul(b)))
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Limits expressed on the flat state `[W (buses), P_hat, Q_hat (branches), Q_hat^C (compensators)]`
/// where flows are oriented parent to child.
struct StateLimits {
    /// `a's <= rhs`
    rows: Vec<SparseRow>,
    /// (p index, q index, cap)
    thermal: Vec<(usize, usize, f64)>,
    /// Objective `sum weight_j (s_j - target_j)^2`.
    weight: Vec<f64>,
    target: Vec<f64>,
}

impl StateLimits {
    fn new(network: &Network<f64>, weights: &ObjectiveWeights, options: &MiqpOptions, svc: &[usize]) -> Result<Self> {
        let n_bus = network.n_buses();
        let n_br = network.n_branches();
        let root = network.root();
        let orient = nominal_orientation(network)?;
        let wi = |i: usize| i;
        let pi = |l: usize| n_bus + l;
        let qi = |l: usize| n_bus + n_br + l;
        let ci = |k: usize| n_bus + 2 * n_br + k;
        let mut rows = Vec::new();
        for (i, bus) in network.buses().iter().enumerate() {
            if i == root {
                continue;
            }
            rows.push(SparseRow::new(vec![(wi(i), 1.0)], 2.0 - bus.v_min));
            rows.push(SparseRow::new(vec![(wi(i), -1.0)], bus.v_max - 2.0));
        }
        for (k, &i) in svc.iter().enumerate() {
            let r = network.buses()[i].svc.expect("compensator bus");
            rows.push(SparseRow::new(vec![(wi(i), r.q_min), (ci(k), -1.0)], 0.0));
            rows.push(SparseRow::new(vec![(ci(k), 1.0), (wi(i), -r.q_max)], 0.0));
        }
        let mut thermal = Vec::new();
        for (l, br) in network.branches().iter().enumerate() {
            let (send, recv) = orient[l];
            for (cap, f) in [(br.p_cap, pi(l)), (br.q_cap, qi(l))] {
                if let Some(cap) = cap {
                    rows.push(SparseRow::new(vec![(f, 1.0), (wi(send), -cap)], 0.0));
                    rows.push(SparseRow::new(vec![(f, -1.0), (wi(send), -cap)], 0.0));
                }
            }
            if let Some(cap) = br.i_cap {
                thermal.push((pi(l), qi(l), cap));
            }
            let s = br.delta_cap.sin();
            for sign in [1.0, -1.0] {
                rows.push(SparseRow::new(vec![(pi(l), sign * br.x), (qi(l), -sign * br.r), (wi(recv), s)], 2.0 * s));
            }
        }
        if let Some(eta) = options.power_factor {
            let c = (eta / (1.0 - eta)).sqrt();
            let at_root: Vec<usize> = (0..n_br)
                .filter(|&l| {
                    let (a, b) = network.ends(l);
                    a == root || b == root
                })
                .collect();
            for sign in [1.0, -1.0] {
                let mut row: Vec<(usize, f64)> = at_root.iter().map(|&l| (pi(l), -1.0)).collect();
                row.extend(at_root.iter().map(|&l| (qi(l), sign * c)));
                rows.push(SparseRow::new(row, 0.0));
            }
        }
        let dim = n_bus + 2 * n_br + svc.len();
        let mut weight = vec![0.0; dim];
        let mut target = vec![0.0; dim];
        for i in 0..n_bus {
            weight[wi(i)] = weights.gamma;
            target[wi(i)] = 1.0;
        }
        for (l, br) in network.branches().iter().enumerate() {
            let c = weights.alpha * network.base_mva() * br.r;
            weight[pi(l)] = c;
            weight[qi(l)] = c;
        }
        Ok(Self { rows, thermal, weight, target })
    }

    fn state(&self, sol: &LinearSolution<f64>, setpoints: &[f64]) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.weight.len());
        s.extend_from_slice(&sol.w);
        s.extend_from_slice(&sol.p_hat);
        s.extend_from_slice(&sol.q_hat);
        s.extend_from_slice(setpoints);
        s
    }

    fn violation(&self, s: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.eval(s) - r.rhs);
        let thermal = self.thermal.iter().map(|&(p, q, cap)| s[p].hypot(s[q]) - cap);
        rows.chain(thermal).fold(0.0, f64::max)
    }

    fn cost(&self, s: &[f64]) -> f64 {
        s.iter().zip(self.weight.iter().zip(&self.target)).map(|(&v, (&c, &t))| c * (v - t) * (v - t)).sum()
    }
}

struct Evaluated {
    objective: f64,
    open: Vec<usize>,
    setpoints: Vec<f64>,
}

fn better(a: &Evaluated, b: &Evaluated) -> bool {
    match a.objective.total_cmp(&b.objective) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a.open < b.open,
    }
}

/// Global optimum over all radial configurations reachable by opening
/// `L_k` branches per overlapping loop set.
pub fn enumerate_radial(
    network: &Network<f64>,
    weights: ObjectiveWeights,
    options: &MiqpOptions,
    limits: &EnumerationOptions,
) -> Result<ReconfigSolution> {
    let start = Instant::now();
    weights.validate()?;
    options.validate()?;
    let svc = network.svc_buses();
    if network.branches().iter().all(|b| !b.switchable) && svc.is_empty() {
        return Err(Error::NothingToOptimize);
    }
    let sets = selections(network)?;
    let count = candidate_count(network)?;
    if count > limits.cap {
        return Err(Error::TooLarge { candidates: count, cap: limits.cap });
    }
    let choices: Vec<Vec<Vec<usize>>> = sets.iter().map(|(m, k)| combinations(m, *k)).collect();
    let state = StateLimits::new(network, &weights, options, &svc)?;
    let n_br = network.n_branches();
    let switching_base: Vec<bool> = network.normal_closed();

    let evaluated: Vec<Option<Evaluated>> = (0..count as u64)
        .into_par_iter()
        .map(|mut index| {
            let mut open = Vec::new();
            for c in &choices {
                let len = c.len() as u64;
                open.extend_from_slice(&c[(index % len) as usize]);
                index /= len;
            }
            open.sort_unstable();
            let mut closed = vec![true; n_br];
            for &l in &open {
                closed[l] = false;
            }
            evaluate_tree(network, &state, &svc, &closed, open, &weights, &switching_base)
        })
        .collect::<Result<Vec<_>>>()?;

    let trees = evaluated.iter().filter(|e| e.is_some()).count();
    let best = evaluated
        .into_iter()
        .flatten()
        .reduce(|a, b| if better(&b, &a) { b } else { a })
        .ok_or_else(|| Error::Infeasible("no radial configuration satisfies the constraints".into()))?;

    let mut closed = vec![true; n_br];
    for &l in &best.open {
        closed[l] = false;
    }
    let topo = build_tree(network, &closed)?;
    let extra = extra_injection(network.n_buses(), &svc, &best.setpoints);
    let sol = solve_md_with_reactive(network, &topo, &extra)?;
    let mut terms = ObjectiveTerms::default();
    for (l, br) in network.branches().iter().enumerate() {
        terms.loss += weights.alpha * network.base_mva() * br.r * (sol.p_hat[l].powi(2) + sol.q_hat[l].powi(2));
        if br.switchable && closed[l] != switching_base[l] {
            terms.switching += weights.beta;
        }
    }
    terms.deviation = sol.w.iter().map(|&w| weights.gamma * (1.0 - w).powi(2)).sum();
    let sign = |l: usize| match topo.sending_bus(l) {
        Some(s) if s != network.ends(l).0 => -1.0,
        _ => 1.0,
    };
    Ok(ReconfigSolution {
        method: Method::Enumeration,
        status: SolveStatus::Optimal,
        open_branches: ReconfigSolution::open_labels(network, &closed),
        closed,
        svc_setpoints: svc
            .iter()
            .zip(&best.setpoints)
            .map(|(&i, &q_hat)| SvcSetpoint { bus: network.buses()[i].id, q_hat, q: q_hat / sol.w[i] })
            .collect(),
        objective_model: terms.total(),
        terms,
        p_hat: (0..n_br).map(|l| sign(l) * sol.p_hat[l]).collect(),
        q_hat: (0..n_br).map(|l| sign(l) * sol.q_hat[l]).collect(),
        w: sol.w,
        gap: 0.0,
        nodes: trees,
        wall_time_s: start.elapsed().as_secs_f64(),
        evaluation: None,
    })
}

fn extra_injection(n: usize, svc: &[usize], setpoints: &[f64]) -> Vec<f64> {
    let mut extra = vec![0.0; n];
    for (&i, &q) in svc.iter().zip(setpoints) {
        extra[i] = q;
    }
    extra
}

fn evaluate_tree(
    network: &Network<f64>,
    state: &StateLimits,
    svc: &[usize],
    closed: &[bool],
    open: Vec<usize>,
    weights: &ObjectiveWeights,
    normal: &[bool],
) -> Result<Option<Evaluated>> {
    let Ok(topo) = build_tree(network, closed) else {
        return Ok(None);
    };
    let n = network.n_buses();
    let switching: f64 = network
        .branches()
        .iter()
        .enumerate()
        .filter(|(l, br)| br.switchable && closed[*l] != normal[*l])
        .map(|_| weights.beta)
        .sum();
    let base = match solve_md_with_reactive(network, &topo, &vec![0.0; n]) {
        Ok(s) => s,
        Err(Error::IllConditioned { .. } | Error::DegenerateVoltage { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let zeros = vec![0.0; svc.len()];
    let s0 = state.state(&base, &zeros);
    let setpoints = match svc.len() {
        0 => Vec::new(),
        _ => {
            let mut directions = Vec::with_capacity(svc.len());
            for k in 0..svc.len() {
                let mut probe = zeros.clone();
                probe[k] = PROBE;
                let sol = solve_md_with_reactive(network, &topo, &extra_injection(n, svc, &probe))?;
                let s1 = state.state(&sol, &probe);
                directions.push(s1.iter().zip(&s0).map(|(a, b)| (a - b) / PROBE).collect::<Vec<f64>>());
            }
            let best = if svc.len() == 1 {
                best_single(state, &s0, &directions[0])
            } else {
                best_multi(state, &s0, &directions)?
            };
            match best {
                Some(t) => t,
                None => return Ok(None),
            }
        }
    };
    let s = if setpoints.is_empty() {
        s0
    } else {
        let sol = solve_md_with_reactive(network, &topo, &extra_injection(n, svc, &setpoints))?;
        state.state(&sol, &setpoints)
    };
    if state.violation(&s) > FEAS_TOL {
        return Ok(None);
    }
    Ok(Some(Evaluated { objective: state.cost(&s) + switching, open, setpoints }))
}

/// Exact minimizer over one compensator setpoint: the feasible set is an
/// interval and the objective a convex parabola.
fn best_single(state: &StateLimits, s0: &[f64], d: &[f64]) -> Option<Vec<f64>> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for row in &state.rows {
        let g0 = row.eval(s0) - row.rhs;
        let dg = row.eval(d);
        if dg.abs() <= 1e-15 {
            if g0 > FEAS_TOL {
                return None;
            }
        } else if dg > 0.0 {
            hi = hi.min(-g0 / dg);
        } else {
            lo = lo.max(-g0 / dg);
        }
    }
    for &(p, q, cap) in &state.thermal {
        let a = d[p] * d[p] + d[q] * d[q];
        let b = 2.0 * (s0[p] * d[p] + s0[q] * d[q]);
        let c = s0[p] * s0[p] + s0[q] * s0[q] - cap * cap;
        if a <= 1e-30 {
            if b.abs() <= 1e-30 {
                if c > FEAS_TOL {
                    return None;
                }
            } else if b > 0.0 {
                hi = hi.min(-c / b);
            } else {
                lo = lo.max(-c / b);
            }
            continue;
        }
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let root = disc.sqrt();
        lo = lo.max((-b - root) / (2.0 * a));
        hi = hi.min((-b + root) / (2.0 * a));
    }
    if lo > hi + FEAS_TOL {
        return None;
    }
    let (mut qa, mut qb) = (0.0, 0.0);
    for j in 0..s0.len() {
        let c = state.weight[j];
        qa += c * d[j] * d[j];
        qb += 2.0 * c * (s0[j] - state.target[j]) * d[j];
    }
    let t = if qa > 0.0 {
        (-qb / (2.0 * qa)).clamp(lo, hi.max(lo))
    } else if qb > 0.0 {
        lo
    } else if qb < 0.0 {
        hi
    } else {
        0.0f64.clamp(lo, hi.max(lo))
    };
    t.is_finite().then(|| vec![t])
}

/// Several compensators: a small QP in the setpoints with thermal limits as cones.
fn best_multi(state: &StateLimits, s0: &[f64], dirs: &[Vec<f64>]) -> Result<Option<Vec<f64>>> {
    let m = dirs.len();
    let mut qp = ConvexQp::new(m);
    for j in 0..s0.len() {
        let c = state.weight[j];
        if c == 0.0 {
            continue;
        }
        let r0 = s0[j] - state.target[j];
        for a in 0..m {
            qp.linear[a] += 2.0 * c * r0 * dirs[a][j];
            for b in a..m {
                let v = 2.0 * c * dirs[a][j] * dirs[b][j];
                if v != 0.0 {
                    qp.hessian.push((a, b, v));
                }
            }
        }
    }
    for row in &state.rows {
        let coefs: Vec<(usize, f64)> = (0..m).map(|k| (k, row.eval(&dirs[k]))).collect();
        qp.le.push(SparseRow::new(coefs, row.rhs - row.eval(s0)));
    }
    for &(p, q, cap) in &state.thermal {
        qp.cones.push(vec![
            SparseRow::new(vec![], cap),
            SparseRow::new((0..m).map(|k| (k, -dirs[k][p])).collect(), s0[p]),
            SparseRow::new((0..m).map(|k| (k, -dirs[k][q])).collect(), s0[q]),
        ]);
    }
    Ok(match qp.solve()? {
        QpOutcome::Optimal { z } => Some(z),
        QpOutcome::Infeasible => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(33, 5), 237_336);
        assert_eq!(binomial(3, 4), 0);
    }

    #[test]
    fn combinations_are_lexicographic() {
        let c = combinations(&[4, 7, 9], 2);
        assert_eq!(c, vec![vec![4, 7], vec![4, 9], vec![7, 9]]);
        assert_eq!(combinations(&[1, 2], 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(&[1, 2, 3, 4, 5], 3).len(), 10);
    }
}
