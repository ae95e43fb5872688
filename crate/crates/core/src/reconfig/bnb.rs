//! Best-first branch-and-bound over switch states with QP relaxations.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::time::{Duration, Instant};

use super::model::{ConstraintGroup, MiqpModel, RowKind};
use super::qp::{ConvexQp, QpOutcome, SparseRow};
use super::{Method, ObjectiveTerms, ReconfigSolution, SolveStatus, SvcSetpoint};
use crate::error::{Error, Result};
use crate::network::build_tree;

const INTEGRALITY_TOL: f64 = 1e-6;
const FIXED_TOL: f64 = 1e-12;
const ROW_TOL: f64 = 1e-9;
const MAX_CUT_ROUNDS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative optimality gap at which a node is pruned.
    pub gap: f64,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    /// Build a spanning tree from each relaxation and evaluate it as an incumbent.
    pub rounding: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { gap: 1e-6, node_limit: 1_000_000, time_limit: None, rounding: true }
    }
}

/// Parts of the model left out when diagnosing infeasibility.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Relaxed {
    Nothing,
    VoltageBounds,
    Thermal,
    Group(ConstraintGroup),
}

struct Node {
    bound: f64,
    seq: u64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // reversed: the heap pops the smallest bound, then the oldest node
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    objective: f64,
    z: Vec<f64>,
    closed: Vec<bool>,
}

struct Search<'a> {
    model: &'a MiqpModel,
    cuts: Vec<SparseRow>,
    evaluated: HashSet<Vec<bool>>,
    incumbent: Option<Incumbent>,
}

/// Solves the model to proven optimality within `options.gap`, or returns
/// the incumbent with status [`SolveStatus::Incomplete`] when the budget runs out.
pub fn solve_miqp(model: &MiqpModel, options: &SolveOptions) -> Result<ReconfigSolution> {
    let start = Instant::now();
    let net = model.network();
    let n_br = net.n_branches();
    let mut search = Search { model, cuts: Vec::new(), evaluated: HashSet::new(), incumbent: None };

    let mut lo: Vec<f64> = model.x.iter().map(|&j| model.lower[j]).collect();
    let mut hi: Vec<f64> = model.x.iter().map(|&j| model.upper[j]).collect();
    if !search.propagate(&mut lo, &mut hi) {
        return Err(Error::Infeasible("switchable branches cannot form a spanning tree".into()));
    }

    let normal = net.normal_closed();
    if (0..n_br).all(|l| lo[l] <= f64::from(u8::from(normal[l])) && f64::from(u8::from(normal[l])) <= hi[l]) {
        search.try_configuration(&normal)?;
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node { bound: f64::NEG_INFINITY, seq, lo, hi });
    let mut nodes = 0usize;
    let mut pruned_bound = f64::INFINITY;
    let mut exhausted = false;

    while let Some(node) = heap.pop() {
        if node.bound >= search.threshold(options.gap) {
            pruned_bound = pruned_bound.min(node.bound);
            continue;
        }
        let out_of_time = options.time_limit.is_some_and(|t| start.elapsed() >= t);
        if nodes >= options.node_limit || out_of_time {
            pruned_bound = pruned_bound.min(node.bound);
            heap.push(node);
            exhausted = true;
            break;
        }
        nodes += 1;
        let (z, bound) = match search.relax(&node.lo, &node.hi, Relaxed::Nothing) {
            Ok(Some(r)) => r,
            Ok(None) => continue,
            Err(Error::Solver(msg)) => {
                // no usable bound here: split on a free branch and keep the parent's
                let Some(l) = (0..n_br).find(|&l| node.hi[l] - node.lo[l] > FIXED_TOL) else {
                    return Err(Error::Solver(msg));
                };
                log::warn!("node relaxation failed ({msg}); branching without a bound");
                for value in [1.0, 0.0] {
                    let (mut lo, mut hi) = (node.lo.clone(), node.hi.clone());
                    lo[l] = value;
                    hi[l] = value;
                    if search.propagate(&mut lo, &mut hi) {
                        seq += 1;
                        heap.push(Node { bound: node.bound, seq, lo, hi });
                    }
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        if bound >= search.threshold(options.gap) {
            pruned_bound = pruned_bound.min(bound);
            continue;
        }
        if options.rounding {
            let tree = search.round_to_tree(&z, &node.lo, &node.hi);
            search.try_configuration(&tree)?;
        }

        let fractional = (0..n_br).any(|l| {
            let v = z[model.x[l]];
            node.hi[l] - node.lo[l] > FIXED_TOL && v.min(1.0 - v) > INTEGRALITY_TOL
        });
        if fractional {
            for (lo, hi) in search.split_on_cycle(&z, &node.lo, &node.hi) {
                let (mut lo, mut hi) = (lo, hi);
                if search.propagate(&mut lo, &mut hi) {
                    seq += 1;
                    heap.push(Node { bound, seq, lo, hi });
                }
            }
        } else {
            let closed: Vec<bool> = model.x.iter().map(|&j| z[j] > 0.5).collect();
            if build_tree(net, &closed).is_ok() {
                // an integral relaxation is the best tree of this subtree
                search.try_configuration(&closed)?;
            } else {
                search.exclude(&closed);
                seq += 1;
                heap.push(Node { bound, seq, ..node });
            }
        }
    }

    let Some(inc) = search.incumbent.take() else {
        if exhausted {
            return Err(Error::Incomplete { nodes });
        }
        return Err(Error::Infeasible(search.diagnose()?));
    };
    let remaining = heap.iter().map(|n| n.bound).fold(pruned_bound, f64::min);
    let lower = remaining.min(inc.objective);
    let gap = (inc.objective - lower).max(0.0) / inc.objective.abs().max(1e-9);
    let status = if exhausted && gap > options.gap { SolveStatus::Incomplete } else { SolveStatus::Optimal };
    Ok(extract(model, &inc, Method::BranchAndBound, status, gap, nodes, start.elapsed().as_secs_f64()))
}

impl Search<'_> {
    fn threshold(&self, gap: f64) -> f64 {
        match &self.incumbent {
            Some(inc) => inc.objective - gap * inc.objective.abs().max(1e-9),
            None => f64::INFINITY,
        }
    }

    /// Graph reasoning on switch bounds. Returns false when no spanning tree
    /// is compatible with them.
    fn propagate(&self, lo: &mut [f64], hi: &mut [f64]) -> bool {
        let net = self.model.network();
        let n = net.n_buses();
        let ends: Vec<(usize, usize)> = (0..net.n_branches()).map(|l| net.ends(l)).collect();
        loop {
            let mut changed = false;
            let mut uf = UnionFind::new(n);
            for (l, &(a, b)) in ends.iter().enumerate() {
                if lo[l] > 0.5 && !uf.union(a, b) {
                    return false;
                }
            }
            for (l, &(a, b)) in ends.iter().enumerate() {
                if lo[l] < 0.5 && hi[l] > 0.5 && uf.find(a) == uf.find(b) {
                    hi[l] = 0.0;
                    changed = true;
                }
            }
            let usable: Vec<bool> = hi.iter().map(|&h| h > 0.5).collect();
            let Some(bridge) = bridges(n, &ends, &usable, net.root()) else {
                return false;
            };
            for l in 0..ends.len() {
                if bridge[l] && lo[l] < 0.5 {
                    lo[l] = 1.0;
                    changed = true;
                }
            }
            if !changed {
                return true;
            }
        }
    }

    /// Solves the continuous relaxation under the given switch bounds,
    /// refining thermal-limit cuts until they hold.
    fn relax(&mut self, lo: &[f64], hi: &[f64], relaxed: Relaxed) -> Result<Option<(Vec<f64>, f64)>> {
        let m = self.model;
        let mut lower = m.lower.clone();
        let mut upper = m.upper.clone();
        for (l, &j) in m.x.iter().enumerate() {
            lower[j] = lo[l];
            upper[j] = hi[l];
            if hi[l] < 0.5 {
                let mut off = vec![m.p_hat[l], m.q_hat[l]];
                if let Some(k) = &m.commodity {
                    off.push(k[l]);
                }
                if let Some(e) = m.epigraphs.iter().find(|e| e.branch == l) {
                    off.push(e.var);
                }
                for v in off {
                    lower[v] = 0.0;
                    upper[v] = 0.0;
                }
            }
        }
        if relaxed == Relaxed::VoltageBounds {
            for (i, &j) in m.w.iter().enumerate() {
                if i != m.network.root() {
                    lower[j] = 0.0;
                    upper[j] = 2.0;
                }
            }
        }
        for _ in 0..MAX_CUT_ROUNDS {
            let Some(z) = self.solve_bounded(&lower, &upper, relaxed)? else {
                return Ok(None);
            };
            if relaxed == Relaxed::Thermal {
                let obj = m.relaxation_objective(&z);
                return Ok(Some((z, obj)));
            }
            let mut added = false;
            for t in &m.thermal {
                let (p, q) = (z[m.p_hat[t.branch]], z[m.q_hat[t.branch]]);
                let s = p.hypot(q);
                if s - t.cap > m.options.thermal_tol {
                    self.cuts.push(SparseRow::new(vec![(m.p_hat[t.branch], p / s), (m.q_hat[t.branch], q / s)], t.cap));
                    added = true;
                }
            }
            if !added {
                let obj = m.relaxation_objective(&z);
                return Ok(Some((z, obj)));
            }
        }
        Err(Error::Solver("thermal-limit cuts did not converge".into()))
    }

    fn solve_bounded(&self, lower: &[f64], upper: &[f64], relaxed: Relaxed) -> Result<Option<Vec<f64>>> {
        let m = self.model;
        let n = m.lower.len();
        let mut free = vec![usize::MAX; n];
        let mut k = 0;
        for j in 0..n {
            if upper[j] - lower[j] > FIXED_TOL {
                free[j] = k;
                k += 1;
            }
        }
        let mut implied = vec![false; n];
        for l in 0..m.x.len() {
            implied[m.p_hat[l]] = true;
            implied[m.q_hat[l]] = true;
        }
        for &j in m.commodity.iter().flatten() {
            implied[j] = true;
        }
        let mut charged = vec![false; n];
        for e in &m.epigraphs {
            implied[e.var] = true;
            charged[m.p_hat[e.branch]] = true;
            charged[m.q_hat[e.branch]] = true;
        }
        let mut qp = ConvexQp::new(k);
        for j in 0..n {
            if free[j] == usize::MAX {
                continue;
            }
            if m.quad[j] != 0.0 && !charged[j] {
                qp.hessian.push((free[j], free[j], 2.0 * m.quad[j]));
            }
            qp.linear[free[j]] = m.lin[j];
            if !implied[j] {
                qp.le.push(SparseRow::new(vec![(free[j], 1.0)], upper[j]));
                qp.le.push(SparseRow::new(vec![(free[j], -1.0)], -lower[j]));
            }
        }
        for e in &m.epigraphs {
            if free[e.var] != usize::MAX {
                qp.linear[free[e.var]] += e.weight;
            }
        }
        let reduce = |row: &SparseRow| -> (Vec<(usize, f64)>, f64) {
            let mut coefs = Vec::with_capacity(row.coefs.len());
            let mut rhs = row.rhs;
            for &(j, a) in &row.coefs {
                if free[j] == usize::MAX {
                    rhs -= a * lower[j];
                } else {
                    coefs.push((free[j], a));
                }
            }
            (coefs, rhs)
        };
        // rows the variable box already satisfies only slow the solver; flow
        // linking and commodity rows stay since they bound the flow variables
        let implied_by_box = |row: &SparseRow| {
            let top: f64 = row.coefs.iter().map(|&(j, a)| (a * lower[j]).max(a * upper[j])).sum();
            top <= row.rhs
        };
        let rows = m
            .constraints
            .iter()
            .filter(|c| relaxed != Relaxed::Group(c.group))
            .filter(|c| {
                !(!matches!(c.group, ConstraintGroup::FlowLink | ConstraintGroup::Commodity)
                    && c.kind == RowKind::Le
                    && implied_by_box(&c.row))
            })
            .map(|c| (c.kind, &c.row))
            .chain(self.cuts.iter().map(|r| (RowKind::Le, r)));
        for (kind, row) in rows {
            let (coefs, rhs) = reduce(row);
            if coefs.is_empty() {
                let ok = match kind {
                    RowKind::Eq => rhs.abs() <= ROW_TOL,
                    RowKind::Le => rhs >= -ROW_TOL,
                };
                if !ok {
                    return Ok(None);
                }
                continue;
            }
            let row = SparseRow::new(coefs, rhs);
            match kind {
                RowKind::Eq => qp.eq.push(row),
                RowKind::Le => qp.le.push(row),
            }
        }
        merge_opposite_rows(&mut qp);
        for e in &m.epigraphs {
            // (P^2 + Q^2) <= theta x  as  ||(2P, 2Q, theta - x)|| <= theta + x
            let (x, t, p, q) = (m.x[e.branch], e.var, m.p_hat[e.branch], m.q_hat[e.branch]);
            let cone: Vec<(Vec<(usize, f64)>, f64)> = [
                SparseRow::new(vec![(t, -1.0), (x, -1.0)], 0.0),
                SparseRow::new(vec![(p, -2.0)], 0.0),
                SparseRow::new(vec![(q, -2.0)], 0.0),
                SparseRow::new(vec![(t, -1.0), (x, 1.0)], 0.0),
            ]
            .iter()
            .map(reduce)
            .collect();
            if cone.iter().all(|(c, _)| c.is_empty()) {
                let head = cone[0].1;
                let tail = cone[1..].iter().map(|(_, r)| r * r).sum::<f64>().sqrt();
                if head < tail - ROW_TOL {
                    return Ok(None);
                }
                continue;
            }
            qp.cones.push(cone.into_iter().map(|(c, r)| SparseRow::new(c, r)).collect());
        }
        if k == 0 {
            return Ok(Some(lower.to_vec()));
        }
        match qp.solve()? {
            QpOutcome::Infeasible => Ok(None),
            QpOutcome::Optimal { z: reduced, .. } => {
                let mut z = lower.to_vec();
                for j in 0..n {
                    if free[j] != usize::MAX {
                        z[j] = reduced[free[j]];
                    }
                }
                Ok(Some(z))
            }
        }
    }

    /// Children of a node that decide which branch of one cycle is the first
    /// to open: child `i` closes the first `i` free branches of the cycle and
    /// opens the next. Every tree of the node lies in exactly one child.
    /// Each fractional branch is closed into a cycle along the path with the
    /// fewest free branches; the longest such cycle is split, which gives
    /// more and tighter children.
    fn split_on_cycle(&self, z: &[f64], lo: &[f64], hi: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let net = self.model.network();
        let n_br = net.n_branches();
        let xv = |l: usize| z[self.model.x[l]];
        let free = |l: usize| hi[l] - lo[l] > FIXED_TOL;

        let mut best: Option<(usize, f64, Vec<usize>)> = None;
        for pivot in (0..n_br).filter(|&l| free(l) && xv(l).min(1.0 - xv(l)) > INTEGRALITY_TOL) {
            let Some(path) = self.cheapest_path(pivot, lo, hi) else {
                // a bridge; propagation normally fixes it first
                return [1.0, 0.0]
                    .into_iter()
                    .map(|v| {
                        let (mut lo, mut hi) = (lo.to_vec(), hi.to_vec());
                        lo[pivot] = v;
                        hi[pivot] = v;
                        (lo, hi)
                    })
                    .collect();
            };
            let mut order: Vec<usize> = path.into_iter().filter(|&l| free(l)).collect();
            order.push(pivot);
            let better = match &best {
                None => true,
                Some((len, x, _)) => order.len() > *len || (order.len() == *len && xv(pivot) < *x),
            };
            if better {
                best = Some((order.len(), xv(pivot), order));
            }
        }
        let (_, _, mut order) = best.expect("a fractional branch exists");
        order.sort_by(|&a, &b| xv(a).total_cmp(&xv(b)).then(a.cmp(&b)));
        (0..order.len())
            .map(|i| {
                let (mut lo, mut hi) = (lo.to_vec(), hi.to_vec());
                for &l in &order[..i] {
                    lo[l] = 1.0;
                }
                lo[order[i]] = 0.0;
                hi[order[i]] = 0.0;
                (lo, hi)
            })
            .collect()
    }

    /// Branches of a path joining the ends of `pivot` that avoids open
    /// branches and crosses as few free ones as possible.
    fn cheapest_path(&self, pivot: usize, lo: &[f64], hi: &[f64]) -> Option<Vec<usize>> {
        let net = self.model.network();
        let n = net.n_buses();
        let mut adj = vec![Vec::new(); n];
        for l in (0..net.n_branches()).filter(|&l| l != pivot && hi[l] > 0.5) {
            let (a, b) = net.ends(l);
            let cost = usize::from(lo[l] < 0.5);
            adj[a].push((b, l, cost));
            adj[b].push((a, l, cost));
        }
        let (src, dst) = net.ends(pivot);
        let mut dist = vec![usize::MAX; n];
        let mut via = vec![None; n];
        let mut queue = std::collections::VecDeque::from([src]);
        dist[src] = 0;
        while let Some(u) = queue.pop_front() {
            for &(v, l, cost) in &adj[u] {
                if dist[u] + cost < dist[v] {
                    dist[v] = dist[u] + cost;
                    via[v] = Some((u, l));
                    if cost == 0 {
                        queue.push_front(v);
                    } else {
                        queue.push_back(v);
                    }
                }
            }
        }
        if dist[dst] == usize::MAX {
            return None;
        }
        let mut path = Vec::new();
        let mut u = dst;
        while let Some((prev, l)) = via[u] {
            path.push(l);
            u = prev;
        }
        Some(path)
    }

    /// Kruskal on the relaxation's switch values, fixed-closed branches first.
    fn round_to_tree(&self, z: &[f64], lo: &[f64], hi: &[f64]) -> Vec<bool> {
        let m = self.model;
        let net = m.network();
        let mut order: Vec<usize> = (0..net.n_branches()).filter(|&l| hi[l] > 0.5).collect();
        order.sort_by(|&a, &b| {
            let key = |l: usize| if lo[l] > 0.5 { 2.0 } else { z[m.x[l]] };
            key(b).total_cmp(&key(a)).then(a.cmp(&b))
        });
        let mut uf = UnionFind::new(net.n_buses());
        let mut closed = vec![false; net.n_branches()];
        for l in order {
            let (a, b) = net.ends(l);
            if uf.union(a, b) {
                closed[l] = true;
            }
        }
        closed
    }

    /// Evaluates a fixed spanning tree once and keeps it if it improves the incumbent.
    fn try_configuration(&mut self, closed: &[bool]) -> Result<()> {
        if !self.evaluated.insert(closed.to_vec()) {
            return Ok(());
        }
        if build_tree(self.model.network(), closed).is_err() {
            return Ok(());
        }
        let fixed: Vec<f64> = closed.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
        let (z, _) = match self.relax(&fixed, &fixed, Relaxed::Nothing) {
            Ok(Some(r)) => r,
            Ok(None) => return Ok(()),
            Err(Error::Solver(msg)) => {
                // the tree is still reached by the search itself
                self.evaluated.remove(closed);
                log::warn!("configuration evaluation failed ({msg})");
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        let objective = self.model.objective(&z);
        let better = match &self.incumbent {
            None => true,
            Some(inc) => {
                let tie = 1e-12 * inc.objective.abs().max(1.0);
                objective < inc.objective - tie
                    || (objective <= inc.objective + tie && open_key(closed) < open_key(&inc.closed))
            }
        };
        if better {
            log::debug!("incumbent {objective:.9}");
            self.incumbent = Some(Incumbent { objective, z, closed: closed.to_vec() });
        }
        Ok(())
    }

    /// Adds a no-good cut excluding exactly this switch assignment.
    fn exclude(&mut self, closed: &[bool]) {
        let m = self.model;
        let mut coefs = Vec::new();
        let mut ones = 0.0;
        for (l, &c) in closed.iter().enumerate() {
            if !m.binary[m.x[l]] {
                continue;
            }
            if c {
                coefs.push((m.x[l], 1.0));
                ones += 1.0;
            } else {
                coefs.push((m.x[l], -1.0));
            }
        }
        self.cuts.push(SparseRow::new(coefs, ones - 1.0));
    }

    /// Names the first constraint family whose removal makes the root relaxation feasible.
    fn diagnose(&mut self) -> Result<String> {
        let m = self.model;
        let mut lo: Vec<f64> = m.x.iter().map(|&j| m.lower[j]).collect();
        let mut hi: Vec<f64> = m.x.iter().map(|&j| m.upper[j]).collect();
        if self.relax(&lo, &hi, Relaxed::Nothing)?.is_some() {
            // fractional switches decouple voltages; probe the normal configuration instead
            let normal: Vec<f64> = m.network.normal_closed().iter().map(|&c| f64::from(u8::from(c))).collect();
            if (0..normal.len()).any(|l| normal[l] < lo[l] || normal[l] > hi[l])
                || self.relax(&normal, &normal, Relaxed::Nothing)?.is_some()
            {
                return Ok("relaxation is feasible but no radial configuration satisfies the constraints".into());
            }
            lo.clone_from(&normal);
            hi = normal;
        }
        let candidates = [
            Relaxed::VoltageBounds,
            Relaxed::Group(ConstraintGroup::Capacity),
            Relaxed::Thermal,
            Relaxed::Group(ConstraintGroup::AngleLimit),
            Relaxed::Group(ConstraintGroup::PowerFactor),
            Relaxed::Group(ConstraintGroup::Compensator),
            Relaxed::Group(ConstraintGroup::LoopCut),
        ];
        for c in candidates {
            if self.relax(&lo, &hi, c)?.is_some() {
                let name = match c {
                    Relaxed::VoltageBounds => "bus voltage limits".to_string(),
                    Relaxed::Thermal => "thermal limits".to_string(),
                    Relaxed::Group(g) => format!("{g:?} constraints"),
                    Relaxed::Nothing => unreachable!(),
                };
                return Ok(format!("{name} cannot be satisfied"));
            }
        }
        Ok("no single constraint family explains the infeasibility".into())
    }
}

/// Turns pairs `a'z <= b`, `-a'z <= -b` into one equality; interior-point
/// iterations stall on inequalities with no strict interior.
fn merge_opposite_rows(qp: &mut ConvexQp) {
    let key = |coefs: &[(usize, f64)], sign: f64| -> Vec<(usize, u64)> {
        let mut k: Vec<(usize, u64)> = coefs.iter().map(|&(j, a)| (j, (sign * a + 0.0).to_bits())).collect();
        k.sort_unstable();
        k
    };
    let mut index: HashMap<Vec<(usize, u64)>, usize> = HashMap::new();
    let mut paired = vec![false; qp.le.len()];
    for (r, row) in qp.le.iter().enumerate() {
        if let Some(&o) = index.get(&key(&row.coefs, -1.0)) {
            if !paired[o] && (row.rhs + qp.le[o].rhs).abs() <= ROW_TOL {
                paired[o] = true;
                paired[r] = true;
                continue;
            }
        }
        index.entry(key(&row.coefs, 1.0)).or_insert(r);
    }
    if !paired.contains(&true) {
        return;
    }
    let rows = std::mem::take(&mut qp.le);
    let mut seen = HashSet::new();
    for (r, row) in rows.into_iter().enumerate() {
        if !paired[r] {
            qp.le.push(row);
        } else if seen.insert(key(&row.coefs, 1.0)) && seen.insert(key(&row.coefs, -1.0)) {
            qp.eq.push(row);
        }
    }
}

fn open_key(closed: &[bool]) -> Vec<usize> {
    (0..closed.len()).filter(|&l| !closed[l]).collect()
}

fn extract(
    model: &MiqpModel,
    inc: &Incumbent,
    method: Method,
    status: SolveStatus,
    gap: f64,
    nodes: usize,
    wall_time_s: f64,
) -> ReconfigSolution {
    let net = model.network();
    let z = &inc.z;
    let weights = model.weights();
    let mut terms = ObjectiveTerms::default();
    for (l, br) in net.branches().iter().enumerate() {
        let (p, q) = (z[model.p_hat[l]], z[model.q_hat[l]]);
        terms.loss += weights.alpha * net.base_mva() * br.r * (p * p + q * q);
        if br.switchable {
            let x0 = if br.normally_open { 0.0 } else { 1.0 };
            let x = if inc.closed[l] { 1.0 } else { 0.0 };
            terms.switching += weights.beta * (x - x0) * (x - x0);
        }
    }
    terms.deviation = model.w.iter().map(|&j| weights.gamma * (1.0 - z[j]).powi(2)).sum();
    let svc_setpoints = model
        .q_svc
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|j| SvcSetpoint { bus: net.buses()[i].id, q_hat: z[j], q: z[j] / z[model.w[i]] }))
        .collect();
    ReconfigSolution {
        method,
        status,
        open_branches: ReconfigSolution::open_labels(net, &inc.closed),
        closed: inc.closed.clone(),
        svc_setpoints,
        objective_model: inc.objective,
        terms,
        w: model.w.iter().map(|&j| z[j]).collect(),
        p_hat: model.p_hat.iter().map(|&j| z[j]).collect(),
        q_hat: model.q_hat.iter().map(|&j| z[j]).collect(),
        gap,
        nodes,
        wall_time_s,
        evaluation: None,
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    /// Returns false when `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Bridges of the graph restricted to `active` edges, or `None` when it is
/// not connected.
fn bridges(n: usize, ends: &[(usize, usize)], active: &[bool], root: usize) -> Option<Vec<bool>> {
    let mut adj = vec![Vec::new(); n];
    for (l, &(a, b)) in ends.iter().enumerate() {
        if active[l] {
            adj[a].push((b, l));
            adj[b].push((a, l));
        }
    }
    let mut tin = vec![usize::MAX; n];
    let mut low = vec![usize::MAX; n];
    let mut bridge = vec![false; ends.len()];
    let mut timer = 1;
    tin[root] = 0;
    low[root] = 0;
    let mut stack = vec![(root, usize::MAX, 0usize)];
    while let Some(top) = stack.last_mut() {
        let (v, via) = (top.0, top.1);
        if top.2 < adj[v].len() {
            let (u, e) = adj[v][top.2];
            top.2 += 1;
            if e == via {
                continue;
            }
            if tin[u] == usize::MAX {
                tin[u] = timer;
                low[u] = timer;
                timer += 1;
                stack.push((u, e, 0));
            } else {
                low[v] = low[v].min(tin[u]);
            }
        } else {
            stack.pop();
            if let Some(parent) = stack.last() {
                let p = parent.0;
                low[p] = low[p].min(low[v]);
                if low[v] > tin[p] {
                    bridge[via] = true;
                }
            }
        }
    }
    tin.iter().all(|&t| t != usize::MAX).then_some(bridge)
}
