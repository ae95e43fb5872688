//! Per-unit network description and the topology structures derived from it.

mod case;
mod loops;
mod topology;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use case::{parse_case, serialize_case, BranchDoc, BusDoc, CaseDocument, DgDoc, SvcDoc};
pub use loops::{loop_structure, FundamentalLoop, LoopStructure, OverlapSet};
pub use topology::{build_tree, path_incidence, Parent, RadialTopology};

pub const DEFAULT_V_MIN: f64 = 0.9;
pub const DEFAULT_V_MAX: f64 = 1.1;
pub const DEFAULT_DELTA_CAP_DEG: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Fixed complex injection, e.g. a DG forecast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerInjection<T> {
    pub p: T,
    pub q: T,
}

/// Reactive range of a static VAR compensator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvcRange<T> {
    pub q_min: T,
    pub q_max: T,
}

/// Bus data in per-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct BusRecord<T> {
    pub id: BusId,
    pub p_demand: T,
    pub q_demand: T,
    pub dg: Option<PowerInjection<T>>,
    pub svc: Option<SvcRange<T>>,
    pub v_min: T,
    pub v_max: T,
}

impl<T: Scalar> BusRecord<T> {
    pub fn load(id: u32, p_demand: T, q_demand: T) -> Self {
        Self {
            id: BusId(id),
            p_demand,
            q_demand,
            dg: None,
            svc: None,
            v_min: T::of(DEFAULT_V_MIN),
            v_max: T::of(DEFAULT_V_MAX),
        }
    }
}

/// Branch data in per-unit; `from -> to` is the nominal orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchRecord<T> {
    pub from: BusId,
    pub to: BusId,
    pub r: T,
    pub x: T,
    pub switchable: bool,
    pub normally_open: bool,
    pub p_cap: Option<T>,
    pub q_cap: Option<T>,
    pub i_cap: Option<T>,
    /// Angle-difference limit in radians.
    pub delta_cap: T,
}

impl<T: Scalar> BranchRecord<T> {
    pub fn line(from: u32, to: u32, r: T, x: T) -> Self {
        Self {
            from: BusId(from),
            to: BusId(to),
            r,
            x,
            switchable: false,
            normally_open: false,
            p_cap: None,
            q_cap: None,
            i_cap: None,
            delta_cap: T::of(DEFAULT_DELTA_CAP_DEG.to_radians()),
        }
    }

    pub fn switchable(mut self) -> Self {
        self.switchable = true;
        self
    }

    pub fn tie(mut self) -> Self {
        self.switchable = true;
        self.normally_open = true;
        self
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.from, self.to)
    }
}

/// Everything needed to build a [`Network`]; validated by [`Network::new`].
#[derive(Debug, Clone)]
pub struct NetworkParts<T> {
    pub name: Option<String>,
    pub base_mva: T,
    pub base_kv: Option<T>,
    pub psp: BusId,
    pub v0: T,
    pub buses: Vec<BusRecord<T>>,
    pub branches: Vec<BranchRecord<T>>,
}

/// Immutable per-unit description of a distribution feeder with a single
/// power supply point.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    name: Option<String>,
    base_mva: T,
    base_kv: Option<T>,
    psp: BusId,
    v0: T,
    buses: Vec<BusRecord<T>>,
    branches: Vec<BranchRecord<T>>,
    root: usize,
    ends: Vec<(usize, usize)>,
    index: HashMap<BusId, usize>,
}

impl<T: Scalar> Network<T> {
    pub fn new(parts: NetworkParts<T>) -> Result<Self> {
        let NetworkParts { name, base_mva, base_kv, psp, v0, buses, branches } = parts;
        if !(base_mva > T::zero()) {
            return Err(Error::Validation("base_mva must be positive".into()));
        }
        if let Some(kv) = base_kv {
            if !(kv > T::zero()) {
                return Err(Error::Validation("base_kv must be positive".into()));
            }
        }
        if !(v0 > T::zero()) {
            return Err(Error::Validation("v0 must be positive".into()));
        }
        let mut index = HashMap::with_capacity(buses.len());
        for (i, b) in buses.iter().enumerate() {
            if index.insert(b.id, i).is_some() {
                return Err(Error::Validation(format!("duplicate bus id {}", b.id)));
            }
            if !(b.v_min < b.v_max) {
                return Err(Error::Validation(format!("bus {}: v_min must be below v_max", b.id)));
            }
            let finite = [b.p_demand, b.q_demand, b.v_min, b.v_max].iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::Validation(format!("bus {}: non-finite data", b.id)));
            }
            if let Some(svc) = b.svc {
                if !(svc.q_min <= svc.q_max) {
                    return Err(Error::Validation(format!("bus {}: SVC q_min must not exceed q_max", b.id)));
                }
            }
        }
        let root = *index.get(&psp).ok_or_else(|| Error::Validation(format!("supply point {psp} is not a bus")))?;
        let mut ends = Vec::with_capacity(branches.len());
        for br in &branches {
            let a = *index.get(&br.from).ok_or_else(|| {
                Error::Validation(format!("branch {} references unknown bus {}", br.label(), br.from))
            })?;
            let b = *index
                .get(&br.to)
                .ok_or_else(|| Error::Validation(format!("branch {} references unknown bus {}", br.label(), br.to)))?;
            if a == b {
                return Err(Error::Validation(format!("branch {} is a self-loop", br.label())));
            }
            if !(br.r >= T::zero() && br.x >= T::zero()) || !br.r.is_finite() || !br.x.is_finite() {
                return Err(Error::Validation(format!(
                    "branch {}: impedance must be finite and non-negative",
                    br.label()
                )));
            }
            if br.r == T::zero() && br.x == T::zero() {
                return Err(Error::Validation(format!(
                    "branch {}: zero-impedance branches are not supported",
                    br.label()
                )));
            }
            if br.normally_open && !br.switchable {
                return Err(Error::Validation(format!(
                    "branch {}: normally-open branches must be switchable",
                    br.label()
                )));
            }
            if !(br.delta_cap > T::zero()) {
                return Err(Error::Validation(format!("branch {}: delta_cap must be positive", br.label())));
            }
            for cap in [br.p_cap, br.q_cap, br.i_cap].into_iter().flatten() {
                if !(cap > T::zero()) {
                    return Err(Error::Validation(format!("branch {}: capacities must be positive", br.label())));
                }
            }
            ends.push((a, b));
        }
        let net = Self { name, base_mva, base_kv, psp, v0, buses, branches, root, ends, index };
        if let Some(bus) = net.first_unreachable(&vec![true; net.branches.len()]) {
            return Err(Error::Validation(format!(
                "bus {} is not connected to the supply point even with all branches closed",
                net.buses[bus].id
            )));
        }
        Ok(net)
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn base_mva(&self) -> T {
        self.base_mva
    }

    pub fn base_kv(&self) -> Option<T> {
        self.base_kv
    }

    pub fn psp(&self) -> BusId {
        self.psp
    }

    pub fn v0(&self) -> T {
        self.v0
    }

    /// Index of the supply-point bus.
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn buses(&self) -> &[BusRecord<T>] {
        &self.buses
    }

    pub fn branches(&self) -> &[BranchRecord<T>] {
        &self.branches
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Bus indices of the nominal `(from, to)` ends of branch `l`.
    pub fn ends(&self, l: usize) -> (usize, usize) {
        self.ends[l]
    }

    pub fn branch_label(&self, l: usize) -> String {
        self.branches[l].label()
    }

    /// Finds a branch by its `"from-to"` label, in either orientation.
    pub fn branch_by_label(&self, label: &str) -> Option<usize> {
        let (a, b) = label.split_once('-')?;
        let a = BusId(a.trim().parse().ok()?);
        let b = BusId(b.trim().parse().ok()?);
        self.branches.iter().position(|br| (br.from == a && br.to == b) || (br.from == b && br.to == a))
    }

    /// Net fixed injection `(P, Q)` at bus `i`: DG forecast minus demand.
    pub fn injection(&self, i: usize) -> (T, T) {
        let b = &self.buses[i];
        let (pg, qg) = b.dg.map_or((T::zero(), T::zero()), |g| (g.p, g.q));
        (pg - b.p_demand, qg - b.q_demand)
    }

    pub fn injections(&self) -> (Vec<T>, Vec<T>) {
        (0..self.n_buses()).map(|i| self.injection(i)).unzip()
    }

    /// Branch states of the normal configuration (closed unless normally open).
    pub fn normal_closed(&self) -> Vec<bool> {
        self.branches.iter().map(|b| !b.normally_open).collect()
    }

    pub fn svc_buses(&self) -> Vec<usize> {
        (0..self.n_buses()).filter(|&i| i != self.root && self.buses[i].svc.is_some()).collect()
    }

    pub fn dg_buses(&self) -> Vec<usize> {
        (0..self.n_buses()).filter(|&i| i != self.root && self.buses[i].dg.is_some()).collect()
    }

    /// Copy with all demands multiplied by `scale` (DG forecasts unchanged).
    pub fn with_load_scale(&self, scale: T) -> Self {
        let mut out = self.clone();
        for b in &mut out.buses {
            b.p_demand = b.p_demand * scale;
            b.q_demand = b.q_demand * scale;
        }
        out
    }

    /// Copy with uniform voltage limits on every bus.
    pub fn with_v_limits(&self, v_min: T, v_max: T) -> Result<Self> {
        if !(v_min < v_max) {
            return Err(Error::Validation("v_min must be below v_max".into()));
        }
        let mut out = self.clone();
        for b in &mut out.buses {
            b.v_min = v_min;
            b.v_max = v_max;
        }
        Ok(out)
    }

    /// Copy where the given physical compensator outputs are folded into
    /// fixed injections and the compensators are removed.
    pub fn with_fixed_svc(&self, setpoints: &[(usize, T)]) -> Self {
        let mut out = self.clone();
        for &(i, q) in setpoints {
            let b = &mut out.buses[i];
            let dg = b.dg.get_or_insert(PowerInjection { p: T::zero(), q: T::zero() });
            dg.q = dg.q + q;
            b.svc = None;
        }
        out
    }

    /// Copy with every branch marked switchable.
    pub fn all_switchable(&self) -> Self {
        let mut out = self.clone();
        for b in &mut out.branches {
            b.switchable = true;
        }
        out
    }

    pub fn map_scalar<U: Scalar>(&self) -> Network<U> {
        let c = |v: T| U::of(v.to_f64_lossy());
        Network {
            name: self.name.clone(),
            base_mva: c(self.base_mva),
            base_kv: self.base_kv.map(c),
            psp: self.psp,
            v0: c(self.v0),
            buses: self
                .buses
                .iter()
                .map(|b| BusRecord {
                    id: b.id,
                    p_demand: c(b.p_demand),
                    q_demand: c(b.q_demand),
                    dg: b.dg.map(|g| PowerInjection { p: c(g.p), q: c(g.q) }),
                    svc: b.svc.map(|s| SvcRange { q_min: c(s.q_min), q_max: c(s.q_max) }),
                    v_min: c(b.v_min),
                    v_max: c(b.v_max),
                })
                .collect(),
            branches: self
                .branches
                .iter()
                .map(|b| BranchRecord {
                    from: b.from,
                    to: b.to,
                    r: c(b.r),
                    x: c(b.x),
                    switchable: b.switchable,
                    normally_open: b.normally_open,
                    p_cap: b.p_cap.map(c),
                    q_cap: b.q_cap.map(c),
                    i_cap: b.i_cap.map(c),
                    delta_cap: c(b.delta_cap),
                })
                .collect(),
            root: self.root,
            ends: self.ends.clone(),
            index: self.index.clone(),
        }
    }

    /// Adjacency lists `(neighbour, branch)` restricted to `closed` branches.
    pub(crate) fn adjacency(&self, closed: &[bool]) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n_buses()];
        for (l, &(a, b)) in self.ends.iter().enumerate() {
            if closed[l] {
                adj[a].push((b, l));
                adj[b].push((a, l));
            }
        }
        adj
    }

    fn first_unreachable(&self, closed: &[bool]) -> Option<usize> {
        let adj = self.adjacency(closed);
        let mut seen = vec![false; self.n_buses()];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.iter().position(|s| !s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parts() -> NetworkParts<f64> {
        NetworkParts {
            name: None,
            base_mva: 1.0,
            base_kv: None,
            psp: BusId(0),
            v0: 1.0,
            buses: vec![BusRecord::load(0, 0.0, 0.0), BusRecord::load(1, 0.5, 0.3)],
            branches: vec![BranchRecord::line(0, 1, 0.05, 0.05)],
        }
    }

    #[test]
    fn accepts_two_bus_network() {
        let net = Network::new(parts()).unwrap();
        assert_eq!(net.n_buses(), 2);
        assert_eq!(net.injection(1), (-0.5, -0.3));
        assert_eq!(net.branch_by_label("1-0"), Some(0));
    }

    #[test]
    fn rejects_duplicate_bus() {
        let mut p = parts();
        p.buses.push(BusRecord::load(1, 0.0, 0.0));
        assert!(matches!(Network::new(p), Err(Error::Validation(m)) if m.contains("duplicate")));
    }

    #[test]
    fn rejects_zero_impedance_and_bad_limits() {
        let mut p = parts();
        p.branches[0].r = 0.0;
        p.branches[0].x = 0.0;
        assert!(Network::new(p).is_err());

        let mut p = parts();
        p.buses[1].v_min = 1.2;
        assert!(Network::new(p).is_err());

        let mut p = parts();
        p.branches[0].normally_open = true;
        assert!(Network::new(p).is_err());
    }

    #[test]
    fn rejects_islands() {
        let mut p = parts();
        p.buses.push(BusRecord::load(7, 0.1, 0.0));
        assert!(Network::new(p).is_err());
    }

    #[test]
    fn load_scaling_keeps_dg() {
        let mut p = parts();
        p.buses[1].dg = Some(PowerInjection { p: 0.2, q: 0.1 });
        let net = Network::new(p).unwrap().with_load_scale(2.0);
        let (pi, qi) = net.injection(1);
        assert!((pi - (0.2 - 1.0)).abs() < 1e-15);
        assert!((qi - (0.1 - 0.6)).abs() < 1e-15);
    }
}
