//! JSON case documents.
//!
//! Powers are in MW / MVAr and converted to per-unit on `base_mva`. Branch
//! impedances are in ohms when `base_kv` is given and in per-unit otherwise.
//! `i_cap` is a per-unit current, `delta_cap` is in degrees.

use serde::{Deserialize, Serialize};

use super::{
    BranchRecord, BusId, BusRecord, Network, NetworkParts, PowerInjection, SvcRange, DEFAULT_DELTA_CAP_DEG,
    DEFAULT_V_MAX, DEFAULT_V_MIN,
};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub base_mva: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_kv: Option<f64>,
    pub psp: u32,
    pub v0: f64,
    pub buses: Vec<BusDoc>,
    pub branches: Vec<BranchDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusDoc {
    pub id: u32,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub p_demand: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub q_demand: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dg: Option<DgDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svc: Option<SvcDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgDoc {
    pub p: f64,
    #[serde(default)]
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvcDoc {
    pub q_min: f64,
    pub q_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchDoc {
    pub from: u32,
    pub to: u32,
    pub r: f64,
    pub x: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub switchable: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub normally_open: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_cap: Option<f64>,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

fn is_false(v: &bool) -> bool {
    !*v
}

/// Rounds to 12 significant digits so that unit conversions round-trip
/// exactly for decimal inputs of that precision.
fn sig12(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

impl CaseDocument {
    pub fn into_network<T: Scalar>(self) -> Result<Network<T>> {
        let base = self.base_mva;
        let zbase = self.base_kv.map(|kv| kv * kv / base);
        let pu = |mw: f64| T::of(mw / base);
        let z = |ohm: f64| T::of(zbase.map_or(ohm, |zb| ohm / zb));
        let buses = self
            .buses
            .into_iter()
            .map(|b| BusRecord {
                id: BusId(b.id),
                p_demand: pu(b.p_demand),
                q_demand: pu(b.q_demand),
                dg: b.dg.map(|g| PowerInjection { p: pu(g.p), q: pu(g.q) }),
                svc: b.svc.map(|s| SvcRange { q_min: pu(s.q_min), q_max: pu(s.q_max) }),
                v_min: T::of(b.v_min.unwrap_or(DEFAULT_V_MIN)),
                v_max: T::of(b.v_max.unwrap_or(DEFAULT_V_MAX)),
            })
            .collect();
        let branches = self
            .branches
            .into_iter()
            .map(|b| BranchRecord {
                from: BusId(b.from),
                to: BusId(b.to),
                r: z(b.r),
                x: z(b.x),
                switchable: b.switchable,
                normally_open: b.normally_open,
                p_cap: b.p_cap.map(pu),
                q_cap: b.q_cap.map(pu),
                i_cap: b.i_cap.map(T::of),
                delta_cap: T::of(b.delta_cap.unwrap_or(DEFAULT_DELTA_CAP_DEG).to_radians()),
            })
            .collect();
        Network::new(NetworkParts {
            name: self.name,
            base_mva: T::of(base),
            base_kv: self.base_kv.map(T::of),
            psp: BusId(self.psp),
            v0: T::of(self.v0),
            buses,
            branches,
        })
    }

    pub fn from_network<T: Scalar>(net: &Network<T>) -> Self {
        let f = |v: T| v.to_f64_lossy();
        let base = f(net.base_mva());
        let base_kv = net.base_kv().map(f);
        let zbase = base_kv.map(|kv| kv * kv / base);
        let mw = |v: T| sig12(f(v) * base);
        let ohm = |v: T| zbase.map_or(f(v), |zb| sig12(f(v) * zb));
        let default_delta = DEFAULT_DELTA_CAP_DEG.to_radians();
        let limit = |v: T, default: f64| {
            let v = f(v);
            (v != default).then_some(v)
        };
        Self {
            name: net.name().map(str::to_owned),
            base_mva: base,
            base_kv,
            psp: net.psp().0,
            v0: f(net.v0()),
            buses: net
                .buses()
                .iter()
                .map(|b| BusDoc {
                    id: b.id.0,
                    p_demand: mw(b.p_demand),
                    q_demand: mw(b.q_demand),
                    dg: b.dg.map(|g| DgDoc { p: mw(g.p), q: mw(g.q) }),
                    svc: b.svc.map(|s| SvcDoc { q_min: mw(s.q_min), q_max: mw(s.q_max) }),
                    v_min: limit(b.v_min, DEFAULT_V_MIN),
                    v_max: limit(b.v_max, DEFAULT_V_MAX),
                })
                .collect(),
            branches: net
                .branches()
                .iter()
                .map(|b| BranchDoc {
                    from: b.from.0,
                    to: b.to.0,
                    r: ohm(b.r),
                    x: ohm(b.x),
                    switchable: b.switchable,
                    normally_open: b.normally_open,
                    p_cap: b.p_cap.map(mw),
                    q_cap: b.q_cap.map(mw),
                    i_cap: b.i_cap.map(f),
                    delta_cap: (f(b.delta_cap) != default_delta).then(|| sig12(f(b.delta_cap).to_degrees())),
                })
                .collect(),
        }
    }
}

/// Parses a JSON case document into a validated per-unit network.
pub fn parse_case<T: Scalar>(text: &str) -> Result<Network<T>> {
    let doc: CaseDocument = serde_json::from_str(text)?;
    doc.into_network()
}

/// Serializes a network back into the JSON case schema.
pub fn serialize_case<T: Scalar>(net: &Network<T>) -> String {
    serde_json::to_string_pretty(&CaseDocument::from_network(net)).expect("case document is always serializable")
}
