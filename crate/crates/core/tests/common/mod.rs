#![allow(dead_code)]

use gridflow::network::{BranchRecord, BusRecord, NetworkParts, PowerInjection, SvcRange};
use gridflow::Network;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn ieee33() -> Network {
    gridflow::fixtures::ieee33().unwrap()
}

pub fn case141() -> Network {
    gridflow::fixtures::case141().unwrap()
}

pub fn parse(text: &str) -> Network {
    gridflow::network::parse_case(text).unwrap()
}

/// Small random feeder: a random tree on `n` buses plus `ties` normally-open
/// branches, every branch switchable. Loads are light enough that every
/// radial configuration stays within the default voltage limits.
pub fn random_feeder(seed: u64, n: usize, ties: usize, with_dg: bool, with_svc: bool) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buses = vec![BusRecord::load(1, 0.0, 0.0)];
    for id in 2..=n as u32 {
        let p = rng.gen_range(0.005..0.04);
        let q = p * rng.gen_range(0.3..0.7);
        buses.push(BusRecord::load(id, p, q));
    }
    let mut branches = Vec::new();
    let mut edges = std::collections::HashSet::new();
    for id in 2..=n as u32 {
        let parent = rng.gen_range(1..id);
        edges.insert((parent, id));
        branches
            .push(BranchRecord::line(parent, id, rng.gen_range(0.002..0.02), rng.gen_range(0.002..0.02)).switchable());
    }
    let mut added = 0;
    while added < ties {
        let a = rng.gen_range(1..=n as u32);
        let b = rng.gen_range(1..=n as u32);
        let (a, b) = (a.min(b), a.max(b));
        if a == b || !edges.insert((a, b)) {
            continue;
        }
        branches.push(BranchRecord::line(a, b, rng.gen_range(0.002..0.02), rng.gen_range(0.002..0.02)).tie());
        added += 1;
    }
    if with_dg {
        let k = rng.gen_range(1..n);
        buses[k].dg = Some(PowerInjection { p: 0.05, q: 0.0 });
    }
    if with_svc {
        let k = rng.gen_range(1..n);
        buses[k].svc = Some(SvcRange { q_min: -0.05, q_max: 0.05 });
    }
    Network::new(NetworkParts {
        name: Some(format!("random-{seed}")),
        base_mva: 10.0,
        base_kv: None,
        psp: gridflow::BusId(1),
        v0: 1.0,
        buses,
        branches,
    })
    .unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}
