mod common;

use gridflow::acpf::{solve_acpf, two_bus_exact, DEFAULT_MAX_ITER, DEFAULT_TOL};
use gridflow::network::build_tree;
use gridflow::{BranchRecord, BusRecord, Network, NetworkParts};
use num_complex::Complex64;

/// Current-summation sweep written against the raw branch list: bus load
/// currents from the previous voltages, branch currents by summing the
/// subtree, voltages from the root down.
fn current_sweep(net: &Network, closed: &[bool]) -> Vec<f64> {
    let n = net.n_buses();
    let root = net.root();
    let mut adj = vec![Vec::new(); n];
    for l in (0..net.n_branches()).filter(|&l| closed[l]) {
        let (a, b) = net.ends(l);
        adj[a].push((b, l));
        adj[b].push((a, l));
    }
    let mut order = vec![root];
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        for &(v, l) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some((u, l));
                order.push(v);
            }
        }
    }
    let s: Vec<Complex64> = (0..n)
        .map(|i| {
            let (p, q) = net.injection(i);
            Complex64::new(p, q)
        })
        .collect();
    let mut v = vec![Complex64::new(net.v0(), 0.0); n];
    for _ in 0..1000 {
        let mut current: Vec<Complex64> = (0..n).map(|i| -(s[i] / v[i]).conj()).collect();
        for &j in order[1..].iter().rev() {
            let (p, _) = parent[j].unwrap();
            let cj = current[j];
            current[p] += cj;
        }
        let mut change = 0.0f64;
        for &j in &order[1..] {
            let (p, l) = parent[j].unwrap();
            let br = &net.branches()[l];
            let next = v[p] - Complex64::new(br.r, br.x) * current[j];
            change = change.max((next - v[j]).norm());
            v[j] = next;
        }
        if change < 1e-14 {
            break;
        }
    }
    v.iter().map(|c| c.norm()).collect()
}

fn fixtures() -> Vec<(&'static str, Network)> {
    vec![
        ("ieee33", common::ieee33()),
        ("ieee33 with DG", common::parse(gridflow::fixtures::IEEE33_DG)),
        ("ieee33 with DG and SVC", common::parse(gridflow::fixtures::IEEE33_DG_SVC)),
        ("case141", common::case141()),
    ]
}

#[test]
fn sweep_matches_current_summation_oracle() {
    for (name, net) in fixtures() {
        for scale in [1.0, 2.0] {
            let net = net.with_load_scale(scale);
            let closed = net.normal_closed();
            let topo = build_tree(&net, &closed).unwrap();
            let ac = solve_acpf(&net, &topo, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            let oracle = current_sweep(&net, &closed);
            let worst = ac.v.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-8, "{name} at {scale}: max |dV| {worst:e}");
        }
    }
}

#[test]
fn residual_and_loss_identity_on_fixtures() {
    for (name, net) in fixtures() {
        let topo = build_tree(&net, &net.normal_closed()).unwrap();
        let ac = solve_acpf(&net, &topo, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(ac.residual <= 1e-10, "{name}: residual {:e}", ac.residual);

        // loss as the sum of R |S|^2 / V^2 at each sending end
        let mut loss = 0.0;
        for l in 0..net.n_branches() {
            if let Some(s) = topo.sending_bus(l) {
                let br = &net.branches()[l];
                loss += br.r * (ac.p_flow[l].powi(2) + ac.q_flow[l].powi(2)) / ac.v[s].powi(2);
            }
        }
        assert!((loss - ac.loss_total).abs() < 1e-10, "{name}: {loss} vs {}", ac.loss_total);
        assert!(ac.loss_total >= 0.0);

        // supply = demand - generation + losses
        let (p_inj, _) = net.injections();
        let net_demand: f64 = -p_inj.iter().enumerate().filter(|&(i, _)| i != net.root()).map(|(_, p)| p).sum::<f64>();
        assert!((ac.p_root - net_demand - ac.loss_total).abs() < 1e-9, "{name}: balance");
    }
}

#[test]
fn bus_power_conservation() {
    let net = common::ieee33();
    let topo = build_tree(&net, &net.normal_closed()).unwrap();
    let ac = solve_acpf(&net, &topo, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    for j in 0..net.n_buses() {
        if j == net.root() {
            continue;
        }
        let parent = topo.parent(j).unwrap();
        let br = &net.branches()[parent.branch];
        let i2 = (ac.p_flow[parent.branch].powi(2) + ac.q_flow[parent.branch].powi(2)) / ac.v[parent.bus].powi(2);
        let mut p = ac.p_flow[parent.branch] - br.r * i2;
        let mut q = ac.q_flow[parent.branch] - br.x * i2;
        for &c in topo.children(j) {
            let l = topo.parent(c).unwrap().branch;
            p -= ac.p_flow[l];
            q -= ac.q_flow[l];
        }
        let (pi, qi) = net.injection(j);
        assert!((p + pi).abs() < 1e-9 && (q + qi).abs() < 1e-9, "bus {j}");
    }
}

#[test]
fn two_bus_closed_form_agrees_with_sweep() {
    for (r, x, p, q) in [(0.05, 0.05, 0.5, 0.3), (0.01, 0.03, 1.2, 0.4), (0.1, 0.02, 0.2, -0.1)] {
        let net = Network::new(NetworkParts {
            name: None,
            base_mva: 1.0,
            base_kv: None,
            psp: gridflow::BusId(1),
            v0: 1.0,
            buses: vec![BusRecord::load(1, 0.0, 0.0), BusRecord::load(2, p, q)],
            branches: vec![BranchRecord::line(1, 2, r, x)],
        })
        .unwrap();
        let topo = build_tree(&net, &[true]).unwrap();
        let ac = solve_acpf(&net, &topo, 1e-13, DEFAULT_MAX_ITER).unwrap();
        let exact = two_bus_exact(r, x, p, q, 1.0).unwrap();
        assert!((ac.v[1] - exact.v_j).abs() < 1e-9, "{} vs {}", ac.v[1], exact.v_j);
    }
}

#[test]
fn zero_load_is_flat_on_any_tree() {
    let net = common::ieee33().with_load_scale(0.0);
    let mut closed = net.normal_closed();
    // swap a tie in for the branch it bypasses
    let tie = net.branch_by_label("21-8").unwrap();
    let cut = net.branch_by_label("7-8").unwrap();
    closed[tie] = true;
    closed[cut] = false;
    let topo = build_tree(&net, &closed).unwrap();
    let ac = solve_acpf(&net, &topo, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert_eq!(ac.iterations, 1);
    assert!(ac.v.iter().all(|&v| v == net.v0()));
    assert!(ac.p_flow.iter().chain(&ac.q_flow).all(|&f| f == 0.0));
}

#[test]
fn heavy_load_lowest_voltage() {
    let net = common::ieee33().with_load_scale(2.5);
    let topo = build_tree(&net, &net.normal_closed()).unwrap();
    let ac = solve_acpf(&net, &topo, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert!((ac.min_voltage() - 0.813).abs() <= 0.005, "{}", ac.min_voltage());
}
