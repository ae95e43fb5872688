mod common;

use gridflow::acpf::{solve_acpf, DEFAULT_MAX_ITER, DEFAULT_TOL};
use gridflow::dense::DenseMatrix;
use gridflow::linear_flow::{
    compare_errors, path_sum_flows, recover_branch_flows, solve_md_closed_form, solve_md_fixed_point,
    solve_md_path_sum, solve_simplified_distflow, DEFAULT_FIXED_POINT_MAX_ITER, DEFAULT_FIXED_POINT_TOL,
};
use gridflow::network::{build_tree, path_incidence};
use gridflow::Network;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loaded_fixtures() -> Vec<(String, Network)> {
    let mut out = Vec::new();
    for (name, net) in [
        ("ieee33", common::ieee33()),
        ("ieee33 DG", common::parse(gridflow::fixtures::IEEE33_DG)),
        ("ieee33 DG+SVC", common::parse(gridflow::fixtures::IEEE33_DG_SVC)),
        ("case141", common::case141()),
    ] {
        for scale in [1.0, 2.5] {
            out.push((format!("{name} x{scale}"), net.with_load_scale(scale)));
        }
    }
    out.push(("case141 x3".into(), common::case141().with_load_scale(3.0)));
    out
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn three_routes_agree_on_fixtures() {
    for (name, net) in loaded_fixtures() {
        let topo = build_tree(&net, &net.normal_closed()).unwrap();
        let closed = solve_md_closed_form(&net, &topo).unwrap();
        let fixed = solve_md_fixed_point(&net, &topo, DEFAULT_FIXED_POINT_TOL, DEFAULT_FIXED_POINT_MAX_ITER).unwrap();
        let sweep = solve_md_path_sum(&net, &topo).unwrap();
        for other in [&fixed, &sweep] {
            assert!(max_diff(&closed.w, &other.w) < 1e-10, "{name}: W");
            assert!(max_diff(&closed.p_hat, &other.p_hat) < 1e-10, "{name}: P_hat");
            assert!(max_diff(&closed.q_hat, &other.q_hat) < 1e-10, "{name}: Q_hat");
            assert!(max_diff(&closed.p_flow, &other.p_flow) < 1e-10, "{name}: P");
        }
        for sol in [&closed, &fixed, &sweep] {
            assert!(sol.kcl_residual(&net, &topo) <= 1e-12, "{name}: KCL");
            let v_from_w: Vec<f64> = sol.w.iter().map(|w| 2.0 - w).collect();
            assert_eq!(sol.v, v_from_w);
        }
    }
}

#[test]
fn path_sums_match_recursive_accumulation() {
    let net = common::ieee33();
    let topo = build_tree(&net, &net.normal_closed()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let p: Vec<f64> = (0..net.n_buses()).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let q: Vec<f64> = (0..net.n_buses()).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let (fp, fq) = path_sum_flows(&topo, &p, &q);

        fn subtree(topo: &gridflow::network::RadialTopology, bus: usize, inj: &[f64]) -> f64 {
            inj[bus] + topo.children(bus).iter().map(|&c| subtree(topo, c, inj)).sum::<f64>()
        }
        for bus in 0..net.n_buses() {
            if let Some(parent) = topo.parent(bus) {
                assert!((fp[parent.branch] + subtree(&topo, bus, &p)).abs() < 1e-13);
                assert!((fq[parent.branch] + subtree(&topo, bus, &q)).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn recovered_flows_match_matrix_form() {
    for (name, net) in loaded_fixtures() {
        let topo = build_tree(&net, &net.normal_closed()).unwrap();
        let sol = solve_md_path_sum(&net, &topo).unwrap();
        let t: DenseMatrix<f64> = path_incidence(&topo);
        let (p, q) = net.injections();
        let cols = topo.columns();
        let pw: Vec<f64> = cols.iter().map(|&b| p[b] * sol.w[b]).collect();
        let qw: Vec<f64> = cols.iter().map(|&b| q[b] * sol.w[b]).collect();
        let p_hat = t.mul_vec(&pw);
        let q_hat = t.mul_vec(&qw);
        let (p_flow, q_flow) = recover_branch_flows(&net, &topo, &sol.w, &sol.p_hat, &sol.q_hat).unwrap();
        for (r, &l) in topo.rows().iter().enumerate() {
            let w_send = sol.w[topo.sending_bus(l).unwrap()];
            assert!((p_flow[l] + p_hat[r] / w_send).abs() < 1e-12, "{name}: P on {l}");
            assert!((q_flow[l] + q_hat[r] / w_send).abs() < 1e-12, "{name}: Q on {l}");
        }
    }
}

#[test]
fn modified_beats_simplified_on_voltage() {
    for net in [common::ieee33(), common::case141()] {
        for scale in [1.0, 1.5, 2.0, 2.5, 3.0] {
            let net = net.with_load_scale(scale);
            let topo = build_tree(&net, &net.normal_closed()).unwrap();
            let Ok(ac) = solve_acpf(&net, &topo, DEFAULT_TOL, DEFAULT_MAX_ITER) else {
                continue;
            };
            let md = compare_errors(&net, &solve_md_path_sum(&net, &topo).unwrap(), &ac).unwrap();
            let sd = compare_errors(&net, &solve_simplified_distflow(&net, &topo).unwrap(), &ac).unwrap();
            assert!(md.voltage.avg_pct < sd.voltage.avg_pct, "x{scale}");
            assert!(md.voltage.max_pct < sd.voltage.max_pct, "x{scale}");
            for e in [&md.voltage, &md.p_flow, &md.q_flow, &sd.voltage, &sd.p_flow, &sd.q_flow] {
                assert!(e.max_pct >= e.avg_pct && e.avg_pct >= 0.0);
            }
        }
    }
}

#[test]
fn zero_load_is_a_fixpoint_for_every_model() {
    for net in [common::ieee33(), common::case141()] {
        let net = net.with_load_scale(0.0);
        let topo = build_tree(&net, &net.normal_closed()).unwrap();
        let v0 = net.v0();
        let fixed = solve_md_fixed_point(&net, &topo, DEFAULT_FIXED_POINT_TOL, DEFAULT_FIXED_POINT_MAX_ITER).unwrap();
        assert_eq!(fixed.iterations, Some(1));
        for sol in [solve_md_closed_form(&net, &topo).unwrap(), fixed, solve_simplified_distflow(&net, &topo).unwrap()]
        {
            assert!(sol.v.iter().all(|&v| (v - v0).abs() < 1e-15));
            assert!(sol.p_flow.iter().chain(&sol.q_flow).all(|&f| f == 0.0));
        }
        let ac = solve_acpf(&net, &topo, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(ac.v.iter().all(|&v| v == v0));
    }
}

#[test]
fn single_precision_tracks_double() {
    let net = common::ieee33();
    let topo = build_tree(&net, &net.normal_closed()).unwrap();
    let wide = solve_md_path_sum(&net, &topo).unwrap();
    let narrow_net: gridflow::network::Network<f32> = net.map_scalar();
    let narrow = solve_md_path_sum(&narrow_net, &topo).unwrap();
    for (a, b) in wide.v.iter().zip(&narrow.v) {
        assert!((a - f64::from(*b)).abs() < 1e-5);
    }
    let narrow_ac = solve_acpf(&narrow_net, &topo, 1e-5f32, DEFAULT_MAX_ITER).unwrap();
    let ac = solve_acpf(&net, &topo, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert!((ac.min_voltage() - f64::from(narrow_ac.min_voltage())).abs() < 1e-4);
}
