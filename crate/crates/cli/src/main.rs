//! `gridflow`: power flows, linear-model error tables and switch
//! reconfiguration from the command line.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 the closed branches
//! do not form a radial tree, 3 infeasible, 4 search budget exhausted.

mod scenario;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use gridflow::acpf::{solve_acpf, DEFAULT_MAX_ITER, DEFAULT_TOL};
use gridflow::linear_flow::{
    compare_errors, solve_md_closed_form, solve_simplified_distflow, write_branch_trace, write_bus_trace, ErrorReport,
};
use gridflow::network::build_tree;
use gridflow::reconfig::{
    build_miqp, enumerate_radial, evaluate_with_acpf, solve_miqp, EnumerationOptions, MiqpOptions, ObjectiveWeights,
    ReconfigSolution, SolveOptions, SolveStatus,
};
use gridflow::{AcSolution, Error, Network};
use serde::Serialize;

use scenario::{check_scale, load_case, ScenarioDescriptor};

#[derive(Parser)]
#[command(name = "gridflow", version, about = "Linear branch-flow analysis and reconfiguration of radial feeders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one power flow on the normal configuration and write traces.
    Pf(PfArgs),
    /// Tabulate linear-model errors against the AC power flow.
    Compare(CompareArgs),
    /// Choose switch states and compensator outputs for a scenario.
    Reconfig(ReconfigArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Model {
    /// Modified DistFlow.
    Md,
    /// Simplified DistFlow.
    Sd,
    /// Exact AC power flow.
    Acpf,
}

#[derive(Args)]
struct PfArgs {
    /// Case file or bundled fixture name (ieee33, ieee33_dg, ieee33_dg_svc, case141).
    case: String,
    #[arg(long, value_enum, default_value_t = Model::Md)]
    model: Model,
    /// Multiplier on every load.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    scale: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    case: String,
    /// Comma-separated load multipliers.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    scale: Vec<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReconfigArgs {
    /// Scenario descriptor (JSON).
    scenario: PathBuf,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Overlapping-loop cuts on or off.
    #[arg(long, action = ArgAction::Set)]
    loop_cuts: Option<bool>,
    /// Minimum power factor at the supply point.
    #[arg(long)]
    pf_limit: Option<f64>,
    /// Uniform lower voltage limit (upper defaults to 1.1).
    #[arg(long)]
    vmin: Option<f64>,
    /// Uniform upper voltage limit (lower defaults to 0.9).
    #[arg(long)]
    vmax: Option<f64>,
    /// Cross-check against exhaustive enumeration.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative optimality gap.
    #[arg(long)]
    gap: Option<f64>,
    /// Seconds before the search stops with its incumbent.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Solve twice and fail unless both runs agree bit for bit.
    #[arg(long)]
    seedless: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors share code 1 with other input errors; 2 is reserved
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::Pf(args) => cmd_pf(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Reconfig(args) => cmd_reconfig(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::NotRadial { .. } | Error::Disconnected { .. }) => 2,
        Some(Error::Infeasible(_)) => 3,
        Some(Error::Incomplete { .. }) => 4,
        _ => 1,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("GRIDFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("GRIDFLOW_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn normal_acpf(net: &Network) -> Result<AcSolution> {
    let topo = build_tree(net, &net.normal_closed())?;
    Ok(solve_acpf(net, &topo, DEFAULT_TOL, DEFAULT_MAX_ITER)?)
}

fn linear_errors(net: &Network, model: Model, ac: &AcSolution) -> Result<(gridflow::LinearSolution, ErrorReport)> {
    let topo = build_tree(net, &net.normal_closed())?;
    let lin = match model {
        Model::Md => solve_md_closed_form(net, &topo)?,
        Model::Sd => solve_simplified_distflow(net, &topo)?,
        Model::Acpf => unreachable!("not a linear model"),
    };
    let report = compare_errors(net, &lin, ac)?;
    Ok((lin, report))
}

#[derive(Serialize)]
struct PfSummary {
    case: String,
    model: Model,
    scale: f64,
    buses: usize,
    min_v: f64,
    min_v_bus: String,
    loss_kw: f64,
    iterations: Option<usize>,
    errors_vs_acpf: Option<ErrorReport>,
}

fn cmd_pf(args: &PfArgs) -> Result<ExitCode> {
    check_scale(args.scale)?;
    let net = load_case(&args.case, None)?.with_load_scale(args.scale);
    let ac = normal_acpf(&net)?;
    fs::create_dir_all(&args.out)?;
    let kw = net.base_mva() * 1000.0;
    let (v, loss_kw, iterations, errors) = match args.model {
        Model::Acpf => {
            write_ac_traces(&args.out, &net, &ac)?;
            (ac.v.clone(), ac.loss_total * kw, Some(ac.iterations), None)
        }
        model => {
            let (lin, report) = linear_errors(&net, model, &ac)?;
            write_bus_trace(create(&args.out, "buses.csv")?, &net, &lin, Some(&ac))?;
            write_branch_trace(create(&args.out, "branches.csv")?, &net, &lin, Some(&ac))?;
            (lin.v.clone(), lin.loss_est * kw, lin.iterations, Some(report))
        }
    };
    let (low, min_v) =
        v.iter().copied().enumerate().fold((0, f64::INFINITY), |best, (i, x)| if x < best.1 { (i, x) } else { best });
    let summary = PfSummary {
        case: args.case.clone(),
        model: args.model,
        scale: args.scale,
        buses: net.n_buses(),
        min_v,
        min_v_bus: net.buses()[low].id.to_string(),
        loss_kw,
        iterations,
        errors_vs_acpf: errors,
    };
    serde_json::to_writer_pretty(create(&args.out, "summary.json")?, &summary)?;
    println!(
        "{} x{}: min V {:.4} at bus {}, loss {:.2} kW",
        summary.case, summary.scale, summary.min_v, summary.min_v_bus, summary.loss_kw
    );
    if let Some(e) = &summary.errors_vs_acpf {
        println!(
            "errors vs ACPF: V avg {:.4}% max {:.4}%, P avg {:.4}% max {:.4}%, Q avg {:.4}% max {:.4}%",
            e.voltage.avg_pct,
            e.voltage.max_pct,
            e.p_flow.avg_pct,
            e.p_flow.max_pct,
            e.q_flow.avg_pct,
            e.q_flow.max_pct
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn write_ac_traces(dir: &Path, net: &Network, ac: &AcSolution) -> Result<()> {
    let mut w = csv_writer(dir, "buses.csv")?;
    w.write_record(["bus", "v", "delta_deg"])?;
    for (i, bus) in net.buses().iter().enumerate() {
        w.write_record([bus.id.to_string(), format!("{:.10}", ac.v[i]), format!("{:.8}", ac.delta[i].to_degrees())])?;
    }
    w.flush()?;
    let mut w = csv_writer(dir, "branches.csv")?;
    w.write_record(["branch", "p", "q"])?;
    for l in (0..net.n_branches()).filter(|&l| ac.in_tree()[l]) {
        w.write_record([net.branch_label(l), format!("{:.10}", ac.p_flow[l]), format!("{:.10}", ac.q_flow[l])])?;
    }
    w.flush()?;
    Ok(())
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(dir, name)?))
}

fn cmd_compare(args: &CompareArgs) -> Result<ExitCode> {
    let base = load_case(&args.case, None)?;
    fs::create_dir_all(&args.out)?;
    let mut w = csv_writer(&args.out, "compare.csv")?;
    w.write_record([
        "scale",
        "model",
        "v_avg_pct",
        "v_max_pct",
        "p_avg_pct",
        "p_max_pct",
        "q_avg_pct",
        "q_max_pct",
        "min_v_ac",
    ])?;
    println!("scale  model  V avg %   V max %   P avg %   P max %   Q avg %   Q max %   min V");
    for &scale in &args.scale {
        check_scale(scale)?;
        let net = base.with_load_scale(scale);
        let ac = normal_acpf(&net)?;
        for model in [Model::Md, Model::Sd] {
            let (_, e) = linear_errors(&net, model, &ac)?;
            let name = if model == Model::Md { "md" } else { "sd" };
            let cells = [
                e.voltage.avg_pct,
                e.voltage.max_pct,
                e.p_flow.avg_pct,
                e.p_flow.max_pct,
                e.q_flow.avg_pct,
                e.q_flow.max_pct,
            ];
            let mut record = vec![format!("{scale}"), name.to_string()];
            record.extend(cells.iter().map(|c| format!("{c:.6}")));
            record.push(format!("{:.6}", ac.min_voltage()));
            w.write_record(&record)?;
            let shown: Vec<String> = cells.iter().map(|c| format!("{c:8.4}")).collect();
            println!("{scale:<6} {name:<6} {}  {:.4}", shown.join("  "), ac.min_voltage());
        }
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

/// Scenario file values overridden by any flags given.
fn resolve(args: &ReconfigArgs) -> Result<ScenarioDescriptor> {
    let mut sc = ScenarioDescriptor::read(&args.scenario)?;
    if let Some(s) = args.scale {
        sc.load_scale = s;
    }
    if let Some(a) = args.alpha {
        sc.weights.alpha = a;
    }
    if let Some(b) = args.beta {
        sc.weights.beta = b;
    }
    if let Some(g) = args.gamma {
        sc.weights.gamma = g;
    }
    if let Some(c) = args.loop_cuts {
        sc.loop_cuts = c;
    }
    if args.pf_limit.is_some() {
        sc.power_factor = args.pf_limit;
    }
    if args.vmin.is_some() {
        sc.v_min = args.vmin;
    }
    if args.vmax.is_some() {
        sc.v_max = args.vmax;
    }
    sc.oracle |= args.oracle;
    if let Some(g) = args.gap {
        sc.gap = g;
    }
    if args.time_limit.is_some() {
        sc.time_limit_s = args.time_limit;
    }
    if args.out.is_some() {
        sc.out = args.out.clone();
    }
    sc.validate()?;
    Ok(sc)
}

fn cmd_reconfig(args: &ReconfigArgs) -> Result<ExitCode> {
    let sc = resolve(args)?;
    let name = sc.name.clone().unwrap_or_else(|| {
        args.scenario.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
    });
    let mut net = load_case(&sc.case, args.scenario.parent())?.with_load_scale(sc.load_scale);
    if sc.v_min.is_some() || sc.v_max.is_some() {
        net = net.with_v_limits(sc.v_min.unwrap_or(0.9), sc.v_max.unwrap_or(1.1))?;
    }
    let weights: ObjectiveWeights = sc.weights;
    let options = MiqpOptions { loop_cuts: sc.loop_cuts, power_factor: sc.power_factor, ..MiqpOptions::default() };
    let budget = SolveOptions {
        gap: sc.gap,
        time_limit: sc.time_limit_s.map(Duration::from_secs_f64),
        ..SolveOptions::default()
    };
    let model = build_miqp(&net, weights, options)?;
    let mut solution = solve_miqp(&model, &budget)?;
    if args.seedless {
        let again = solve_miqp(&model, &budget)?;
        if !same_result(&solution, &again) {
            bail!("two identical runs produced different results");
        }
    }
    solution.evaluation = Some(evaluate_with_acpf(&net, &solution, weights)?);

    let out = sc.out.clone().unwrap_or_else(|| Path::new("out").join(&name));
    fs::create_dir_all(&out)?;
    solution.write_json(create(&out, "solution.json")?)?;
    solution.write_summary_csv(create(&out, "summary.csv")?, &name)?;
    report(&name, &solution);

    if sc.oracle {
        let mut oracle = enumerate_radial(&net, weights, &options, &EnumerationOptions::default())?;
        oracle.evaluation = Some(evaluate_with_acpf(&net, &oracle, weights)?);
        oracle.write_json(create(&out, "oracle.json")?)?;
        let tol = sc.gap.max(1e-6);
        let scale = oracle.objective_model.abs().max(1e-9);
        // equal objectives with different open sets are ties, not disagreement
        let agree = (solution.objective_model - oracle.objective_model).abs() <= tol * scale;
        if solution.status == SolveStatus::Optimal && !agree {
            bail!("enumeration disagrees: opened {:?} objective {:.6}", oracle.open_branches, oracle.objective_model);
        }
        println!(
            "enumeration: opened {} objective {:.6} over {} candidates",
            oracle.open_branches.join(", "),
            oracle.objective_model,
            oracle.nodes
        );
    }
    if solution.status == SolveStatus::Incomplete {
        eprintln!("search budget exhausted; wrote the incumbent (gap {:e})", solution.gap);
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}

fn same_result(a: &ReconfigSolution, b: &ReconfigSolution) -> bool {
    a.closed == b.closed
        && a.objective_model.to_bits() == b.objective_model.to_bits()
        && a.svc_setpoints == b.svc_setpoints
        && a.nodes == b.nodes
}

fn report(name: &str, s: &ReconfigSolution) {
    println!(
        "{name}: opened {} objective {:.6} ({:?}, gap {:.1e}, {} nodes, {:.2} s)",
        s.open_branches.join(", "),
        s.objective_model,
        s.status,
        s.gap,
        s.nodes,
        s.wall_time_s
    );
    for sp in &s.svc_setpoints {
        println!("  compensator at bus {}: Q = {:.6} p.u.", sp.bus, sp.q);
    }
    if let Some(e) = &s.evaluation {
        match (e.objective(), e.loss_kw()) {
            (Some(obj), Some(loss)) => println!("  ACPF: objective {obj:.6}, loss {loss:.2} kW"),
            _ => println!("  ACPF: not applicable"),
        }
    }
}
