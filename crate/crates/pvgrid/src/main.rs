//! Thin command-line front end over the library. Each subcommand parses
//! arguments, calls one library entry point, prints the result, and maps
//! the outcome to an exit code: 0 on success, 1 when a completed study is
//! non-compliant, 2 on any error.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use pvgrid::compensation::{apply_svc, CompensationPlan};
use pvgrid::error::{Error, Result};
use pvgrid::harmonics::{harmonic_scan, ieee519_check, ThdLimits};
use pvgrid::network::load_case;
use pvgrid::power_flow::{solve_load_flow, SolverOptions};
use pvgrid::report::{
    flow_csv, flow_table, harmonics_csv, nose_curve_csv, solution_rows, trace_csv, write_text,
};
use pvgrid::rl::{
    evaluate_episode, parse_disturbance, train_agent, Agent, EnvConfig, Hyperparameters,
};
use pvgrid::sizing::{size_plant, PlantConfig};
use pvgrid::stability::{loading_margin, MarginOptions};
use pvgrid::study::{export_report, meter_for_bus, run_study, summary_text, StudyPolicy};

#[derive(Parser)]
#[command(
    name = "pvgrid",
    version,
    about = "Steady-state grid-integration studies for utility-scale PV plants"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the plant sizing chain and print the report table.
    Sizing(SizingArgs),
    /// Solve the AC load flow and print per-bus quantities.
    Loadflow(LoadflowArgs),
    /// Size shunt compensation to reach a target power factor at a bus.
    Compensate(CompensateArgs),
    /// Scan harmonic distortion and check it against voltage-class limits.
    Harmonics(HarmonicsArgs),
    /// Trace the loading margin to voltage collapse.
    Stability(StabilityArgs),
    /// Train the reactive-power control agent.
    TrainSvc(TrainArgs),
    /// Replay a trained agent through a disturbance script.
    EvalSvc(EvalArgs),
    /// Run the staged compliance study and export the report set.
    Study(StudyArgs),
}

#[derive(Args)]
struct SizingArgs {
    /// Plant parameters as JSON; missing fields take the built-in defaults.
    config: Option<PathBuf>,
    /// Also write the report as metric,value CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct LoadflowArgs {
    case: PathBuf,
    #[arg(long, default_value = "loadflow.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct CompensateArgs {
    case: PathBuf,
    /// Bus whose power factor is corrected.
    #[arg(long)]
    bus: String,
    #[arg(long = "target-pf", default_value_t = 0.95)]
    target_pf: f64,
    /// Where the compensated case file is written.
    #[arg(long, default_value = "compensated_case.json")]
    out: PathBuf,
}

#[derive(Args)]
struct HarmonicsArgs {
    case: PathBuf,
    /// Comma-separated harmonic orders to scan.
    #[arg(long, default_value = "5,7,11,13")]
    orders: String,
    #[arg(long, default_value = "harmonics.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct StabilityArgs {
    case: PathBuf,
    #[arg(long, default_value = "nose_curve.csv")]
    out: PathBuf,
    /// Load-multiplier step of the upward scan.
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    /// Scan ceiling for cases that do not collapse.
    #[arg(long = "max-scale", default_value_t = 20.0)]
    max_scale: f64,
    /// Bus whose voltage traces the nose curve (default: weakest bus).
    #[arg(long)]
    monitor: Option<String>,
}

/// Training file: `{ "env": {..}, "hyperparameters": {..} }`, either part
/// optional.
#[derive(Default, Deserialize)]
#[serde(default)]
struct TrainingSpec {
    env: EnvConfig,
    hyperparameters: Hyperparameters,
}

#[derive(Args)]
struct TrainArgs {
    /// Environment and hyperparameter JSON; defaults used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "agent.json")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    agent: PathBuf,
    /// Disturbance script, e.g. `step:-0.07@10` or `none`.
    #[arg(long, default_value = "none")]
    disturbance: String,
    #[arg(long, default_value = "trace.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    case: PathBuf,
    /// Policy file; flags below override its fields.
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long = "pf-threshold")]
    pf_threshold: Option<f64>,
    /// Do not switch in filter slots even when screening fails.
    #[arg(long = "no-filters")]
    no_filters: bool,
    /// Apply this fixed compensator setting instead of sizing one.
    #[arg(long = "q-override", value_name = "MVAR")]
    q_override: Option<f64>,
    /// Directory for the exported report set.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Sizing(args) => sizing_cmd(args),
        Command::Loadflow(args) => loadflow_cmd(args),
        Command::Compensate(args) => compensate_cmd(args),
        Command::Harmonics(args) => harmonics_cmd(args),
        Command::Stability(args) => stability_cmd(args),
        Command::TrainSvc(args) => train_cmd(args),
        Command::EvalSvc(args) => eval_cmd(args),
        Command::Study(args) => study_cmd(args),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::CaseFile(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn sizing_cmd(args: SizingArgs) -> Result<ExitCode> {
    let config = match &args.config {
        Some(path) => read_json::<PlantConfig>(path)?,
        None => PlantConfig::default(),
    };
    let report = size_plant(&config);
    print!("{report}");
    if let Some(path) = &args.csv {
        let mut csv = String::from("metric,value\n");
        let _ = writeln!(csv, "modules_per_array,{}", report.modules_per_array);
        let _ = writeln!(csv, "array_power_mw,{:.3}", report.array_power_mw);
        let _ = writeln!(csv, "array_count,{}", report.array_count);
        let _ = writeln!(csv, "inverter_ac_power_mw,{:.3}", report.inverter_ac_power_mw);
        let _ = writeln!(csv, "inverter_current_a,{:.1}", report.inverter_current_a);
        let _ = writeln!(csv, "lv_current_a,{:.1}", report.lv_current_a);
        let _ = writeln!(csv, "mv_current_a,{:.1}", report.mv_current_a);
        let _ = writeln!(csv, "hv_apparent_power_mva,{:.1}", report.hv_apparent_power_mva);
        let _ = writeln!(csv, "hv_current_a,{:.1}", report.hv_current_a);
        let _ = writeln!(csv, "recommended_hv_rating_mva,{:.1}", report.recommended_hv_rating_mva);
        write_text(path, &csv)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn loadflow_cmd(args: LoadflowArgs) -> Result<ExitCode> {
    let network = load_case(&args.case)?;
    let solution = solve_load_flow(&network, &SolverOptions::default())?;
    let rows = solution_rows(&solution);
    print!("{}", flow_table(&rows));
    println!(
        "\nconverged in {} iterations, max mismatch {:.3e} pu, losses {:.3} MW",
        solution.iterations,
        solution.max_mismatch_pu,
        solution.total_losses_mw()
    );
    write_text(&args.out, &flow_csv(&rows))?;
    println!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn compensate_cmd(args: CompensateArgs) -> Result<ExitCode> {
    let network = load_case(&args.case)?;
    let solution = solve_load_flow(&network, &SolverOptions::default())?;
    // The case's declared meter for the bus when it has one, so sizing sees
    // the same reading the study pipeline corrects.
    let meter = meter_for_bus(&network, &solution, &args.bus, args.target_pf)?;
    let at = &meter.quantities;
    let pf = at.power_factor.ok_or(Error::InvalidInput {
        what: "compensation bus",
        detail: format!("no measurable flow at `{}`", args.bus),
    })?;
    let plan = CompensationPlan::new(&args.bus, at.p_mw.abs(), pf.abs(), args.target_pf)?;
    // A meter absorbing reactive power calls for injection; one exporting
    // it calls for absorption.
    let direction = if at.q_mvar >= 0.0 { 1.0 } else { -1.0 };
    let q = direction * plan.required_q_mvar;
    println!("meter:            {}", meter.label);
    println!("active power:     {:.3} MW", plan.load_active_power_mw);
    println!("power factor:     {:.4} -> {:.4}", pf, args.target_pf);
    println!(
        "phase angle:      {:.4} rad -> {:.4} rad",
        plan.angle_before_rad, plan.angle_after_rad
    );
    println!("required shunt:   {:.3} Mvar", q);
    let compensated = apply_svc(&network, &args.bus, q, q.abs())?;
    let check = solve_load_flow(&compensated, &SolverOptions::default())?;
    let after = meter_for_bus(&compensated, &check, &args.bus, args.target_pf)?;
    println!(
        "check solve:      PF {:.4} at {}",
        after.quantities.power_factor.unwrap_or(1.0),
        after.label
    );
    write_text(&args.out, &compensated.to_spec().to_json_pretty()?)?;
    println!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn parse_orders(text: &str) -> Result<Vec<u32>> {
    let mut orders = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        orders.push(part.parse::<u32>().map_err(|_| Error::InvalidInput {
            what: "harmonic orders",
            detail: format!("`{part}` is not a positive integer"),
        })?);
    }
    if orders.is_empty() {
        return Err(Error::InvalidInput {
            what: "harmonic orders",
            detail: "at least one order is required".into(),
        });
    }
    Ok(orders)
}

fn harmonics_cmd(args: HarmonicsArgs) -> Result<ExitCode> {
    let network = load_case(&args.case)?;
    let orders = parse_orders(&args.orders)?;
    let solution = solve_load_flow(&network, &SolverOptions::default())?;
    let report = harmonic_scan(&network, &solution, &orders)?;
    let verdicts = ieee519_check(&report, &ThdLimits::default());
    println!("{:<14} {:>8} {:>9} {:>8}  verdict", "bus", "kV", "THD %", "limit %");
    for v in &verdicts {
        println!(
            "{:<14} {:>8.1} {:>9.3} {:>8.1}  {}",
            v.bus,
            v.nominal_kv,
            v.thd_percent,
            v.limit_percent,
            if v.pass { "pass" } else { "FAIL" }
        );
    }
    write_text(&args.out, &harmonics_csv(Some(&report)))?;
    println!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn stability_cmd(args: StabilityArgs) -> Result<ExitCode> {
    let network = load_case(&args.case)?;
    let options = MarginOptions {
        step: args.step,
        max_scale: args.max_scale,
        monitored_bus: args.monitor.clone(),
        ..MarginOptions::default()
    };
    let margin = loading_margin(&network, &options)?;
    println!("monitored bus:            {}", margin.monitored_bus);
    println!(
        "collapse load multiplier: {:.4}{}",
        margin.collapse_scale,
        if margin.capped { " (scan ceiling reached)" } else { "" }
    );
    println!("loading margin:           {:.2}% of collapse loading", margin.loading_margin_percent);
    println!("reserve capacity:         {:.2}% of base loading", margin.reserve_capacity_percent);
    println!(
        "stable-voltage index:     {:.2}% (operating {:.4} pu, nose {:.4} pu)",
        margin.literal_percent_b, margin.v_operating_pu, margin.v_stable_pu
    );
    write_text(&args.out, &nose_curve_csv(&margin.nose_curve))?;
    println!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn train_cmd(args: TrainArgs) -> Result<ExitCode> {
    let mut spec = match &args.config {
        Some(path) => read_json::<TrainingSpec>(path)?,
        None => TrainingSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.env.seed = seed;
    }
    let (agent, log) = train_agent(&spec.env, &spec.hyperparameters)?;
    let episodes = log.episode_returns.len();
    let tail = &log.episode_returns[episodes.saturating_sub(50)..];
    let tail_mean = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    println!("trained {} episodes (seed {})", episodes, spec.env.seed);
    println!("state bins: {}, actions: {:?}", agent.values.len(), agent.actions_mvar);
    println!("final exploration rate: {:.4}", log.final_epsilon);
    println!("mean return over the last {} episodes: {:.3}", tail.len(), tail_mean);
    agent.save(&args.out)?;
    println!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn eval_cmd(args: EvalArgs) -> Result<ExitCode> {
    let agent = Agent::load(&args.agent)?;
    let script = parse_disturbance(&args.disturbance)?;
    let trace = evaluate_episode(&agent, &agent.env, &script)?;
    let band = (agent.env.band_low_pu, agent.env.band_high_pu);
    let out_of_band = trace
        .steps
        .iter()
        .filter(|s| s.voltage_pu < band.0 || s.voltage_pu > band.1)
        .count();
    println!("steps:             {}", trace.steps.len());
    println!("cumulative reward: {:.4}", trace.cumulative_reward());
    println!("steps out of band: {out_of_band}");
    write_text(&args.out, &trace_csv(&trace))?;
    println!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn study_cmd(args: StudyArgs) -> Result<ExitCode> {
    let mut policy = match &args.policy {
        Some(path) => StudyPolicy::from_path(path)?,
        None => StudyPolicy::default(),
    };
    if let Some(pf) = args.pf_threshold {
        policy.pf_threshold = pf;
    }
    if args.no_filters {
        policy.use_filters = false;
    }
    if let Some(q) = args.q_override {
        policy.q_override_mvar = Some(q);
    }
    let network = load_case(&args.case)?;
    let report = run_study(&network, &policy)?;
    print!("{}", summary_text(&report));
    if let Some(dir) = &args.out {
        let written = export_report(&report, dir)?;
        println!("\nwrote {} files to {}", written.len(), dir.display());
    }
    Ok(if report.overall_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
