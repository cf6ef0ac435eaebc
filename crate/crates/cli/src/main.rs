use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gsc_core::analysis::{
    compare_strategies, emit_report, parse_grid, run_sweep, Format, SweepParameter, SweepSpec, Verdict,
};
use gsc_core::generate::{generate_instance, generate_small};
use gsc_core::instance::{
    instance_hash, read_instance, validate_config, validate_instance, write_instance, Instance, NetworkSets,
    ScenarioSet, StrategyConfig,
};
use gsc_core::model::{build_model, CapMode, DelayMode, Integrality, ModelOptions, Weights};
use gsc_core::oracle::enumerate_optimal;
use gsc_core::solve::{
    export_mps, provenance, solve_model, solve_relaxation, value_entries, ObjectiveBlock, Provenance,
    SolutionReport, ValueEntry, TOOL_NAME, TOOL_VERSION,
};
use gsc_core::CoreError;
use gsc_lp::{Branching, LpStatus, MipStatus, SolverOptions};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "gscd", version, about = "Resilient green supply-chain design: build, solve and analyse the two-stage stochastic model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic instance.
    Generate(GenerateArgs),
    /// Check an instance file and its strategy section.
    Validate(InstanceArg),
    /// Print model dimensions per variable and constraint family.
    Inspect(InspectArgs),
    /// Solve the model and write a solution file.
    Solve(SolveArgs),
    /// Solve a tiny instance by exhaustive enumeration.
    Oracle(OracleArgs),
    /// Write the model in fixed-format MPS.
    ExportMps(ExportArgs),
    /// Solve once per multiplier of one parameter.
    Sweep(SweepArgs),
    /// Run the same sweep under two strategy sets and locate a crossover.
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Disruption profile: paper-like, mild or none.
    #[arg(long, default_value = "paper-like")]
    profile: String,
    /// `paper-like` or ten counts: suppliers, backup suppliers,
    /// manufacturers, temporary manufacturers, warehouses, temporary
    /// warehouses, retailers, periods, modes, scenarios.
    #[arg(long, default_value = "paper-like")]
    sets: String,
    /// Draw small integer data with demand up to this value instead (for
    /// enumeration).
    #[arg(long)]
    small: Option<u32>,
    /// Strategies switched on in the written file.
    #[arg(long, value_delimiter = ',')]
    enable: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InstanceArg {
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Objective weights `w1,w2` for cost and emission.
    #[arg(long, default_value = "1,1")]
    weights: Weights,
    #[arg(long, default_value = "perscenario")]
    cap_mode: CapMode,
    #[arg(long, default_value = "expected")]
    delay_mode: DelayMode,
    #[arg(long, default_value = "relaxed")]
    integrality: Integrality,
    /// Strategies to switch on over the instance file's section.
    #[arg(long, value_delimiter = ',')]
    enable: Vec<String>,
    /// Strategies to switch off over the instance file's section.
    #[arg(long, value_delimiter = ',')]
    disable: Vec<String>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop once the relative gap is at most this.
    #[arg(long, default_value_t = 0.0)]
    gap: f64,
    #[arg(long)]
    node_limit: Option<usize>,
    /// Seconds; results under a time limit are not bit-reproducible.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value = "most-fractional")]
    branching: Branching,
    /// Worker threads for sweeps; 0 means one per core.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Solve only the LP relaxation.
    #[arg(long)]
    lp: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Upper bound of every flow and stock variable.
    #[arg(long, default_value_t = 5)]
    max_flow: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepCommon {
    /// cap, demand or capacity.
    #[arg(long)]
    param: SweepParameter,
    /// `start:stop:step` or a comma-separated list of multipliers.
    #[arg(long)]
    grid: String,
    /// Output directory for report.csv, report.json and report.svg.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "csv,json,svg")]
    formats: Vec<Format>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    sweep: SweepCommon,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    sweep: SweepCommon,
    /// Strategies of configuration A.
    #[arg(long, value_delimiter = ',', required = true)]
    a: Vec<String>,
    /// Strategies of configuration B.
    #[arg(long, value_delimiter = ',', required = true)]
    b: Vec<String>,
}

enum Outcome {
    Done,
    Infeasible,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = std::panic::catch_unwind(|| run(cli));
    match run {
        Ok(Ok(Outcome::Done)) => ExitCode::SUCCESS,
        Ok(Ok(Outcome::Infeasible)) => ExitCode::from(1),
        Ok(Err(e)) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            match e.downcast_ref::<CoreError>() {
                Some(CoreError::Lp(_)) | None => ExitCode::from(3),
                Some(_) => ExitCode::from(2),
            }
        }
        Err(_) => ExitCode::from(3),
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Validate(a) => validate(a),
        Command::Inspect(a) => inspect(a),
        Command::Solve(a) => solve(a),
        Command::Oracle(a) => oracle(a),
        Command::ExportMps(a) => export(a),
        Command::Sweep(a) => sweep(a),
        Command::Compare(a) => compare(a),
    }
}

fn parse_sets(text: &str) -> Result<NetworkSets, CoreError> {
    if text == "paper-like" {
        return Ok(NetworkSets::paper_like());
    }
    let n: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CoreError::Config(format!("--sets `{text}`: expected paper-like or ten counts")))?;
    let [a, b, c, d, e, f, g, h, i, j] = n[..] else {
        return Err(CoreError::Config(format!("--sets `{text}`: expected ten counts, got {}", n.len())));
    };
    Ok(NetworkSets {
        n_suppliers_main: a,
        n_suppliers_backup: b,
        n_manufacturers_main: c,
        n_manufacturers_temp: d,
        n_warehouses_main: e,
        n_warehouses_temp: f,
        n_retailers: g,
        n_periods: h,
        n_modes: i,
        n_scenarios: j,
    })
}

fn apply_flags(cfg: &mut StrategyConfig, names: &[String], on: bool) -> Result<(), CoreError> {
    for name in names {
        *cfg.flag_mut(name)
            .ok_or_else(|| CoreError::Config(format!("unknown strategy `{name}`")))? = on;
    }
    Ok(())
}

struct Loaded {
    path: PathBuf,
    inst: Instance,
    scen: ScenarioSet,
    /// The file's strategy section, used for the instance hash.
    file_cfg: StrategyConfig,
    cfg: StrategyConfig,
    opts: ModelOptions,
}

impl ModelArgs {
    fn load(&self) -> Result<Loaded> {
        let (inst, scen, file_cfg) = read_instance(&self.instance)?;
        let mut cfg = file_cfg;
        apply_flags(&mut cfg, &self.enable, true)?;
        apply_flags(&mut cfg, &self.disable, false)?;
        Ok(Loaded {
            path: self.instance.clone(),
            inst,
            scen,
            file_cfg,
            cfg,
            opts: ModelOptions {
                weights: self.weights,
                cap_mode: self.cap_mode,
                delay_mode: self.delay_mode,
                integrality: self.integrality,
            },
        })
    }
}

impl SolverArgs {
    fn options(&self) -> Result<SolverOptions> {
        let time_limit = match self.time_limit {
            Some(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(CoreError::Config(format!("--time-limit must be positive, got {t}")).into())
            }
            t => t.map(Duration::from_secs_f64),
        };
        let opts = SolverOptions {
            seed: self.seed,
            rel_gap: self.gap,
            node_limit: self.node_limit,
            time_limit,
            branching: self.branching,
            ..SolverOptions::default()
        };
        opts.validate().map_err(|e| CoreError::Config(e.to_string()))?;
        Ok(opts)
    }
}

fn print_header(l: &Loaded, solver: Option<&SolverOptions>) {
    println!("{TOOL_NAME} {TOOL_VERSION}");
    println!("instance     {}", l.path.display());
    println!("sha256       {}", instance_hash(&l.inst, &l.scen, &l.file_cfg));
    println!("strategies   {}", l.cfg);
    let w = l.opts.weights;
    println!("weights      {},{}", w.cost, w.emission);
    println!("cap-mode     {}", l.opts.cap_mode.name());
    println!("delay-mode   {}", l.opts.delay_mode.name());
    println!("integrality  {}", l.opts.integrality.name());
    if let Some(s) = solver {
        println!("seed         {}", s.seed);
        println!("tolerances   feas={:e} int={:e} opt={:e}", s.tol_feas, s.tol_int, s.tol_opt);
        println!("branching    {}", s.branching.name());
        println!("gap          {}", s.rel_gap);
        let limit = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        println!("node-limit   {}", limit(s.node_limit.map(|n| n.to_string())));
        println!("time-limit   {}", limit(s.time_limit.map(|d| format!("{}s", d.as_secs_f64()))));
    }
    println!();
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CoreError::io(path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<Outcome> {
    let sets = parse_sets(&a.sets)?;
    let (inst, scen) = match a.small {
        Some(max) => generate_small(a.seed, &sets, max),
        None => generate_instance(a.seed, &sets, &a.profile)?,
    };
    let mut cfg = StrategyConfig::default();
    apply_flags(&mut cfg, &a.enable, true)?;
    println!("{TOOL_NAME} {TOOL_VERSION}");
    println!("seed         {}", a.seed);
    match a.small {
        Some(max) => println!("data         small, demand <= {max}"),
        None => println!("profile      {}", a.profile),
    }
    println!("strategies   {cfg}");
    println!();
    let report = validate_instance(&inst, &scen);
    if !report.is_valid() {
        bail!(CoreError::Invalid(report));
    }
    write_instance(&a.out, &inst, &scen, &cfg)?;
    println!("wrote {}", a.out.display());
    Ok(Outcome::Done)
}

fn validate(a: InstanceArg) -> Result<Outcome> {
    let (inst, scen, cfg) = read_instance(&a.instance)?;
    println!("{TOOL_NAME} {TOOL_VERSION}");
    println!("instance     {}", a.instance.display());
    println!("sha256       {}", instance_hash(&inst, &scen, &cfg));
    println!("strategies   {cfg}");
    println!();
    let mut report = validate_instance(&inst, &scen);
    report.violations.extend(validate_config(&inst, &cfg).violations);
    if report.is_valid() {
        println!("OK");
        Ok(Outcome::Done)
    } else {
        bail!(CoreError::Invalid(report))
    }
}

fn inspect(a: InspectArgs) -> Result<Outcome> {
    let l = a.model.load()?;
    print_header(&l, None);
    let model = build_model(&l.inst, &l.scen, &l.cfg, &l.opts)?;
    println!("{:<22}{:>10}", "variables", "columns");
    for (family, n) in model.column_stats() {
        println!("{family:<22}{n:>10}");
    }
    println!("{:<22}{:>10}", "total", model.n_cols());
    println!();
    println!("{:<22}{:>10}{:>12}", "constraints", "rows", "nonzeros");
    for (family, rows, nnz) in model.family_stats() {
        println!("{:<22}{rows:>10}{nnz:>12}", family.name());
    }
    println!("{:<22}{:>10}{:>12}", "total", model.n_rows(), model.problem.nnz());
    let ints = model.problem.integer.iter().filter(|&&b| b).count();
    println!();
    println!("integer columns       {ints}");
    Ok(Outcome::Done)
}

fn solve(a: SolveArgs) -> Result<Outcome> {
    let l = a.model.load()?;
    let opts = a.solver.options()?;
    print_header(&l, Some(&opts));
    let model = build_model(&l.inst, &l.scen, &l.cfg, &l.opts)?;
    println!("model        {} columns, {} rows, {} nonzeros", model.n_cols(), model.n_rows(), model.problem.nnz());
    let prov = provenance(&l.inst, &l.scen, &l.file_cfg, &l.opts, &opts);
    let prov = Provenance {
        options: with_strategies(prov.options, &l.cfg),
        ..prov
    };
    if a.lp {
        let r = solve_relaxation(&model, &opts);
        println!("lp status    {:?}", r.status);
        println!("lp objective {}", r.objective);
        println!("iterations   {}", r.iterations);
        return Ok(match r.status {
            LpStatus::Infeasible => Outcome::Infeasible,
            _ => Outcome::Done,
        });
    }
    let r = solve_model(&model, &opts, None);
    let report = SolutionReport::new(&model, &r, prov);
    println!("status       {}", report.status);
    if let Some(o) = &report.objective {
        println!("Z_total      {}", o.z_total);
        println!("Z1           {}", o.z1);
        println!("Z2           {}", o.z2);
    }
    if r.bound.is_finite() {
        println!("bound        {}", r.bound);
        println!("gap          {}", r.gap);
    }
    println!("nodes        {}", r.nodes);
    if let Some(out) = &a.out {
        write_text(out, &report.to_json())?;
    }
    if r.status == MipStatus::Infeasible {
        eprintln!("model is infeasible");
        return Ok(Outcome::Infeasible);
    }
    Ok(Outcome::Done)
}

fn with_strategies(mut options: serde_json::Value, cfg: &StrategyConfig) -> serde_json::Value {
    options["strategies"] = serde_json::to_value(cfg).expect("flags serialize");
    options
}

#[derive(Serialize)]
struct OracleReport {
    provenance: Provenance,
    status: String,
    max_flow: u32,
    search_estimate: f64,
    objective: Option<ObjectiveBlock>,
    first_stage: Vec<ValueEntry>,
    second_stage: Vec<ValueEntry>,
}

fn oracle(a: OracleArgs) -> Result<Outcome> {
    let l = a.model.load()?;
    print_header(&l, None);
    println!("max-flow     {}", a.max_flow);
    let opts = ModelOptions {
        integrality: Integrality::Full,
        ..l.opts
    };
    let model = build_model(&l.inst, &l.scen, &l.cfg, &opts)?.with_second_stage_bound(a.max_flow as f64);
    let found = enumerate_optimal(&l.inst, &l.scen, &l.cfg, &opts, a.max_flow)?;
    let prov = provenance(&l.inst, &l.scen, &l.file_cfg, &opts, &SolverOptions::default());
    let mut report = OracleReport {
        provenance: Provenance {
            options: with_strategies(prov.options, &l.cfg),
            ..prov
        },
        status: "infeasible".into(),
        max_flow: a.max_flow,
        search_estimate: 0.0,
        objective: None,
        first_stage: Vec::new(),
        second_stage: Vec::new(),
    };
    if let Some(found) = &found {
        let x = found.assignment.to_model_point(&model);
        let b = gsc_core::model::evaluate_solution(&model, &x)?;
        report.status = "optimal".into();
        report.search_estimate = found.estimate;
        report.objective = Some(ObjectiveBlock::new(&b, &l.scen.probability));
        (report.first_stage, report.second_stage) = value_entries(&model, &x);
        println!("status       optimal");
        println!("Z_total      {}", found.objective);
    } else {
        println!("status       infeasible");
    }
    if let Some(out) = &a.out {
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        write_text(out, &text)?;
    }
    Ok(if found.is_some() { Outcome::Done } else { Outcome::Infeasible })
}

fn export(a: ExportArgs) -> Result<Outcome> {
    let l = a.model.load()?;
    print_header(&l, None);
    let model = build_model(&l.inst, &l.scen, &l.cfg, &l.opts)?;
    export_mps(&model, &a.out).with_context(|| format!("exporting to {}", a.out.display()))?;
    println!("wrote {}", a.out.display());
    Ok(Outcome::Done)
}

fn sweep_spec(l: &Loaded, s: &SolverArgs, c: &SweepCommon) -> Result<SweepSpec> {
    Ok(SweepSpec {
        parameter: c.param,
        grid: parse_grid(&c.grid)?,
        strategies: l.cfg,
        model: l.opts,
        solver: s.options()?,
        jobs: s.jobs,
    })
}

fn print_sweep_header(l: &Loaded, spec: &SweepSpec) {
    print_header(l, Some(&spec.solver));
    println!("parameter    {}", spec.parameter.name());
    let grid: Vec<String> = spec.grid.iter().map(|g| g.to_string()).collect();
    println!("grid         {}", grid.join(","));
    println!("jobs         {}", spec.jobs);
    println!();
}

fn sweep(a: SweepArgs) -> Result<Outcome> {
    let l = a.model.load()?;
    let spec = sweep_spec(&l, &a.solver, &a.sweep)?;
    print_sweep_header(&l, &spec);
    let report = run_sweep(&l.inst, &l.scen, &spec)?;
    println!("{:>12} {:>14} {:>18}", "multiplier", "status", "Z_total");
    for p in &report.points {
        let z = p.z_total.map(|z| z.to_string()).unwrap_or_else(|| "-".into());
        println!("{:>12} {:>14} {:>18}", p.multiplier, p.status, z);
    }
    match report.first_infeasible {
        Some(m) => println!(
            "first infeasible multiplier {m} ({})",
            if report.infeasibility_persists { "persists" } else { "does not persist" }
        ),
        None => println!("no infeasible point"),
    }
    let title = format!("{} sweep, strategies: {}", spec.parameter.name(), report.strategies);
    for path in emit_report(&a.sweep.out, "report", &title, &report, &[&report], &a.sweep.formats)? {
        println!("wrote {}", path.display());
    }
    Ok(Outcome::Done)
}

fn compare(a: CompareArgs) -> Result<Outcome> {
    let l = a.model.load()?;
    let spec = sweep_spec(&l, &a.solver, &a.sweep)?;
    let side = |on: &[String], off: &[String]| -> Result<StrategyConfig, CoreError> {
        let mut cfg = l.cfg;
        let only_other: Vec<String> = off.iter().filter(|n| !on.contains(n)).cloned().collect();
        apply_flags(&mut cfg, &only_other, false)?;
        apply_flags(&mut cfg, on, true)?;
        Ok(cfg)
    };
    let cfg_a = side(&a.a, &a.b)?;
    let cfg_b = side(&a.b, &a.a)?;
    print_sweep_header(&l, &spec);
    println!("config A     {cfg_a}");
    println!("config B     {cfg_b}");
    println!();
    let cmp = compare_strategies(&l.inst, &l.scen, &cfg_a, &cfg_b, &spec)?;
    println!("{:>12} {:>18} {:>18} {:>10}", "multiplier", "Z_total A", "Z_total B", "winner");
    let show = |v: Option<f64>| v.map(|z| z.to_string()).unwrap_or_else(|| "-".into());
    for p in cmp.points.iter().chain(&cmp.refinement) {
        let w = serde_json::to_value(p.winner).expect("winner serializes");
        println!(
            "{:>12} {:>18} {:>18} {:>10}",
            p.multiplier,
            show(p.z_total_a),
            show(p.z_total_b),
            w.as_str().unwrap_or("?")
        );
    }
    match &cmp.verdict {
        Verdict::Crossover { lo, hi, refined_lo, refined_hi, .. } => {
            println!("crossover between {lo} and {hi}, refined to [{refined_lo}, {refined_hi}]")
        }
        Verdict::ConstantSign { winner } => {
            let w = serde_json::to_value(winner).expect("winner serializes");
            println!("no crossover: constant sign, winner {}", w.as_str().unwrap_or("?"))
        }
        Verdict::NoComparablePoints => println!("no grid point solved under both configurations"),
    }
    let title = format!("{} sweep: A = {cfg_a} vs B = {cfg_b}", spec.parameter.name());
    for path in emit_report(&a.sweep.out, "report", &title, &cmp, &[&cmp.a, &cmp.b], &a.sweep.formats)? {
        println!("wrote {}", path.display());
    }
    Ok(Outcome::Done)
}
