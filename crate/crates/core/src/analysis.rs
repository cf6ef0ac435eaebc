//! Parameter sweeps, strategy comparisons and their CSV/JSON/SVG reports.
//!
//! Grid points are solved independently and in parallel. Afterwards every
//! point is offered the incumbents of all other solved points, mapped by
//! variable tuple; one is adopted only if it passes this point's own
//! feasibility check and has a lower objective. This is a deterministic
//! reduction over the finished results, so the report does not depend on
//! evaluation order. Adopted points record where the solution came from.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gsc_lp::{MipResult, MipStatus, SolverOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::instance::{Instance, ScenarioSet, StrategyConfig};
use crate::model::{build_model, check_feasibility, evaluate_solution, MilpModel, ModelOptions, VarKey};
use crate::solve::{provenance, solve_model, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    /// Multiplies every period's emission cap.
    Cap,
    /// Multiplies every demand entry.
    Demand,
    /// Multiplies every manufacturer and warehouse capacity.
    Capacity,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Cap => "cap",
            SweepParameter::Demand => "demand",
            SweepParameter::Capacity => "capacity",
        }
    }

    fn label(self) -> &'static str {
        match self {
            SweepParameter::Cap => "emission cap multiplier",
            SweepParameter::Demand => "demand multiplier",
            SweepParameter::Capacity => "capacity multiplier",
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cap" | "cap-fraction" => Ok(SweepParameter::Cap),
            "demand" | "demand-fraction" => Ok(SweepParameter::Demand),
            "capacity" | "capacity-fraction" => Ok(SweepParameter::Capacity),
            other => Err(CoreError::Config(format!(
                "unknown sweep parameter `{other}` (expected cap, demand or capacity)"
            ))),
        }
    }
}

/// Parses `start:stop:step` (inclusive of `stop`, in either direction) or a
/// comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CoreError> {
    let bad = |m: &str| CoreError::Config(format!("grid `{text}`: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("`{s}` is not a number")));
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step"));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0 && step.is_finite()) {
            return Err(bad("step must be positive"));
        }
        let n = ((stop - start).abs() / step + 1e-9).floor() as usize;
        if n > 10_000 {
            return Err(bad("more than 10000 points"));
        }
        let dir = if stop >= start { 1.0 } else { -1.0 };
        (0..=n)
            .map(|i| ((start + dir * step * i as f64) * 1e9).round() / 1e9)
            .collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    validate_grid(&grid)?;
    Ok(grid)
}

pub fn validate_grid(grid: &[f64]) -> Result<(), CoreError> {
    if grid.is_empty() {
        return Err(CoreError::Config("grid is empty".into()));
    }
    if let Some(v) = grid.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(CoreError::Config(format!("grid value {v} is not a non-negative number")));
    }
    let up = grid.windows(2).all(|w| w[1] > w[0]);
    let down = grid.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(CoreError::Config("grid must be strictly monotone".into()));
    }
    Ok(())
}

/// Copy of the instance with `parameter` scaled by `multiplier`.
pub fn scale_instance(
    inst: &Instance,
    scen: &ScenarioSet,
    parameter: SweepParameter,
    multiplier: f64,
) -> (Instance, ScenarioSet) {
    let mut inst = inst.clone();
    let mut scen = scen.clone();
    match parameter {
        SweepParameter::Cap => inst.params.cap.iter_mut().for_each(|c| *c *= multiplier),
        SweepParameter::Demand => {
            scen.demand
                .iter_mut()
                .flatten()
                .flatten()
                .for_each(|d| *d *= multiplier);
            // Keep the linking constant valid for scaled-up demand.
            inst.params.big_m *= multiplier.max(1.0);
        }
        SweepParameter::Capacity => {
            inst.params.mfg_capacity.iter_mut().for_each(|c| *c *= multiplier);
            inst.params.wh_capacity.iter_mut().for_each(|c| *c *= multiplier);
        }
    }
    (inst, scen)
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    pub strategies: StrategyConfig,
    pub model: ModelOptions,
    pub solver: SolverOptions,
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub multiplier: f64,
    pub status: String,
    pub z_total: Option<f64>,
    pub z1: Option<f64>,
    pub z2: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub nodes: usize,
    /// Temporary manufacturers and warehouses opened.
    pub temp_facilities_open: usize,
    /// Probability-weighted totals over manufacturers and periods.
    pub safety_stock: f64,
    pub shortage: f64,
    pub stockpile: f64,
    /// Multiplier (and configuration, in comparisons) whose incumbent was
    /// adopted, if any.
    pub adopted_from: Option<String>,
}

impl SweepPoint {
    pub fn is_infeasible(&self) -> bool {
        self.status == MipStatus::Infeasible.name()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub provenance: Provenance,
    pub parameter: SweepParameter,
    pub strategies: StrategyConfig,
    pub points: Vec<SweepPoint>,
    /// First grid point, in grid order, proven infeasible.
    pub first_infeasible: Option<f64>,
    /// Whether every point after `first_infeasible` is infeasible too.
    pub infeasibility_persists: bool,
}

struct Solved {
    model: MilpModel,
    result: MipResult,
    label: String,
    adopted_from: Option<String>,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CoreError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CoreError::Config(format!("cannot start {jobs} workers: {e}")))
}

fn solve_all(
    inst: &Instance,
    scen: &ScenarioSet,
    tasks: &[(StrategyConfig, f64, String)],
    spec: &SweepSpec,
) -> Result<Vec<Solved>, CoreError> {
    let run = || {
        tasks
            .par_iter()
            .map(|(cfg, mult, label)| {
                let (i, s) = scale_instance(inst, scen, spec.parameter, *mult);
                let model = build_model(&i, &s, cfg, &spec.model)?;
                let result = solve_model(&model, &spec.solver, None);
                Ok(Solved {
                    model,
                    result,
                    label: label.clone(),
                    adopted_from: None,
                })
            })
            .collect::<Result<Vec<_>, CoreError>>()
    };
    let mut solved = pool(spec.jobs)?.install(run)?;
    adopt_incumbents(&mut solved, spec.solver.tol_feas);
    Ok(solved)
}

/// Offers every point the incumbents of all others until nothing improves.
fn adopt_incumbents(solved: &mut [Solved], tol: f64) {
    let originals: Vec<Option<(Vec<f64>, String)>> = solved
        .iter()
        .map(|s| s.result.incumbent.clone().map(|x| (x, s.label.clone())))
        .collect();
    for target in 0..solved.len() {
        let mut best: Option<(Vec<f64>, f64, String)> = None;
        for (source, orig) in originals.iter().enumerate() {
            let Some((x, label)) = orig else { continue };
            if source == target {
                continue;
            }
            let Some(y) = solved[target].model.embed(&solved[source].model, x) else {
                continue;
            };
            if !check_feasibility(&solved[target].model, &y, tol).is_empty() {
                continue;
            }
            let value = solved[target].model.objective_value(&y);
            let current = best
                .as_ref()
                .map(|b| b.1)
                .unwrap_or(solved[target].result.objective);
            let margin = 1e-9 * current.abs().max(1.0);
            if value < current - margin {
                best = Some((y, value, label.clone()));
            }
        }
        if let Some((y, value, label)) = best {
            let t = &mut solved[target];
            t.result.incumbent = Some(y);
            t.result.objective = value;
            if t.result.status == MipStatus::Infeasible {
                // A feasible point disproves the status; keep the bound honest.
                t.result.status = MipStatus::NodeLimit;
                t.result.bound = f64::NEG_INFINITY;
            }
            t.result.gap = gsc_lp::branch::relative_gap(value, t.result.bound);
            t.adopted_from = Some(label);
        }
    }
}

fn point(multiplier: f64, s: &Solved) -> SweepPoint {
    let r = &s.result;
    let finite = |v: f64| v.is_finite().then_some(v);
    let mut p = SweepPoint {
        multiplier,
        status: r.status.name().to_string(),
        z_total: None,
        z1: None,
        z2: None,
        bound: finite(r.bound),
        gap: finite(r.gap),
        nodes: r.nodes,
        temp_facilities_open: 0,
        safety_stock: 0.0,
        shortage: 0.0,
        stockpile: 0.0,
        adopted_from: s.adopted_from.clone(),
    };
    if let Some(x) = &r.incumbent {
        let b = evaluate_solution(&s.model, x).expect("incumbent matches its model");
        p.z_total = Some(b.z_total);
        p.z1 = Some(b.z1);
        p.z2 = Some(b.z2);
        let pr = &s.model.scenarios.probability;
        for (key, &v) in s.model.var_map.keys.iter().zip(x) {
            match *key {
                VarKey::U { .. } | VarKey::V { .. } if v > 0.5 => p.temp_facilities_open += 1,
                VarKey::MSS { s, .. } => p.safety_stock += pr[s] * v,
                VarKey::MS { s, .. } => p.shortage += pr[s] * v,
                VarKey::SP { s, .. } => p.stockpile += pr[s] * v,
                _ => {}
            }
        }
    }
    p
}

fn assemble(
    inst: &Instance,
    scen: &ScenarioSet,
    cfg: &StrategyConfig,
    spec: &SweepSpec,
    points: Vec<SweepPoint>,
) -> SweepReport {
    let first = points.iter().position(|p| p.is_infeasible());
    let persists = first.map_or(true, |i| points[i..].iter().all(|p| p.is_infeasible()));
    SweepReport {
        provenance: provenance(inst, scen, cfg, &spec.model, &spec.solver),
        parameter: spec.parameter,
        strategies: *cfg,
        first_infeasible: first.map(|i| points[i].multiplier),
        infeasibility_persists: persists,
        points,
    }
}

/// One solve per grid point.
pub fn run_sweep(inst: &Instance, scen: &ScenarioSet, spec: &SweepSpec) -> Result<SweepReport, CoreError> {
    validate_grid(&spec.grid)?;
    let tasks: Vec<_> = spec
        .grid
        .iter()
        .map(|&m| (spec.strategies, m, format!("{}={m}", spec.parameter.name())))
        .collect();
    let solved = solve_all(inst, scen, &tasks, spec)?;
    let points = spec.grid.iter().zip(&solved).map(|(&m, s)| point(m, s)).collect();
    Ok(assemble(inst, scen, &spec.strategies, spec, points))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Winner {
    A,
    B,
    Tie,
    /// At least one side has no incumbent.
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointComparison {
    pub multiplier: f64,
    pub z_total_a: Option<f64>,
    pub z_total_b: Option<f64>,
    pub winner: Winner,
    /// The difference exceeds both points' remaining optimality gaps.
    pub decisive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Verdict {
    /// The winner changes between `lo` and `hi` (grid neighbours), narrowed
    /// to `[refined_lo, refined_hi]` by bisection.
    Crossover {
        lo: f64,
        hi: f64,
        refined_lo: f64,
        refined_hi: f64,
        sign_changes: usize,
    },
    /// The same side wins (or ties) wherever both are solved.
    ConstantSign { winner: Winner },
    /// No grid point has incumbents on both sides.
    NoComparablePoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: SweepReport,
    pub b: SweepReport,
    pub points: Vec<PointComparison>,
    /// Bisection midpoints, in evaluation order.
    pub refinement: Vec<PointComparison>,
    pub verdict: Verdict,
}

/// Relative difference below which two objectives count as equal.
const TIE: f64 = 1e-9;

fn compare_point(multiplier: f64, a: &SweepPoint, b: &SweepPoint) -> PointComparison {
    let (winner, decisive) = match (a.z_total, b.z_total) {
        (Some(za), Some(zb)) => {
            let scale = za.abs().max(zb.abs()).max(1.0);
            let slack = a.gap.unwrap_or(0.0) * za.abs().max(1.0) + b.gap.unwrap_or(0.0) * zb.abs().max(1.0);
            let diff = za - zb;
            if diff.abs() <= TIE * scale {
                (Winner::Tie, true)
            } else {
                (if diff < 0.0 { Winner::A } else { Winner::B }, diff.abs() > slack)
            }
        }
        _ => (Winner::Undecided, false),
    };
    PointComparison {
        multiplier,
        z_total_a: a.z_total,
        z_total_b: b.z_total,
        winner,
        decisive,
    }
}

/// Extra midpoints evaluated to narrow a crossover; each costs two solves.
pub const REFINEMENT_STEPS: usize = 4;

/// Runs the sweep under both configurations and locates the first change of
/// winner.
pub fn compare_strategies(
    inst: &Instance,
    scen: &ScenarioSet,
    cfg_a: &StrategyConfig,
    cfg_b: &StrategyConfig,
    spec: &SweepSpec,
) -> Result<Comparison, CoreError> {
    if cfg_a == cfg_b {
        return Err(CoreError::Precondition(format!(
            "both configurations are `{cfg_a}`; a comparison needs two different ones"
        )));
    }
    validate_grid(&spec.grid)?;
    let name = spec.parameter.name();
    let mut tasks = Vec::new();
    for (tag, cfg) in [("a", cfg_a), ("b", cfg_b)] {
        for &m in &spec.grid {
            tasks.push((*cfg, m, format!("{tag}:{name}={m}")));
        }
    }
    let solved = solve_all(inst, scen, &tasks, spec)?;
    let n = spec.grid.len();
    let pa: Vec<SweepPoint> = spec.grid.iter().zip(&solved[..n]).map(|(&m, s)| point(m, s)).collect();
    let pb: Vec<SweepPoint> = spec.grid.iter().zip(&solved[n..]).map(|(&m, s)| point(m, s)).collect();
    let points: Vec<PointComparison> = spec
        .grid
        .iter()
        .zip(pa.iter().zip(&pb))
        .map(|(&m, (a, b))| compare_point(m, a, b))
        .collect();

    let strict: Vec<&PointComparison> = points
        .iter()
        .filter(|p| matches!(p.winner, Winner::A | Winner::B))
        .collect();
    let changes: Vec<(f64, f64)> = strict
        .windows(2)
        .filter(|w| w[0].winner != w[1].winner)
        .map(|w| (w[0].multiplier, w[1].multiplier))
        .collect();
    let mut refinement = Vec::new();
    let verdict = if let Some(&(lo, hi)) = changes.first() {
        let lo_winner = strict.iter().find(|p| p.multiplier == lo).expect("from strict").winner;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..REFINEMENT_STEPS {
            let mid = 0.5 * (a + b);
            let pair = [(*cfg_a, mid, format!("a:{name}={mid}")), (*cfg_b, mid, format!("b:{name}={mid}"))];
            let s = solve_all(inst, scen, &pair, spec)?;
            let c = compare_point(mid, &point(mid, &s[0]), &point(mid, &s[1]));
            let same_as_lo = c.winner == lo_winner;
            let undecided = !matches!(c.winner, Winner::A | Winner::B);
            refinement.push(c);
            if undecided {
                break;
            }
            if same_as_lo {
                a = mid;
            } else {
                b = mid;
            }
        }
        Verdict::Crossover {
            lo,
            hi,
            refined_lo: a,
            refined_hi: b,
            sign_changes: changes.len(),
        }
    } else if let Some(first) = strict.first() {
        Verdict::ConstantSign { winner: first.winner }
    } else if points.iter().any(|p| p.winner == Winner::Tie) {
        Verdict::ConstantSign { winner: Winner::Tie }
    } else {
        Verdict::NoComparablePoints
    };
    Ok(Comparison {
        a: assemble(inst, scen, cfg_a, spec, pa),
        b: assemble(inst, scen, cfg_b, spec, pb),
        points,
        refinement,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::Svg];

    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(CoreError::Config(format!("unknown report format `{other}`"))),
        }
    }
}

/// Column order of the CSV report.
pub const CSV_COLUMNS: [&str; 15] = [
    "config",
    "multiplier",
    "status",
    "z_total",
    "z1",
    "z2",
    "bound",
    "gap",
    "nodes",
    "temp_facilities_open",
    "safety_stock",
    "shortage",
    "stockpile",
    "adopted_from",
    "parameter",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with `#` provenance lines, a header and one row per point.
pub fn to_csv(sweeps: &[&SweepReport]) -> String {
    let mut out = String::new();
    if let Some(first) = sweeps.first() {
        let p = &first.provenance;
        let _ = writeln!(out, "# {} {}", p.tool, p.version);
        let _ = writeln!(out, "# instance_sha256 {}", p.instance_sha256);
        let _ = writeln!(out, "# options {}", p.options);
    }
    out.push_str(&CSV_COLUMNS.join(","));
    out.push('\n');
    for sweep in sweeps {
        let config = sweep.strategies.to_string().replace(',', "+");
        for p in &sweep.points {
            let row = [
                config.clone(),
                p.multiplier.to_string(),
                p.status.clone(),
                opt(p.z_total),
                opt(p.z1),
                opt(p.z2),
                opt(p.bound),
                opt(p.gap),
                p.nodes.to_string(),
                p.temp_facilities_open.to_string(),
                p.safety_stock.to_string(),
                p.shortage.to_string(),
                p.stockpile.to_string(),
                p.adopted_from.clone().unwrap_or_default().replace(',', "+"),
                sweep.parameter.name().to_string(),
            ];
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line chart of Z_total (and Z1, Z2 for a single sweep) against the
/// multiplier, with proven-infeasible stretches shaded.
pub fn to_svg(title: &str, sweeps: &[&SweepReport]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 420.0;
    const L: f64 = 90.0;
    const R: f64 = 170.0;
    const T: f64 = 40.0;
    const B: f64 = 50.0;
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for sweep in sweeps {
        let name = sweep.strategies.to_string();
        let pick = |f: fn(&SweepPoint) -> Option<f64>| -> Vec<(f64, f64)> {
            sweep.points.iter().filter_map(|p| f(p).map(|v| (p.multiplier, v))).collect()
        };
        if sweeps.len() == 1 {
            series.push(("Z_total".into(), pick(|p| p.z_total)));
            series.push(("Z1".into(), pick(|p| p.z1)));
            series.push(("Z2".into(), pick(|p| p.z2)));
        } else {
            series.push((format!("Z_total [{name}]"), pick(|p| p.z_total)));
        }
    }
    let xs: Vec<f64> = sweeps.iter().flat_map(|s| s.points.iter().map(|p| p.multiplier)).collect();
    let ys: Vec<f64> = series.iter().flat_map(|s| s.1.iter().map(|p| p.1)).collect();
    let (x0, x1) = span(&xs);
    let (y0, y1) = if ys.is_empty() { (0.0, 1.0) } else { span(&ys) };
    let (y0, y1) = (y0.min(0.0), y1 + 0.05 * (y1 - y0.min(0.0)));
    let px = |x: f64| L + (x - x0) / (x1 - x0) * (W - L - R);
    let py = |y: f64| H - B - (y - y0) / (y1 - y0) * (H - T - B);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    if let Some(first) = sweeps.first() {
        let p = &first.provenance;
        let _ = writeln!(
            s,
            "<metadata>{} {}; instance_sha256 {}; options {}</metadata>",
            p.tool,
            p.version,
            p.instance_sha256,
            escape(&p.options.to_string())
        );
    }
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, (L + W - R) / 2.0, escape(title));

    // Shade between neighbouring infeasible points, half a step wide.
    let mut shaded = false;
    for sweep in sweeps {
        let pts = &sweep.points;
        for (i, p) in pts.iter().enumerate() {
            if !p.is_infeasible() {
                continue;
            }
            let half = |j: Option<usize>| j.map(|j| (pts[j].multiplier - p.multiplier) / 2.0).unwrap_or(0.0);
            let prev = half(i.checked_sub(1));
            let next = half((i + 1 < pts.len()).then_some(i + 1));
            let (a, b) = (p.multiplier + prev, p.multiplier + next);
            let (a, b) = (px(a.min(b)), px(a.max(b)));
            let _ = writeln!(
                s,
                r##"<rect class="infeasible" x="{a:.2}" y="{T}" width="{:.2}" height="{:.2}" fill="#d62728" fill-opacity="0.12"/>"##,
                (b - a).max(2.0),
                H - T - B
            );
            shaded = true;
        }
    }
    if shaded {
        let _ = writeln!(s, r##"<text class="infeasible-label" x="{}" y="{}" fill="#d62728">shaded: infeasible</text>"##, W - R + 10.0, H - B);
    }

    // Axes with five ticks each.
    let _ = writeln!(s, r#"<line x1="{L}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - B, W - R, H - B);
    let _ = writeln!(s, r#"<line x1="{L}" y1="{T}" x2="{L}" y2="{}" stroke="black"/>"#, H - B);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (x, y) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, px(x), H - B + 18.0, fmt_tick(x));
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, L - 6.0, py(y) + 4.0, fmt_tick(y));
    }
    let label = sweeps.first().map(|s| s.parameter.label()).unwrap_or("multiplier");
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#, (L + W - R) / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">objective (minimized)</text>"#, (T + H - B) / 2.0, (T + H - B) / 2.0);

    const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf"];
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" "));
        }
        for &(x, y) in pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let ly = T + 16.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, W - R + 10.0, W - R + 28.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, W - R + 32.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn span(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1e4 {
        format!("{v:.3e}")
    } else {
        format!("{:.3}", v)
    }
}

/// Writes `<stem>.csv`, `<stem>.json` and `<stem>.svg` in `dir` for the
/// requested formats and returns the paths written.
pub fn emit_report<T: Serialize>(
    dir: &Path,
    stem: &str,
    title: &str,
    full: &T,
    sweeps: &[&SweepReport],
    formats: &[Format],
) -> Result<Vec<PathBuf>, CoreError> {
    std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let mut written = Vec::new();
    for &f in formats {
        let path = dir.join(format!("{stem}.{}", f.extension()));
        let text = match f {
            Format::Csv => to_csv(sweeps),
            Format::Json => {
                let mut t = serde_json::to_string_pretty(full).expect("report is serializable");
                t.push('\n');
                t
            }
            Format::Svg => to_svg(title, sweeps),
        };
        std::fs::write(&path, text).map_err(|e| CoreError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
