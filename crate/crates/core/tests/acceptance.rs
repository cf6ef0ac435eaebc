//! Acceptance suite. Prints one PASS/FAIL line per criterion, then fails the
//! test if any criterion failed.

mod common;

use std::cell::RefCell;
use std::time::Instant;

use common::{all_strategies, case, golden, paper_like, rich_fixture, tiny_fixture, MAX_FLOW};
use gsc_core::analysis::{compare_strategies, parse_grid, run_sweep, SweepParameter, SweepSpec, Verdict};
use gsc_core::instance::{Instance, ScenarioSet, StrategyConfig};
use gsc_core::model::{build_model, MilpModel, ModelOptions};
use gsc_core::oracle::enumerate_optimal;
use gsc_core::solve::{export_mps, import_mps, provenance, solve_model, solve_relaxation, verify_incumbent, SolutionReport};
use gsc_lp::{dual_objective, solve_lp, Branching, LpStatus, MipResult, MipStatus, SolverOptions};

type Outcome = Result<String, String>;

/// Every incumbent produced in this run, checked as it appears.
#[derive(Default)]
struct Audit {
    checked: usize,
    failures: Vec<String>,
}

thread_local! {
    static AUDIT: RefCell<Audit> = RefCell::new(Audit::default());
}

fn audit(label: &str, model: &MilpModel, r: &MipResult) {
    let Some(x) = &r.incumbent else { return };
    let verdict = verify_incumbent(model, x, r.objective, 1e-6, 1e-9).and_then(|b| {
        let w = model.options.weights;
        let identity = w.cost * b.z1 + w.emission * b.z2;
        if (identity - b.z_total).abs() <= 1e-9 * b.z_total.abs().max(1.0) {
            Ok(())
        } else {
            Err(format!("w1*Z1 + w2*Z2 = {identity} but Z_total = {}", b.z_total))
        }
    });
    AUDIT.with(|a| {
        let mut a = a.borrow_mut();
        a.checked += 1;
        if let Err(e) = verdict {
            a.failures.push(format!("{label}: {e}"));
        }
    });
}

fn rel_le(a: f64, b: f64) -> bool {
    a <= b + 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn gap_opts() -> SolverOptions {
    SolverOptions {
        rel_gap: 0.01,
        branching: Branching::PseudoCost,
        ..SolverOptions::default()
    }
}

fn solve(label: &str, model: &MilpModel, opts: &SolverOptions, start: Option<&[f64]>) -> MipResult {
    let r = solve_model(model, opts, start);
    audit(label, model, &r);
    r
}

struct Paper {
    inst: Instance,
    scen: ScenarioSet,
}

impl Paper {
    fn model(&self, cfg: &StrategyConfig) -> MilpModel {
        build_model(&self.inst, &self.scen, cfg, &ModelOptions::default()).unwrap()
    }
}

fn lp_checks(label: &str, model: &MilpModel, mip_optimum_or_bound: f64) -> Result<(), String> {
    let lp = solve_relaxation(model, &SolverOptions::default());
    if lp.status != LpStatus::Optimal {
        return Err(format!("{label}: LP status {:?}", lp.status));
    }
    let dual = dual_objective(&model.problem, &lp.dual, 1e-9);
    if (dual - lp.objective).abs() > 1e-9 * lp.objective.abs().max(1.0) {
        return Err(format!("{label}: primal {} dual {dual}", lp.objective));
    }
    if !rel_le(lp.objective, mip_optimum_or_bound) {
        return Err(format!("{label}: LP {} above MIP {mip_optimum_or_bound}", lp.objective));
    }
    Ok(())
}

/// Oracle equivalence, and the LP checks on the same instances.
fn oracle_equivalence(lp_failures: &mut Vec<String>, lp_count: &mut usize) -> Outcome {
    let start = Instant::now();
    let mut matched = 0;
    let mut tried = 0;
    for seed in 0..200u64 {
        if matched >= 25 {
            break;
        }
        tried += 1;
        let c = case(seed, false);
        let oracle = enumerate_optimal(&c.inst, &c.scen, &c.cfg, &c.opts, MAX_FLOW).map_err(|e| e.to_string())?;
        let mip = solve(&format!("oracle seed {seed}"), &c.model, &SolverOptions::default(), None);
        match oracle {
            None if mip.status == MipStatus::Infeasible => {}
            None => return Err(format!("seed {seed}: oracle infeasible, solver {}", mip.status.name())),
            Some(o) => {
                let rel = (mip.objective - o.objective).abs() / o.objective.abs().max(1.0);
                if mip.status != MipStatus::Optimal || rel > 1e-9 {
                    return Err(format!("seed {seed}: solver {} vs oracle {}", mip.objective, o.objective));
                }
                *lp_count += 1;
                if let Err(e) = lp_checks(&format!("oracle seed {seed}"), &c.model, o.objective) {
                    lp_failures.push(e);
                }
                matched += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if matched < 20 {
        return Err(format!("only {matched} feasible instances in {tried} seeds"));
    }
    if secs >= 60.0 {
        return Err(format!("{matched} instances matched but took {secs:.1} s"));
    }
    Ok(format!("{matched} feasible instances matched ({tried} seeds, {secs:.1} s)"))
}

/// Strategy monotonicity. Each solve stops at a 1% gap, so incumbents are
/// exchanged along nested feasible regions, as sweeps do: a point is adopted
/// only when it beats the configuration's own incumbent.
fn monotonicity(p: &Paper) -> Outcome {
    let opts = SolverOptions {
        node_limit: Some(200),
        ..gap_opts()
    };
    let off_model = p.model(&StrategyConfig::default());
    let ms_model = p.model(&StrategyConfig::only(&["multiple_sourcing"]).unwrap());
    let ms = solve("multiple_sourcing", &ms_model, &opts, None);
    let ms_x = ms.incumbent.as_ref().ok_or("multiple sourcing has no incumbent")?;
    let mut off = solve("all-off", &off_model, &opts, None);
    if !(off.objective <= ms.objective) {
        let seed = off_model.embed(&ms_model, ms_x).ok_or("multiple-sourcing point does not embed")?;
        off = solve("all-off, seeded", &off_model, &opts, Some(&seed));
    }
    let off_x = off.incumbent.as_ref().ok_or("all-off has no incumbent")?;
    let base = off.objective;
    let mut parts = vec![format!("off {base:.2}")];
    if !rel_le(base, ms.objective) {
        return Err(format!("multiple sourcing {} below all-off {base}", ms.objective));
    }
    parts.push(format!("multiple_sourcing {:.2}", ms.objective));
    for name in ["safety_stock", "stockpiling", "backup_suppliers", "temporary_facilities"] {
        let model = p.model(&StrategyConfig::only(&[name]).unwrap());
        let start = model.embed(&off_model, off_x).ok_or_else(|| format!("all-off point does not embed in {name}"))?;
        let r = solve(name, &model, &opts, Some(&start));
        if !rel_le(r.objective, base) {
            return Err(format!("{name} {} above all-off {base}", r.objective));
        }
        parts.push(format!("{name} {:.2}", r.objective));
    }
    Ok(parts.join(", "))
}

fn sweep_spec(parameter: SweepParameter, grid: &str, cfg: StrategyConfig, node_limit: usize) -> SweepSpec {
    SweepSpec {
        parameter,
        grid: parse_grid(grid).unwrap(),
        strategies: cfg,
        model: ModelOptions::default(),
        solver: SolverOptions {
            node_limit: Some(node_limit),
            ..gap_opts()
        },
        jobs: 0,
    }
}

fn cap_sweep(p: &Paper) -> Outcome {
    let spec = sweep_spec(SweepParameter::Cap, "1.0:0.0:0.1", StrategyConfig::default(), 40);
    let report = run_sweep(&p.inst, &p.scen, &spec).map_err(|e| e.to_string())?;
    let z: Vec<f64> = report.points.iter().filter_map(|q| q.z_total).collect();
    if let Some(w) = z.windows(2).find(|w| !rel_le(w[0], w[1])) {
        return Err(format!("Z_total decreases from {} to {}", w[0], w[1]));
    }
    let infeasible: Vec<bool> = report.points.iter().map(|q| q.is_infeasible()).collect();
    let transitions = infeasible.windows(2).filter(|w| w[0] != w[1]).count();
    let threshold = report.first_infeasible.ok_or("no infeasible multiplier")?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(format!("threshold {threshold} not strictly inside (0, 1)"));
    }
    if transitions != 1 || !report.infeasibility_persists {
        return Err(format!("feasibility changes {transitions} times"));
    }
    if report.points.iter().any(|q| !q.is_infeasible() && q.z_total.is_none()) {
        return Err("a feasible-side point has no incumbent".into());
    }
    let last_feasible = report.points.iter().filter(|q| !q.is_infeasible()).last().unwrap().multiplier;
    Ok(format!(
        "{} points non-decreasing, infeasible from {threshold} (last feasible {last_feasible})",
        report.points.len()
    ))
}

fn describe(v: &Verdict) -> String {
    match v {
        Verdict::Crossover { lo, hi, refined_lo, refined_hi, .. } => {
            format!("crossover between {lo} and {hi}, refined to [{refined_lo}, {refined_hi}]")
        }
        Verdict::ConstantSign { winner } => format!("constant sign, winner {winner:?}"),
        Verdict::NoComparablePoints => "no comparable points".into(),
    }
}

fn crossover(p: &Paper) -> Outcome {
    let a = StrategyConfig::only(&["safety_stock"]).unwrap();
    let b = StrategyConfig::only(&["stockpiling"]).unwrap();
    let spec = sweep_spec(SweepParameter::Capacity, "1.0:0.8:0.02", a, 40);
    let first = compare_strategies(&p.inst, &p.scen, &a, &b, &spec).map_err(|e| e.to_string())?;
    let second = compare_strategies(&p.inst, &p.scen, &a, &b, &spec).map_err(|e| e.to_string())?;
    if first.verdict != second.verdict || first.points != second.points {
        return Err("repeated comparison differs".into());
    }
    let feasible = first.points.iter().filter(|q| q.z_total_a.is_some() && q.z_total_b.is_some()).count();
    match first.verdict {
        Verdict::NoComparablePoints => Err("no grid point solved under both configurations".into()),
        ref v => Ok(format!("{} ({feasible} comparable points, deterministic)", describe(v))),
    }
}

fn paper_lp_and_scale(p: &Paper, lp_failures: &mut Vec<String>, lp_count: &mut usize) -> Outcome {
    let mut parts = Vec::new();
    for (label, cfg) in [("all-off", StrategyConfig::default()), ("all-on", all_strategies())] {
        let model = p.model(&cfg);
        let t = Instant::now();
        let lp = solve_relaxation(&model, &SolverOptions::default());
        let lp_secs = t.elapsed().as_secs_f64();
        if lp.status != LpStatus::Optimal || lp_secs >= 10.0 {
            return Err(format!("{label}: LP {:?} in {lp_secs:.2} s", lp.status));
        }
        let t = Instant::now();
        let r = solve(label, &model, &gap_opts(), None);
        let mip_secs = t.elapsed().as_secs_f64();
        if r.incumbent.is_none() || r.gap > 0.01 || mip_secs >= 120.0 {
            return Err(format!("{label}: gap {} after {mip_secs:.1} s", r.gap));
        }
        *lp_count += 1;
        if let Err(e) = lp_checks(label, &model, r.bound) {
            lp_failures.push(e);
        }
        parts.push(format!("{label} LP {lp_secs:.2} s, MIP gap {:.3}% in {mip_secs:.1} s", 100.0 * r.gap));
    }
    let model = p.model(&StrategyConfig::default());
    let opts = SolverOptions {
        seed: 7,
        ..gap_opts()
    };
    let report = |r: &MipResult| {
        let prov = provenance(&p.inst, &p.scen, &StrategyConfig::default(), &model.options, &opts);
        SolutionReport::new(&model, r, prov).to_json()
    };
    let a = solve("seed 7 run 1", &model, &opts, None);
    let b = solve("seed 7 run 2", &model, &opts, None);
    if report(&a) != report(&b) || a.nodes != b.nodes {
        return Err("seed 7 runs differ".into());
    }
    parts.push("seed 7 reports byte-identical".into());
    Ok(parts.join("; "))
}

fn mps_goldens(lp_failures: &mut Vec<String>, lp_count: &mut usize) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (name, model) in [("tiny.mps", tiny_fixture()), ("rich.mps", rich_fixture())] {
        let path = dir.path().join(name);
        export_mps(&model, &path).map_err(|e| e.to_string())?;
        let ours = std::fs::read(&path).map_err(|e| e.to_string())?;
        let frozen = std::fs::read(golden(name)).map_err(|e| e.to_string())?;
        if ours != frozen {
            return Err(format!("{name} differs from the golden file"));
        }
        let opts = SolverOptions::default();
        let direct = solve_relaxation(&model, &opts);
        let imported = solve_lp(&import_mps(golden(name)).map_err(|e| e.to_string())?, &opts);
        if (direct.objective - imported.objective).abs() > 1e-9 * direct.objective.abs().max(1.0) {
            return Err(format!("{name}: LP {} after import vs {}", imported.objective, direct.objective));
        }
        let mip = solve(name, &model, &opts, None);
        *lp_count += 1;
        if let Err(e) = lp_checks(name, &model, mip.objective) {
            lp_failures.push(e);
        }
    }
    Ok("tiny.mps and rich.mps byte-identical; imported LP optima equal".into())
}

fn line(n: usize, title: &str, o: &Outcome) -> bool {
    match o {
        Ok(detail) => println!("PASS  {n}. {title}: {detail}"),
        Err(reason) => println!("FAIL  {n}. {title}: {reason}"),
    }
    o.is_ok()
}

#[test]
fn acceptance() {
    let started = Instant::now();
    let (inst, scen) = paper_like();
    let paper = Paper { inst, scen };
    let mut lp_failures = Vec::new();
    let mut lp_count = 0;

    let c1 = oracle_equivalence(&mut lp_failures, &mut lp_count);
    let c7 = paper_lp_and_scale(&paper, &mut lp_failures, &mut lp_count);
    let c3 = monotonicity(&paper);
    let c4 = cap_sweep(&paper);
    let c5 = crossover(&paper);
    let c8 = mps_goldens(&mut lp_failures, &mut lp_count);
    let c6 = if lp_failures.is_empty() {
        Ok(format!("{lp_count} instances: LP <= MIP, primal = dual within 1e-9"))
    } else {
        Err(lp_failures.join("; "))
    };
    let c2 = AUDIT.with(|a| {
        let a = a.borrow();
        if a.failures.is_empty() {
            Ok(format!("{} incumbents feasible at 1e-6, objective and decomposition within 1e-9", a.checked))
        } else {
            Err(a.failures.join("; "))
        }
    });

    println!();
    let results = [
        line(1, "oracle equivalence", &c1),
        line(2, "feasibility and decomposition", &c2),
        line(3, "strategy monotonicity", &c3),
        line(4, "cap sweep shape", &c4),
        line(5, "safety stock vs stockpiling crossover", &c5),
        line(6, "LP bound sanity", &c6),
        line(7, "determinism and scale", &c7),
        line(8, "MPS golden files", &c8),
    ];
    println!("acceptance finished in {:.0} s", started.elapsed().as_secs_f64());
    assert!(results.iter().all(|&ok| ok), "acceptance criteria failed");
}
