//! Solver front end for [`MilpModel`]s and the solution report format.

use std::path::Path;

use gsc_lp::mps;
use gsc_lp::{LpResult, MipResult, MipStatus, Problem, SolverOptions};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::CoreError;
use crate::instance::{instance_hash, Instance, ScenarioSet, StrategyConfig};
use crate::model::{check_feasibility, evaluate_solution, MilpModel, ModelOptions, ObjectiveBreakdown};

pub const TOOL_NAME: &str = "gscd";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn solve_relaxation(model: &MilpModel, opts: &SolverOptions) -> LpResult {
    gsc_lp::solve_lp(&model.problem, opts)
}

pub fn solve_model(model: &MilpModel, opts: &SolverOptions, start: Option<&[f64]>) -> MipResult {
    gsc_lp::solve_mip_with_start(&model.problem, opts, start)
}

pub fn export_mps(model: &MilpModel, path: impl AsRef<Path>) -> Result<(), CoreError> {
    let path = path.as_ref();
    let text = mps::to_mps_string(&model.problem)?;
    std::fs::write(path, text).map_err(|e| CoreError::io(path, e))
}

pub fn import_mps(path: impl AsRef<Path>) -> Result<Problem, CoreError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    Ok(mps::read_mps(std::io::BufReader::new(file))?)
}

/// Everything needed to re-derive a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub instance_sha256: String,
    pub options: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTerms {
    pub scenario: usize,
    pub probability: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub emission: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBlock {
    pub z_total: f64,
    pub z1: f64,
    pub z2: f64,
    pub c1: f64,
    pub setup_cost: f64,
    pub scenarios: Vec<ScenarioTerms>,
}

impl ObjectiveBlock {
    pub fn new(b: &ObjectiveBreakdown, probability: &[f64]) -> Self {
        ObjectiveBlock {
            z_total: b.z_total,
            z1: b.z1,
            z2: b.z2,
            c1: b.c1,
            setup_cost: b.setup_cost,
            scenarios: (0..b.c2.len())
                .map(|s| ScenarioTerms {
                    scenario: s + 1,
                    probability: probability[s],
                    c2: b.c2[s],
                    c3: b.c3[s],
                    c4: b.c4[s],
                    emission: b.emission[s],
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBlock {
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub root_bound: Option<f64>,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEntry {
    pub var: String,
    /// 1-based indices in the variable's own order, scenario excluded.
    pub index: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scenario: Option<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub provenance: Provenance,
    pub status: String,
    pub objective: Option<ObjectiveBlock>,
    pub search: SearchBlock,
    pub first_stage: Vec<ValueEntry>,
    pub second_stage: Vec<ValueEntry>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Values closer than this to an integer are reported as that integer.
const SNAP: f64 = 1e-9;

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= SNAP * r.abs().max(1.0) {
        r + 0.0
    } else {
        v
    }
}

/// Nonzero values of `x`, split into first-stage and second-stage entries.
pub fn value_entries(model: &MilpModel, x: &[f64]) -> (Vec<ValueEntry>, Vec<ValueEntry>) {
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (key, &v) in model.var_map.keys.iter().zip(x) {
        let v = snap(v);
        if v == 0.0 {
            continue;
        }
        let entry = ValueEntry {
            var: key.family().to_string(),
            index: key.indices(),
            scenario: key.scenario().map(|s| s + 1),
            value: v,
        };
        if key.is_first_stage() {
            first.push(entry);
        } else {
            second.push(entry);
        }
    }
    (first, second)
}

impl SolutionReport {
    pub fn new(model: &MilpModel, result: &MipResult, provenance: Provenance) -> Self {
        let mut first_stage = Vec::new();
        let mut second_stage = Vec::new();
        let mut objective = None;
        if let Some(x) = &result.incumbent {
            let b = evaluate_solution(model, x).expect("incumbent matches the model");
            objective = Some(ObjectiveBlock::new(&b, &model.scenarios.probability));
            (first_stage, second_stage) = value_entries(model, x);
        }
        SolutionReport {
            provenance,
            status: result.status.name().to_string(),
            objective,
            search: SearchBlock {
                objective: finite(result.objective),
                bound: finite(result.bound),
                gap: finite(result.gap),
                root_bound: finite(result.root_bound),
                nodes: result.nodes,
            },
            first_stage,
            second_stage,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }

    pub fn is_infeasible(&self) -> bool {
        self.status == MipStatus::Infeasible.name()
    }
}

/// Incumbent check used by tests and the CLI: the point satisfies every row
/// within `tol` and the independent evaluator reproduces the solver's
/// objective to `rel` relative accuracy.
pub fn verify_incumbent(
    model: &MilpModel,
    x: &[f64],
    objective: f64,
    tol: f64,
    rel: f64,
) -> Result<ObjectiveBreakdown, String> {
    let violations = check_feasibility(model, x, tol);
    if let Some(v) = violations.first() {
        return Err(format!("{} violation(s), first: {v}", violations.len()));
    }
    let b = evaluate_solution(model, x).map_err(|e| e.to_string())?;
    let scale = objective.abs().max(1.0);
    if (b.z_total - objective).abs() > rel * scale {
        return Err(format!(
            "evaluator gives {} but the solver reported {objective}",
            b.z_total
        ));
    }
    Ok(b)
}

/// Option set recorded in every output file.
pub fn options_json(cfg: &StrategyConfig, model: &ModelOptions, solver: &SolverOptions) -> serde_json::Value {
    json!({
        "strategies": cfg,
        "weights": [model.weights.cost, model.weights.emission],
        "cap_mode": model.cap_mode.name(),
        "delay_mode": model.delay_mode.name(),
        "integrality": model.integrality.name(),
        "seed": solver.seed,
        "tol_feas": solver.tol_feas,
        "tol_int": solver.tol_int,
        "tol_opt": solver.tol_opt,
        "rel_gap": solver.rel_gap,
        "node_limit": solver.node_limit,
        "time_limit_s": solver.time_limit.map(|d| d.as_secs_f64()),
        "iteration_limit": solver.iteration_limit,
        "branching": solver.branching.name(),
    })
}

pub fn provenance(
    inst: &Instance,
    scen: &ScenarioSet,
    cfg: &StrategyConfig,
    model: &ModelOptions,
    solver: &SolverOptions,
) -> Provenance {
    Provenance {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        instance_sha256: instance_hash(inst, scen, cfg),
        options: options_json(cfg, model, solver),
    }
}
