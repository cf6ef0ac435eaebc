//! Deterministic-equivalent MILP assembly.
//!
//! Columns are laid out family by family (XX, YY, ZZ, U, V, X, Y, Z, MI, MS,
//! MSS, SP), each in lexicographic order of its index tuple with the
//! scenario last. Rows carry a family tag and a 1-based index tuple.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use gsc_lp::{Problem, Relation, Row};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::instance::{
    validate_config, validate_instance, Instance, Link, ScenarioSet, StrategyConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapMode {
    /// One cap row per period and scenario.
    #[default]
    PerScenario,
    /// One cap row per period summing every scenario.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayMode {
    /// Delay cost weighted by scenario probability.
    #[default]
    Expected,
    /// Delay cost summed over scenarios.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrality {
    /// Only link and facility binaries are integer.
    #[default]
    Relaxed,
    /// Every column is integer.
    Full,
}

macro_rules! mode_names {
    ($ty:ident { $($variant:ident => $name:literal),* }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self { $($ty::$variant => $name),* }
            }
        }
        impl std::str::FromStr for $ty {
            type Err = CoreError;
            fn from_str(s: &str) -> Result<Self, CoreError> {
                match s {
                    $($name => Ok($ty::$variant),)*
                    other => Err(CoreError::Config(format!(
                        "unknown {} `{other}`", stringify!($ty)
                    ))),
                }
            }
        }
    };
}

mode_names!(CapMode { PerScenario => "perscenario", Literal => "literal" });
mode_names!(DelayMode { Expected => "expected", Literal => "literal" });
mode_names!(Integrality { Relaxed => "relaxed", Full => "full" });

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub cost: f64,
    pub emission: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            cost: 1.0,
            emission: 1.0,
        }
    }
}

impl std::str::FromStr for Weights {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self, CoreError> {
        let parts: Vec<&str> = s.split(',').collect();
        let parse = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CoreError::Config(format!("bad weight `{p}`")))
        };
        match parts.as_slice() {
            [a, b] => Ok(Weights {
                cost: parse(a)?,
                emission: parse(b)?,
            }),
            _ => Err(CoreError::Config(format!("weights must be `w1,w2`, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelOptions {
    pub weights: Weights,
    pub cap_mode: CapMode,
    pub delay_mode: DelayMode,
    pub integrality: Integrality,
}

/// Variable tuple; indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey {
    XX { i: usize, j: usize, t: usize, l: usize },
    YY { j: usize, k: usize, t: usize, l: usize },
    ZZ { k: usize, m: usize, t: usize, l: usize },
    U { j: usize },
    V { k: usize },
    X { i: usize, j: usize, t: usize, l: usize, s: usize },
    Y { j: usize, k: usize, t: usize, l: usize, s: usize },
    Z { k: usize, m: usize, t: usize, l: usize, s: usize },
    MI { j: usize, t: usize, s: usize },
    MS { j: usize, t: usize, s: usize },
    MSS { j: usize, t: usize, s: usize },
    SP { j: usize, t: usize, s: usize },
}

impl VarKey {
    pub fn family(&self) -> &'static str {
        match self {
            VarKey::XX { .. } => "XX",
            VarKey::YY { .. } => "YY",
            VarKey::ZZ { .. } => "ZZ",
            VarKey::U { .. } => "U",
            VarKey::V { .. } => "V",
            VarKey::X { .. } => "X",
            VarKey::Y { .. } => "Y",
            VarKey::Z { .. } => "Z",
            VarKey::MI { .. } => "MI",
            VarKey::MS { .. } => "MS",
            VarKey::MSS { .. } => "MSS",
            VarKey::SP { .. } => "SP",
        }
    }

    fn code(&self) -> &'static str {
        match self {
            VarKey::XX { .. } => "XX",
            VarKey::YY { .. } => "YY",
            VarKey::ZZ { .. } => "ZZ",
            VarKey::U { .. } => "UO",
            VarKey::V { .. } => "VO",
            VarKey::X { .. } => "XF",
            VarKey::Y { .. } => "YF",
            VarKey::Z { .. } => "ZF",
            VarKey::MI { .. } => "MI",
            VarKey::MS { .. } => "MS",
            VarKey::MSS { .. } => "SS",
            VarKey::SP { .. } => "SP",
        }
    }

    pub fn is_first_stage(&self) -> bool {
        matches!(
            self,
            VarKey::XX { .. } | VarKey::YY { .. } | VarKey::ZZ { .. } | VarKey::U { .. } | VarKey::V { .. }
        )
    }

    pub fn scenario(&self) -> Option<usize> {
        match *self {
            VarKey::X { s, .. }
            | VarKey::Y { s, .. }
            | VarKey::Z { s, .. }
            | VarKey::MI { s, .. }
            | VarKey::MS { s, .. }
            | VarKey::MSS { s, .. }
            | VarKey::SP { s, .. } => Some(s),
            _ => None,
        }
    }

    /// 1-based indices without the scenario.
    pub fn indices(&self) -> Vec<usize> {
        let v = match *self {
            VarKey::XX { i, j, t, l } | VarKey::X { i, j, t, l, .. } => vec![i, j, t, l],
            VarKey::YY { j, k, t, l } | VarKey::Y { j, k, t, l, .. } => vec![j, k, t, l],
            VarKey::ZZ { k, m, t, l } | VarKey::Z { k, m, t, l, .. } => vec![k, m, t, l],
            VarKey::U { j } => vec![j],
            VarKey::V { k } => vec![k],
            VarKey::MI { j, t, .. }
            | VarKey::MS { j, t, .. }
            | VarKey::MSS { j, t, .. }
            | VarKey::SP { j, t, .. } => vec![j, t],
        };
        v.into_iter().map(|x| x + 1).collect()
    }
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.indices().iter().map(|v| v.to_string()).collect();
        write!(f, "{}[{}]", self.family(), idx.join(","))?;
        if let Some(s) = self.scenario() {
            write!(f, "^{}", s + 1)?;
        }
        Ok(())
    }
}

/// Entity counts that take part in the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveSets {
    pub suppliers: usize,
    pub manufacturers: usize,
    pub warehouses: usize,
    pub retailers: usize,
    pub periods: usize,
    pub modes: usize,
    pub scenarios: usize,
    pub main_manufacturers: usize,
    pub main_warehouses: usize,
}

impl ActiveSets {
    pub fn new(inst: &Instance, cfg: &StrategyConfig) -> Self {
        let s = &inst.sets;
        ActiveSets {
            suppliers: s.n_suppliers_main + if cfg.backup_suppliers { s.n_suppliers_backup } else { 0 },
            manufacturers: s.n_manufacturers_main
                + if cfg.temporary_facilities { s.n_manufacturers_temp } else { 0 },
            warehouses: s.n_warehouses_main
                + if cfg.temporary_facilities { s.n_warehouses_temp } else { 0 },
            retailers: s.n_retailers,
            periods: s.n_periods,
            modes: s.n_modes,
            scenarios: s.n_scenarios,
            main_manufacturers: s.n_manufacturers_main,
            main_warehouses: s.n_warehouses_main,
        }
    }

    pub fn temp_manufacturers(&self) -> Range<usize> {
        self.main_manufacturers..self.manufacturers
    }

    pub fn temp_warehouses(&self) -> Range<usize> {
        self.main_warehouses..self.warehouses
    }

    pub fn link_extent(&self, link: Link) -> (usize, usize) {
        match link {
            Link::SupplierManufacturer => (self.suppliers, self.manufacturers),
            Link::ManufacturerWarehouse => (self.manufacturers, self.warehouses),
            Link::WarehouseRetailer => (self.warehouses, self.retailers),
        }
    }
}

pub fn link_binary(link: Link, o: usize, d: usize, t: usize, l: usize) -> VarKey {
    match link {
        Link::SupplierManufacturer => VarKey::XX { i: o, j: d, t, l },
        Link::ManufacturerWarehouse => VarKey::YY { j: o, k: d, t, l },
        Link::WarehouseRetailer => VarKey::ZZ { k: o, m: d, t, l },
    }
}

pub fn link_flow(link: Link, o: usize, d: usize, t: usize, l: usize, s: usize) -> VarKey {
    match link {
        Link::SupplierManufacturer => VarKey::X { i: o, j: d, t, l, s },
        Link::ManufacturerWarehouse => VarKey::Y { j: o, k: d, t, l, s },
        Link::WarehouseRetailer => VarKey::Z { k: o, m: d, t, l, s },
    }
}

/// Bijection between variable tuples and column indices.
#[derive(Debug, Clone)]
pub struct VariableMap {
    pub keys: Vec<VarKey>,
    index: HashMap<VarKey, usize>,
    pub active: ActiveSets,
    pub has_mss: bool,
    pub has_sp: bool,
}

impl VariableMap {
    pub fn get(&self, key: &VarKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    fn col(&self, key: VarKey) -> usize {
        self.index[&key]
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowFamily {
    LinkingX,
    LinkingY,
    LinkingZ,
    SingleModeX,
    SingleModeY,
    SingleModeZ,
    Balance,
    FlowThrough,
    Demand,
    EmissionCap,
    MinSuppliers,
    CapacityMfg,
    CapacityWh,
    ActivationMfg,
    ActivationWhIn,
    ActivationWhOut,
}

impl RowFamily {
    pub const ALL: [RowFamily; 16] = [
        RowFamily::LinkingX,
        RowFamily::LinkingY,
        RowFamily::LinkingZ,
        RowFamily::SingleModeX,
        RowFamily::SingleModeY,
        RowFamily::SingleModeZ,
        RowFamily::Balance,
        RowFamily::FlowThrough,
        RowFamily::Demand,
        RowFamily::EmissionCap,
        RowFamily::MinSuppliers,
        RowFamily::CapacityMfg,
        RowFamily::CapacityWh,
        RowFamily::ActivationMfg,
        RowFamily::ActivationWhIn,
        RowFamily::ActivationWhOut,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RowFamily::LinkingX => "linking-x",
            RowFamily::LinkingY => "linking-y",
            RowFamily::LinkingZ => "linking-z",
            RowFamily::SingleModeX => "single-mode-x",
            RowFamily::SingleModeY => "single-mode-y",
            RowFamily::SingleModeZ => "single-mode-z",
            RowFamily::Balance => "balance",
            RowFamily::FlowThrough => "flow-through",
            RowFamily::Demand => "demand",
            RowFamily::EmissionCap => "emission-cap",
            RowFamily::MinSuppliers => "min-suppliers",
            RowFamily::CapacityMfg => "capacity-mfg",
            RowFamily::CapacityWh => "capacity-wh",
            RowFamily::ActivationMfg => "activation-mfg",
            RowFamily::ActivationWhIn => "activation-wh-in",
            RowFamily::ActivationWhOut => "activation-wh-out",
        }
    }

    fn code(self) -> &'static str {
        match self {
            RowFamily::LinkingX => "LX",
            RowFamily::LinkingY => "LY",
            RowFamily::LinkingZ => "LZ",
            RowFamily::SingleModeX => "OX",
            RowFamily::SingleModeY => "OY",
            RowFamily::SingleModeZ => "OZ",
            RowFamily::Balance => "BM",
            RowFamily::FlowThrough => "FW",
            RowFamily::Demand => "DM",
            RowFamily::EmissionCap => "EC",
            RowFamily::MinSuppliers => "SM",
            RowFamily::CapacityMfg => "CM",
            RowFamily::CapacityWh => "CW",
            RowFamily::ActivationMfg => "AM",
            RowFamily::ActivationWhIn => "AI",
            RowFamily::ActivationWhOut => "AO",
        }
    }

    fn for_link(link: Link, linking: bool) -> Self {
        match (link, linking) {
            (Link::SupplierManufacturer, true) => RowFamily::LinkingX,
            (Link::ManufacturerWarehouse, true) => RowFamily::LinkingY,
            (Link::WarehouseRetailer, true) => RowFamily::LinkingZ,
            (Link::SupplierManufacturer, false) => RowFamily::SingleModeX,
            (Link::ManufacturerWarehouse, false) => RowFamily::SingleModeY,
            (Link::WarehouseRetailer, false) => RowFamily::SingleModeZ,
        }
    }
}

/// Constraint family plus a 1-based index tuple such as `m=1,t=1,s=1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RowTag {
    pub family: RowFamily,
    pub index: Vec<(&'static str, usize)>,
}

impl RowTag {
    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.iter().find(|p| p.0 == name).map(|p| p.1)
    }
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.index.iter().map(|(n, v)| format!("{n}={v}")).collect();
        write!(f, "{}({})", self.family.name(), idx.join(","))
    }
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    /// Combined objective `w1 * cost + w2 * emission`, bounds, integrality
    /// and rows, ready for the solver.
    pub problem: Problem,
    pub objective_cost: Vec<(usize, f64)>,
    /// Constant part of the cost objective (information-sharing charge).
    pub cost_offset: f64,
    pub objective_emission: Vec<(usize, f64)>,
    pub row_tags: Vec<RowTag>,
    pub var_map: VariableMap,
    pub options: ModelOptions,
    pub instance: Instance,
    pub scenarios: ScenarioSet,
    pub strategies: StrategyConfig,
}

impl MilpModel {
    pub fn n_cols(&self) -> usize {
        self.problem.n_cols()
    }

    pub fn n_rows(&self) -> usize {
        self.problem.n_rows()
    }

    /// Value of the combined objective at `x`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.problem.objective_value(x)
    }

    /// Row, column and nonzero counts per row family, in family order.
    pub fn family_stats(&self) -> Vec<(RowFamily, usize, usize)> {
        let mut counts: HashMap<RowFamily, (usize, usize)> = HashMap::new();
        for (tag, row) in self.row_tags.iter().zip(&self.problem.rows) {
            let e = counts.entry(tag.family).or_default();
            e.0 += 1;
            e.1 += row.coefs.len();
        }
        RowFamily::ALL
            .iter()
            .filter_map(|f| counts.get(f).map(|&(r, n)| (*f, r, n)))
            .collect()
    }

    /// Column counts per variable family, in column order.
    pub fn column_stats(&self) -> Vec<(&'static str, usize)> {
        let mut out: Vec<(&'static str, usize)> = Vec::new();
        for key in &self.var_map.keys {
            match out.last_mut() {
                Some((f, n)) if *f == key.family() => *n += 1,
                _ => out.push((key.family(), 1)),
            }
        }
        out
    }

    /// Copy with every second-stage column bounded above by `ub`.
    pub fn with_second_stage_bound(&self, ub: f64) -> MilpModel {
        let mut m = self.clone();
        for (j, key) in self.var_map.keys.iter().enumerate() {
            if !key.is_first_stage() {
                m.problem.col_upper[j] = ub;
            }
        }
        m
    }

    /// Maps a point of `from` into this model's columns by variable tuple.
    /// Returns `None` when a nonzero of `x` has no counterpart here.
    pub fn embed(&self, from: &MilpModel, x: &[f64]) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.n_cols()];
        for (j, key) in from.var_map.keys.iter().enumerate() {
            match self.var_map.get(key) {
                Some(c) => out[c] = x[j],
                None if x[j] != 0.0 => return None,
                None => {}
            }
        }
        Some(out)
    }
}

fn tag(family: RowFamily, index: &[(&'static str, usize)]) -> RowTag {
    RowTag {
        family,
        index: index.iter().map(|&(n, v)| (n, v + 1)).collect(),
    }
}

struct Builder {
    problem: Problem,
    tags: Vec<RowTag>,
    family_count: HashMap<&'static str, usize>,
}

impl Builder {
    fn add_row(&mut self, tag: RowTag, coefs: Vec<(usize, f64)>, rel: Relation, rhs: f64) {
        let coefs: Vec<(usize, f64)> = coefs.into_iter().filter(|c| c.1 != 0.0).collect();
        let n = self.family_count.entry(tag.family.code()).or_default();
        *n += 1;
        let name = format!("{}{:06}", tag.family.code(), n);
        self.problem.add_row(name, Row::new(coefs, rel, rhs));
        self.tags.push(tag);
    }
}

/// Per-unit transport emission after the information-sharing reduction.
pub fn transport_emission(
    inst: &Instance,
    cfg: &StrategyConfig,
    link: Link,
    o: usize,
    d: usize,
    l: usize,
) -> f64 {
    let base = inst.params.emission_transport.get(link)[o][d][l];
    if cfg.info_sharing {
        (base - inst.params.emission_saving).max(0.0)
    } else {
        base
    }
}

/// Delay-cost coefficient of one link binary.
pub fn delay_coefficient(
    inst: &Instance,
    scen: &ScenarioSet,
    cfg: &StrategyConfig,
    mode: DelayMode,
    link: Link,
    o: usize,
    d: usize,
    l: usize,
) -> f64 {
    let p = &inst.params;
    let saved = if cfg.info_sharing {
        p.saved_time.get(link)[o][d][l]
    } else {
        0.0
    };
    let delays = &p.transport_delay.get(link)[o][d][l];
    let mut total = 0.0;
    for (s, &delay) in delays.iter().enumerate() {
        let w = match mode {
            DelayMode::Expected => scen.probability[s],
            DelayMode::Literal => 1.0,
        };
        total += w * (delay - saved).max(0.0);
    }
    p.delay_cost * total
}

/// Assembles the deterministic-equivalent model.
pub fn build_model(
    inst: &Instance,
    scen: &ScenarioSet,
    cfg: &StrategyConfig,
    opts: &ModelOptions,
) -> Result<MilpModel, CoreError> {
    let report = validate_instance(inst, scen);
    if !report.is_valid() {
        return Err(CoreError::Invalid(report));
    }
    let report = validate_config(inst, cfg);
    if !report.is_valid() {
        return Err(CoreError::Config(report.to_string().trim_end().to_string()));
    }
    let w = opts.weights;
    if !(w.cost >= 0.0 && w.emission >= 0.0 && w.cost.is_finite() && w.emission.is_finite())
        || (w.cost == 0.0 && w.emission == 0.0)
    {
        return Err(CoreError::Config(format!(
            "weights must be non-negative and not both zero, got ({}, {})",
            w.cost, w.emission
        )));
    }

    let a = ActiveSets::new(inst, cfg);
    let p = &inst.params;
    let (nt, nl, ns) = (a.periods, a.modes, a.scenarios);
    let full = opts.integrality == Integrality::Full;

    // Columns.
    let mut keys = Vec::new();
    for link in Link::ALL {
        let (no, nd) = a.link_extent(link);
        for o in 0..no {
            for d in 0..nd {
                for t in 0..nt {
                    for l in 0..nl {
                        keys.push(link_binary(link, o, d, t, l));
                    }
                }
            }
        }
    }
    for j in a.temp_manufacturers() {
        keys.push(VarKey::U { j });
    }
    for k in a.temp_warehouses() {
        keys.push(VarKey::V { k });
    }
    for link in Link::ALL {
        let (no, nd) = a.link_extent(link);
        for o in 0..no {
            for d in 0..nd {
                for t in 0..nt {
                    for l in 0..nl {
                        for s in 0..ns {
                            keys.push(link_flow(link, o, d, t, l, s));
                        }
                    }
                }
            }
        }
    }
    type Stock = fn(usize, usize, usize) -> VarKey;
    let mut stocks: Vec<Stock> = vec![
        |j, t, s| VarKey::MI { j, t, s },
        |j, t, s| VarKey::MS { j, t, s },
    ];
    if cfg.safety_stock {
        stocks.push(|j, t, s| VarKey::MSS { j, t, s });
    }
    if cfg.stockpiling {
        stocks.push(|j, t, s| VarKey::SP { j, t, s });
    }
    for make in &stocks {
        for j in 0..a.manufacturers {
            for t in 0..nt {
                for s in 0..ns {
                    keys.push(make(j, t, s));
                }
            }
        }
    }
    let index: HashMap<VarKey, usize> = keys.iter().enumerate().map(|(c, k)| (*k, c)).collect();
    let vm = VariableMap {
        keys,
        index,
        active: a,
        has_mss: cfg.safety_stock,
        has_sp: cfg.stockpiling,
    };

    // Objective vectors.
    let mut cost = vec![0.0; vm.len()];
    let mut emission = vec![0.0; vm.len()];
    let pr = &scen.probability;
    for (c, key) in vm.keys.iter().enumerate() {
        match *key {
            VarKey::XX { i, j, l, .. } => {
                cost[c] = delay_coefficient(inst, scen, cfg, opts.delay_mode, Link::SupplierManufacturer, i, j, l)
            }
            VarKey::YY { j, k, l, .. } => {
                cost[c] = delay_coefficient(inst, scen, cfg, opts.delay_mode, Link::ManufacturerWarehouse, j, k, l)
            }
            VarKey::ZZ { k, m, l, .. } => {
                cost[c] = delay_coefficient(inst, scen, cfg, opts.delay_mode, Link::WarehouseRetailer, k, m, l)
            }
            VarKey::U { j } => cost[c] = p.setup_temp_mfg[j - a.main_manufacturers],
            VarKey::V { k } => cost[c] = p.setup_temp_wh[k - a.main_warehouses],
            VarKey::X { i, j, l, s, .. } => {
                let link = Link::SupplierManufacturer;
                cost[c] = pr[s] * p.transport_cost.get(link)[i][j][l][s];
                emission[c] = pr[s] * transport_emission(inst, cfg, link, i, j, l);
            }
            VarKey::Y { j, k, l, s, .. } => {
                let link = Link::ManufacturerWarehouse;
                cost[c] = pr[s] * p.transport_cost.get(link)[j][k][l][s];
                emission[c] =
                    pr[s] * (p.emission_prod[j] + transport_emission(inst, cfg, link, j, k, l));
            }
            VarKey::Z { k, m, l, s, .. } => {
                let link = Link::WarehouseRetailer;
                cost[c] = pr[s] * p.transport_cost.get(link)[k][m][l][s];
                emission[c] = pr[s] * transport_emission(inst, cfg, link, k, m, l);
            }
            VarKey::MI { j, s, .. } | VarKey::MSS { j, s, .. } => cost[c] = pr[s] * p.inv_cost[j][s],
            VarKey::MS { j, s, .. } => cost[c] = pr[s] * p.short_cost[j][s],
            VarKey::SP { s, .. } => cost[c] = pr[s] * p.stockpile_premium,
        }
    }
    let cost_offset = if cfg.info_sharing {
        p.info_setup + p.info_training
    } else {
        0.0
    };

    let mut b = Builder {
        problem: Problem::new("GSCD"),
        tags: Vec::new(),
        family_count: HashMap::new(),
    };
    let mut ordinal: HashMap<&'static str, usize> = HashMap::new();
    for (c, key) in vm.keys.iter().enumerate() {
        let n = ordinal.entry(key.code()).or_default();
        *n += 1;
        let binary = key.is_first_stage();
        let combined = w.cost * cost[c] + w.emission * emission[c];
        b.problem.add_col(
            format!("{}{:06}", key.code(), n),
            combined,
            0.0,
            if binary { 1.0 } else { f64::INFINITY },
            binary || full,
        );
    }
    b.problem.objective_offset = w.cost * cost_offset;

    // (a) linking and (b) single mode.
    for link in Link::ALL {
        let (no, nd) = a.link_extent(link);
        let names = match link {
            Link::SupplierManufacturer => ["i", "j"],
            Link::ManufacturerWarehouse => ["j", "k"],
            Link::WarehouseRetailer => ["k", "m"],
        };
        for o in 0..no {
            for d in 0..nd {
                for t in 0..nt {
                    for l in 0..nl {
                        let bin = vm.col(link_binary(link, o, d, t, l));
                        for s in 0..ns {
                            let flow = vm.col(link_flow(link, o, d, t, l, s));
                            b.add_row(
                                tag(
                                    RowFamily::for_link(link, true),
                                    &[(names[0], o), (names[1], d), ("t", t), ("l", l), ("s", s)],
                                ),
                                vec![(flow, 1.0), (bin, -p.big_m)],
                                Relation::Le,
                                0.0,
                            );
                        }
                    }
                }
            }
        }
        for o in 0..no {
            for d in 0..nd {
                for t in 0..nt {
                    let coefs = (0..nl)
                        .map(|l| (vm.col(link_binary(link, o, d, t, l)), 1.0))
                        .collect();
                    b.add_row(
                        tag(
                            RowFamily::for_link(link, false),
                            &[(names[0], o), (names[1], d), ("t", t)],
                        ),
                        coefs,
                        Relation::Le,
                        1.0,
                    );
                }
            }
        }
    }

    // (c) manufacturer balance.
    for j in 0..a.manufacturers {
        for t in 0..nt {
            for s in 0..ns {
                let mut coefs = Vec::new();
                for i in 0..a.suppliers {
                    for l in 0..nl {
                        coefs.push((vm.col(VarKey::X { i, j, t, l, s }), 1.0));
                    }
                }
                for k in 0..a.warehouses {
                    for l in 0..nl {
                        coefs.push((vm.col(VarKey::Y { j, k, t, l, s }), -1.0));
                    }
                }
                coefs.push((vm.col(VarKey::MS { j, t, s }), 1.0));
                coefs.push((vm.col(VarKey::MI { j, t, s }), -1.0));
                if t > 0 {
                    coefs.push((vm.col(VarKey::MI { j, t: t - 1, s }), 1.0));
                    coefs.push((vm.col(VarKey::MS { j, t: t - 1, s }), -1.0));
                }
                if cfg.safety_stock {
                    coefs.push((vm.col(VarKey::MSS { j, t, s }), -1.0));
                    if t > 0 {
                        coefs.push((vm.col(VarKey::MSS { j, t: t - 1, s }), 1.0));
                    }
                }
                if cfg.stockpiling {
                    coefs.push((vm.col(VarKey::SP { j, t, s }), 1.0));
                }
                b.add_row(
                    tag(RowFamily::Balance, &[("j", j), ("t", t), ("s", s)]),
                    coefs,
                    Relation::Eq,
                    0.0,
                );
            }
        }
    }

    // (d) warehouse flow-through.
    for k in 0..a.warehouses {
        for t in 0..nt {
            for s in 0..ns {
                let mut coefs = Vec::new();
                for j in 0..a.manufacturers {
                    for l in 0..nl {
                        coefs.push((vm.col(VarKey::Y { j, k, t, l, s }), 1.0));
                    }
                }
                for m in 0..a.retailers {
                    for l in 0..nl {
                        coefs.push((vm.col(VarKey::Z { k, m, t, l, s }), -1.0));
                    }
                }
                b.add_row(
                    tag(RowFamily::FlowThrough, &[("k", k), ("t", t), ("s", s)]),
                    coefs,
                    Relation::Eq,
                    0.0,
                );
            }
        }
    }

    // (e) demand.
    for m in 0..a.retailers {
        for t in 0..nt {
            for s in 0..ns {
                let coefs = (0..a.warehouses)
                    .flat_map(|k| (0..nl).map(move |l| (k, l)))
                    .map(|(k, l)| (vm.col(VarKey::Z { k, m, t, l, s }), 1.0))
                    .collect();
                b.add_row(
                    tag(RowFamily::Demand, &[("m", m), ("t", t), ("s", s)]),
                    coefs,
                    Relation::Eq,
                    scen.demand[m][t][s],
                );
            }
        }
    }

    // (f) emission cap.
    let cap_terms = |t: usize, s: usize| {
        let mut coefs = Vec::new();
        for link in Link::ALL {
            let (no, nd) = a.link_extent(link);
            for o in 0..no {
                for d in 0..nd {
                    for l in 0..nl {
                        let mut e = transport_emission(inst, cfg, link, o, d, l);
                        if link == Link::ManufacturerWarehouse {
                            e += p.emission_prod[o];
                        }
                        coefs.push((vm.col(link_flow(link, o, d, t, l, s)), e));
                    }
                }
            }
        }
        coefs
    };
    for t in 0..nt {
        match opts.cap_mode {
            CapMode::PerScenario => {
                for s in 0..ns {
                    b.add_row(
                        tag(RowFamily::EmissionCap, &[("t", t), ("s", s)]),
                        cap_terms(t, s),
                        Relation::Le,
                        p.cap[t],
                    );
                }
            }
            CapMode::Literal => {
                let coefs = (0..ns).flat_map(|s| cap_terms(t, s)).collect();
                b.add_row(tag(RowFamily::EmissionCap, &[("t", t)]), coefs, Relation::Le, p.cap[t]);
            }
        }
    }

    // (g) minimum suppliers.
    if cfg.multiple_sourcing {
        let sm = p.min_suppliers as f64;
        for j in 0..a.manufacturers {
            for t in 0..nt {
                let mut coefs: Vec<(usize, f64)> = (0..a.suppliers)
                    .flat_map(|i| (0..nl).map(move |l| (i, l)))
                    .map(|(i, l)| (vm.col(VarKey::XX { i, j, t, l }), 1.0))
                    .collect();
                let rhs = if a.temp_manufacturers().contains(&j) {
                    // A closed temporary manufacturer needs no suppliers.
                    coefs.push((vm.col(VarKey::U { j }), -sm));
                    0.0
                } else {
                    sm
                };
                b.add_row(
                    tag(RowFamily::MinSuppliers, &[("j", j), ("t", t)]),
                    coefs,
                    Relation::Ge,
                    rhs,
                );
            }
        }
    }

    // (h) capacity.
    for j in 0..a.manufacturers {
        for t in 0..nt {
            for s in 0..ns {
                let coefs = (0..a.warehouses)
                    .flat_map(|k| (0..nl).map(move |l| (k, l)))
                    .map(|(k, l)| (vm.col(VarKey::Y { j, k, t, l, s }), 1.0))
                    .collect();
                b.add_row(
                    tag(RowFamily::CapacityMfg, &[("j", j), ("t", t), ("s", s)]),
                    coefs,
                    Relation::Le,
                    p.mfg_capacity[j] * (1.0 - scen.mfg_capacity_loss[j][s]),
                );
            }
        }
    }
    for k in 0..a.warehouses {
        for t in 0..nt {
            for s in 0..ns {
                let coefs = (0..a.retailers)
                    .flat_map(|m| (0..nl).map(move |l| (m, l)))
                    .map(|(m, l)| (vm.col(VarKey::Z { k, m, t, l, s }), 1.0))
                    .collect();
                b.add_row(
                    tag(RowFamily::CapacityWh, &[("k", k), ("t", t), ("s", s)]),
                    coefs,
                    Relation::Le,
                    p.wh_capacity[k] * (1.0 - scen.wh_capacity_loss[k][s]),
                );
            }
        }
    }

    // (i) temporary-facility activation.
    for j in a.temp_manufacturers() {
        let u = vm.col(VarKey::U { j });
        for k in 0..a.warehouses {
            for t in 0..nt {
                for l in 0..nl {
                    b.add_row(
                        tag(RowFamily::ActivationMfg, &[("j", j), ("k", k), ("t", t), ("l", l)]),
                        vec![(vm.col(VarKey::YY { j, k, t, l }), 1.0), (u, -1.0)],
                        Relation::Le,
                        0.0,
                    );
                }
            }
        }
    }
    for k in a.temp_warehouses() {
        let v = vm.col(VarKey::V { k });
        for j in 0..a.manufacturers {
            for t in 0..nt {
                for l in 0..nl {
                    b.add_row(
                        tag(RowFamily::ActivationWhIn, &[("j", j), ("k", k), ("t", t), ("l", l)]),
                        vec![(vm.col(VarKey::YY { j, k, t, l }), 1.0), (v, -1.0)],
                        Relation::Le,
                        0.0,
                    );
                }
            }
        }
        for m in 0..a.retailers {
            for t in 0..nt {
                for l in 0..nl {
                    b.add_row(
                        tag(RowFamily::ActivationWhOut, &[("k", k), ("m", m), ("t", t), ("l", l)]),
                        vec![(vm.col(VarKey::ZZ { k, m, t, l }), 1.0), (v, -1.0)],
                        Relation::Le,
                        0.0,
                    );
                }
            }
        }
    }

    let sparse = |v: &[f64]| -> Vec<(usize, f64)> {
        v.iter()
            .enumerate()
            .filter(|p| *p.1 != 0.0)
            .map(|(c, &x)| (c, x))
            .collect()
    };
    let model = MilpModel {
        objective_cost: sparse(&cost),
        cost_offset,
        objective_emission: sparse(&emission),
        problem: b.problem,
        row_tags: b.tags,
        var_map: vm,
        options: *opts,
        instance: inst.clone(),
        scenarios: scen.clone(),
        strategies: *cfg,
    };
    model.problem.check()?;
    Ok(model)
}

/// Objective decomposition of one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub c1: f64,
    pub c2: Vec<f64>,
    pub c3: Vec<f64>,
    pub c4: Vec<f64>,
    pub emission: Vec<f64>,
    pub setup_cost: f64,
    pub z1: f64,
    pub z2: f64,
    pub z_total: f64,
}

/// Recomputes every cost and emission term from the instance data and the
/// point's variable tuples, without the model's objective vectors.
pub fn evaluate_solution(model: &MilpModel, x: &[f64]) -> Result<ObjectiveBreakdown, CoreError> {
    if x.len() != model.n_cols() {
        return Err(CoreError::Dimension(format!(
            "point has {} entries, model has {} columns",
            x.len(),
            model.n_cols()
        )));
    }
    let inst = &model.instance;
    let scen = &model.scenarios;
    let cfg = &model.strategies;
    let p = &inst.params;
    let ns = inst.sets.n_scenarios;
    let a = &model.var_map.active;
    let mut out = ObjectiveBreakdown {
        c1: 0.0,
        c2: vec![0.0; ns],
        c3: vec![0.0; ns],
        c4: vec![0.0; ns],
        emission: vec![0.0; ns],
        setup_cost: 0.0,
        z1: 0.0,
        z2: 0.0,
        z_total: 0.0,
    };
    let rce = if cfg.info_sharing { p.emission_saving } else { 0.0 };
    let cet = |link: Link, o: usize, d: usize, l: usize| {
        (p.emission_transport.get(link)[o][d][l] - rce).max(0.0)
    };
    for (key, &v) in model.var_map.keys.iter().zip(x) {
        if v == 0.0 {
            continue;
        }
        let (link, o, d, l) = match *key {
            VarKey::XX { i, j, l, .. } | VarKey::X { i, j, l, .. } => (Link::SupplierManufacturer, i, j, l),
            VarKey::YY { j, k, l, .. } | VarKey::Y { j, k, l, .. } => (Link::ManufacturerWarehouse, j, k, l),
            VarKey::ZZ { k, m, l, .. } | VarKey::Z { k, m, l, .. } => (Link::WarehouseRetailer, k, m, l),
            _ => (Link::SupplierManufacturer, 0, 0, 0),
        };
        match *key {
            VarKey::XX { .. } | VarKey::YY { .. } | VarKey::ZZ { .. } => {
                let saved = if cfg.info_sharing {
                    p.saved_time.get(link)[o][d][l]
                } else {
                    0.0
                };
                for s in 0..ns {
                    let weight = match model.options.delay_mode {
                        DelayMode::Expected => scen.probability[s],
                        DelayMode::Literal => 1.0,
                    };
                    let delay = p.transport_delay.get(link)[o][d][l][s];
                    out.c1 += v * weight * p.delay_cost * (delay - saved).max(0.0);
                }
            }
            VarKey::U { j } => out.setup_cost += v * p.setup_temp_mfg[j - a.main_manufacturers],
            VarKey::V { k } => out.setup_cost += v * p.setup_temp_wh[k - a.main_warehouses],
            VarKey::X { s, .. } | VarKey::Y { s, .. } | VarKey::Z { s, .. } => {
                out.c2[s] += v * p.transport_cost.get(link)[o][d][l][s];
                let mut e = cet(link, o, d, l);
                if let VarKey::Y { j, .. } = *key {
                    e += p.emission_prod[j];
                }
                out.emission[s] += v * e;
            }
            VarKey::MI { j, s, .. } | VarKey::MSS { j, s, .. } => out.c3[s] += v * p.inv_cost[j][s],
            VarKey::SP { s, .. } => out.c3[s] += v * p.stockpile_premium,
            VarKey::MS { j, s, .. } => out.c4[s] += v * p.short_cost[j][s],
        }
    }
    if cfg.info_sharing {
        out.setup_cost += p.info_setup + p.info_training;
    }
    let pr = &scen.probability;
    out.z1 = out.c1
        + out.setup_cost
        + (0..ns).map(|s| pr[s] * (out.c2[s] + out.c3[s] + out.c4[s])).sum::<f64>();
    out.z2 = (0..ns).map(|s| pr[s] * out.emission[s]).sum();
    let w = model.options.weights;
    out.z_total = w.cost * out.z1 + w.emission * out.z2;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    Row(RowTag),
    Bound(VarKey),
    Integrality(VarKey),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityViolation {
    pub kind: ViolationKind,
    pub amount: f64,
}

impl fmt::Display for FeasibilityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::Row(t) => write!(f, "row {t} violated by {:.3e}", self.amount),
            ViolationKind::Bound(k) => write!(f, "bound of {k} violated by {:.3e}", self.amount),
            ViolationKind::Integrality(k) => {
                write!(f, "{k} is {:.3e} away from an integer", self.amount)
            }
        }
    }
}

/// Every row, bound and integrality violation of `x` beyond `tol`.
pub fn check_feasibility(model: &MilpModel, x: &[f64], tol: f64) -> Vec<FeasibilityViolation> {
    let pr = &model.problem;
    let mut out = Vec::new();
    for (c, key) in model.var_map.keys.iter().enumerate() {
        let v = x[c];
        let over = (pr.col_lower[c] - v).max(v - pr.col_upper[c]);
        if over > tol || v.is_nan() {
            out.push(FeasibilityViolation {
                kind: ViolationKind::Bound(*key),
                amount: over,
            });
        }
        if pr.integer[c] {
            let frac = (v - v.round()).abs();
            if frac > tol {
                out.push(FeasibilityViolation {
                    kind: ViolationKind::Integrality(*key),
                    amount: frac,
                });
            }
        }
    }
    for (row, t) in pr.rows.iter().zip(&model.row_tags) {
        let amount = row.violation(row.activity(x));
        if amount > tol {
            out.push(FeasibilityViolation {
                kind: ViolationKind::Row(t.clone()),
                amount,
            });
        }
    }
    out
}
