//! Problem instances: network sets, deterministic parameters, scenario data
//! and strategy toggles, with validation and JSON (de)serialization.
//!
//! Entity indices are 0-based and contiguous: main entities first, then
//! backup suppliers or temporary facilities.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

pub type Vec2 = Vec<Vec<f64>>;
pub type Vec3 = Vec<Vec<Vec<f64>>>;
pub type Vec4 = Vec<Vec<Vec<Vec<f64>>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSets {
    pub n_suppliers_main: usize,
    pub n_suppliers_backup: usize,
    pub n_manufacturers_main: usize,
    pub n_manufacturers_temp: usize,
    pub n_warehouses_main: usize,
    pub n_warehouses_temp: usize,
    pub n_retailers: usize,
    pub n_periods: usize,
    pub n_modes: usize,
    pub n_scenarios: usize,
}

impl NetworkSets {
    pub fn suppliers(&self) -> usize {
        self.n_suppliers_main + self.n_suppliers_backup
    }

    pub fn manufacturers(&self) -> usize {
        self.n_manufacturers_main + self.n_manufacturers_temp
    }

    pub fn warehouses(&self) -> usize {
        self.n_warehouses_main + self.n_warehouses_temp
    }

    /// The set sizes used by the paper's test problem.
    pub fn paper_like() -> Self {
        NetworkSets {
            n_suppliers_main: 5,
            n_suppliers_backup: 3,
            n_manufacturers_main: 3,
            n_manufacturers_temp: 3,
            n_warehouses_main: 5,
            n_warehouses_temp: 3,
            n_retailers: 7,
            n_periods: 6,
            n_modes: 2,
            n_scenarios: 4,
        }
    }
}

/// One array per echelon link: supplier to manufacturer, manufacturer to
/// warehouse, warehouse to retailer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkData<T> {
    pub supplier_manufacturer: T,
    pub manufacturer_warehouse: T,
    pub warehouse_retailer: T,
}

impl<T> LinkData<T> {
    pub fn get(&self, link: Link) -> &T {
        match link {
            Link::SupplierManufacturer => &self.supplier_manufacturer,
            Link::ManufacturerWarehouse => &self.manufacturer_warehouse,
            Link::WarehouseRetailer => &self.warehouse_retailer,
        }
    }

    pub fn get_mut(&mut self, link: Link) -> &mut T {
        match link {
            Link::SupplierManufacturer => &mut self.supplier_manufacturer,
            Link::ManufacturerWarehouse => &mut self.manufacturer_warehouse,
            Link::WarehouseRetailer => &mut self.warehouse_retailer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    SupplierManufacturer,
    ManufacturerWarehouse,
    WarehouseRetailer,
}

impl Link {
    pub const ALL: [Link; 3] = [
        Link::SupplierManufacturer,
        Link::ManufacturerWarehouse,
        Link::WarehouseRetailer,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Link::SupplierManufacturer => "supplier_manufacturer",
            Link::ManufacturerWarehouse => "manufacturer_warehouse",
            Link::WarehouseRetailer => "warehouse_retailer",
        }
    }

    /// Total origin and destination counts of the link.
    pub fn extent(self, sets: &NetworkSets) -> (usize, usize) {
        match self {
            Link::SupplierManufacturer => (sets.suppliers(), sets.manufacturers()),
            Link::ManufacturerWarehouse => (sets.manufacturers(), sets.warehouses()),
            Link::WarehouseRetailer => (sets.warehouses(), sets.n_retailers),
        }
    }
}

/// Deterministic parameters. Link arrays are indexed `[origin][destination]
/// [mode]` with a trailing `[scenario]` where the data is stochastic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    pub transport_cost: LinkData<Vec4>,
    pub transport_delay: LinkData<Vec4>,
    pub delay_cost: f64,
    pub saved_time: LinkData<Vec3>,
    /// One entry per temporary manufacturer.
    pub setup_temp_mfg: Vec<f64>,
    /// One entry per temporary warehouse.
    pub setup_temp_wh: Vec<f64>,
    pub info_setup: f64,
    pub info_training: f64,
    /// `[manufacturer][scenario]`.
    pub inv_cost: Vec2,
    /// `[manufacturer][scenario]`.
    pub short_cost: Vec2,
    pub mfg_capacity: Vec<f64>,
    pub wh_capacity: Vec<f64>,
    pub stockpile_premium: f64,
    pub min_suppliers: u32,
    pub emission_prod: Vec<f64>,
    pub emission_transport: LinkData<Vec3>,
    pub emission_saving: f64,
    /// One entry per period.
    pub cap: Vec<f64>,
    pub big_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub sets: NetworkSets,
    pub params: Parameters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSet {
    pub probability: Vec<f64>,
    /// `[retailer][period][scenario]`.
    pub demand: Vec3,
    /// `[manufacturer][scenario]`.
    pub mfg_capacity_loss: Vec2,
    /// `[warehouse][scenario]`.
    pub wh_capacity_loss: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub backup_suppliers: bool,
    pub multiple_sourcing: bool,
    pub safety_stock: bool,
    pub stockpiling: bool,
    pub temporary_facilities: bool,
    pub info_sharing: bool,
}

impl StrategyConfig {
    pub const NAMES: [&'static str; 6] = [
        "backup_suppliers",
        "multiple_sourcing",
        "safety_stock",
        "stockpiling",
        "temporary_facilities",
        "info_sharing",
    ];

    pub fn flag_mut(&mut self, name: &str) -> Option<&mut bool> {
        Some(match name {
            "backup_suppliers" => &mut self.backup_suppliers,
            "multiple_sourcing" => &mut self.multiple_sourcing,
            "safety_stock" => &mut self.safety_stock,
            "stockpiling" => &mut self.stockpiling,
            "temporary_facilities" => &mut self.temporary_facilities,
            "info_sharing" => &mut self.info_sharing,
            _ => return None,
        })
    }

    pub fn flags(&self) -> [(&'static str, bool); 6] {
        [
            ("backup_suppliers", self.backup_suppliers),
            ("multiple_sourcing", self.multiple_sourcing),
            ("safety_stock", self.safety_stock),
            ("stockpiling", self.stockpiling),
            ("temporary_facilities", self.temporary_facilities),
            ("info_sharing", self.info_sharing),
        ]
    }

    /// A config with exactly the named flags on.
    pub fn only(names: &[&str]) -> Result<Self, CoreError> {
        let mut cfg = StrategyConfig::default();
        for name in names {
            *cfg
                .flag_mut(name)
                .ok_or_else(|| CoreError::Config(format!("unknown strategy `{name}`")))? = true;
        }
        Ok(cfg)
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let on: Vec<&str> = self.flags().iter().filter(|p| p.1).map(|p| p.0).collect();
        if on.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&on.join(","))
        }
    }
}

/// One broken invariant, identified by a stable code and the offending path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: &str, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            code: code.to_string(),
            path: path.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{} at {}: {}", v.code, v.path, v.message)?;
        }
        Ok(())
    }
}

/// Nested `Vec<f64>` arrays with a checkable shape.
trait Shaped {
    fn check_shape(&self, dims: &[usize], path: &str, report: &mut ValidationReport) -> bool;
    fn visit(&self, path: &str, f: &mut dyn FnMut(&str, f64));
}

impl Shaped for f64 {
    fn check_shape(&self, _: &[usize], _: &str, _: &mut ValidationReport) -> bool {
        true
    }
    fn visit(&self, path: &str, f: &mut dyn FnMut(&str, f64)) {
        f(path, *self)
    }
}

impl<T: Shaped> Shaped for Vec<T> {
    fn check_shape(&self, dims: &[usize], path: &str, report: &mut ValidationReport) -> bool {
        if self.len() != dims[0] {
            report.push(
                "dimension",
                path,
                format!("expected {} entries, found {}", dims[0], self.len()),
            );
            return false;
        }
        let mut ok = true;
        for (i, item) in self.iter().enumerate() {
            ok &= item.check_shape(&dims[1..], &format!("{path}[{i}]"), report);
        }
        ok
    }
    fn visit(&self, path: &str, f: &mut dyn FnMut(&str, f64)) {
        for (i, item) in self.iter().enumerate() {
            item.visit(&format!("{path}[{i}]"), f);
        }
    }
}

fn check_values<T: Shaped>(
    value: &T,
    dims: &[usize],
    path: &str,
    report: &mut ValidationReport,
    code: &str,
    ok: impl Fn(f64) -> bool,
    what: &str,
) {
    if !value.check_shape(dims, path, report) {
        return;
    }
    value.visit(path, &mut |p, v| {
        if !v.is_finite() {
            report.push("non-finite", p, format!("value {v} is not finite"));
        } else if !ok(v) {
            report.push(code, p, format!("value {v} {what}"));
        }
    });
}

fn nonneg(v: f64) -> bool {
    v >= 0.0
}

/// Checks every invariant of the instance and scenario data, including array
/// shapes against the network sets.
pub fn validate_instance(inst: &Instance, scen: &ScenarioSet) -> ValidationReport {
    let mut r = ValidationReport::default();
    let s = &inst.sets;
    for (name, v) in [
        ("n_suppliers_main", s.n_suppliers_main),
        ("n_manufacturers_main", s.n_manufacturers_main),
        ("n_warehouses_main", s.n_warehouses_main),
        ("n_retailers", s.n_retailers),
        ("n_periods", s.n_periods),
        ("n_modes", s.n_modes),
        ("n_scenarios", s.n_scenarios),
    ] {
        if v == 0 {
            r.push("set-size", format!("sets.{name}"), "must be at least 1");
        }
    }
    if !r.is_valid() {
        return r;
    }
    let p = &inst.params;
    let (ns, nl, nt) = (s.n_scenarios, s.n_modes, s.n_periods);
    let neg = "is negative";
    for link in Link::ALL {
        let (o, d) = link.extent(s);
        let key = link.key();
        check_values(
            p.transport_cost.get(link),
            &[o, d, nl, ns],
            &format!("parameters.transport_cost.{key}"),
            &mut r,
            "negative",
            nonneg,
            neg,
        );
        check_values(
            p.transport_delay.get(link),
            &[o, d, nl, ns],
            &format!("parameters.transport_delay.{key}"),
            &mut r,
            "negative",
            nonneg,
            neg,
        );
        check_values(
            p.saved_time.get(link),
            &[o, d, nl],
            &format!("parameters.saved_time.{key}"),
            &mut r,
            "negative",
            nonneg,
            neg,
        );
        check_values(
            p.emission_transport.get(link),
            &[o, d, nl],
            &format!("parameters.emission_transport.{key}"),
            &mut r,
            "negative",
            nonneg,
            neg,
        );
    }
    let scalars = [
        ("delay_cost", p.delay_cost),
        ("info_setup", p.info_setup),
        ("info_training", p.info_training),
        ("stockpile_premium", p.stockpile_premium),
        ("emission_saving", p.emission_saving),
    ];
    for (name, v) in scalars {
        check_values(&v, &[], &format!("parameters.{name}"), &mut r, "negative", nonneg, neg);
    }
    let (nj, nk) = (s.manufacturers(), s.warehouses());
    let arrays1: [(&str, &Vec<f64>, usize); 6] = [
        ("setup_temp_mfg", &p.setup_temp_mfg, s.n_manufacturers_temp),
        ("setup_temp_wh", &p.setup_temp_wh, s.n_warehouses_temp),
        ("mfg_capacity", &p.mfg_capacity, nj),
        ("wh_capacity", &p.wh_capacity, nk),
        ("emission_prod", &p.emission_prod, nj),
        ("cap", &p.cap, nt),
    ];
    for (name, v, n) in arrays1 {
        check_values(v, &[n], &format!("parameters.{name}"), &mut r, "negative", nonneg, neg);
    }
    for (name, v) in [("inv_cost", &p.inv_cost), ("short_cost", &p.short_cost)] {
        check_values(v, &[nj, ns], &format!("parameters.{name}"), &mut r, "negative", nonneg, neg);
    }
    check_values(
        &p.big_m,
        &[],
        "parameters.big_m",
        &mut r,
        "big-m",
        |v| v > 0.0,
        "must be positive",
    );

    check_values(
        &scen.probability,
        &[ns],
        "scenarios.probability",
        &mut r,
        "probability-negative",
        nonneg,
        neg,
    );
    if scen.probability.len() == ns && scen.probability.iter().all(|v| v.is_finite()) {
        let total: f64 = scen.probability.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            r.push(
                "probability-sum",
                "scenarios.probability",
                format!("probabilities sum to {total}, expected 1"),
            );
        }
    }
    let demand_ok = scen.demand.check_shape(&[s.n_retailers, nt, ns], "scenarios.demand", &mut r);
    if demand_ok {
        scen.demand.visit("scenarios.demand", &mut |path, v| {
            if !v.is_finite() {
                r.push("non-finite", path, format!("value {v} is not finite"));
            } else if v < 0.0 {
                r.push("demand-negative", path, format!("demand {v} is negative"));
            }
        });
    }
    let in_unit = |v: f64| (0.0..=1.0).contains(&v);
    let range = "lies outside [0, 1]";
    check_values(
        &scen.mfg_capacity_loss,
        &[nj, ns],
        "scenarios.mfg_capacity_loss",
        &mut r,
        "capacity-loss-range",
        in_unit,
        range,
    );
    check_values(
        &scen.wh_capacity_loss,
        &[nk, ns],
        "scenarios.wh_capacity_loss",
        &mut r,
        "capacity-loss-range",
        in_unit,
        range,
    );

    if demand_ok && p.big_m.is_finite() {
        let needed = max_cumulative_demand(scen, s);
        if needed.is_finite() && p.big_m < needed {
            r.push(
                "big-m",
                "parameters.big_m",
                format!("big_m {} is below the largest cumulative demand {needed}", p.big_m),
            );
        }
    }
    r
}

/// Largest cumulative demand of one retailer through any period under any
/// scenario.
pub fn max_cumulative_demand(scen: &ScenarioSet, sets: &NetworkSets) -> f64 {
    let mut best = 0.0f64;
    for per_retailer in &scen.demand {
        for s in 0..sets.n_scenarios {
            let mut acc = 0.0;
            for per_period in per_retailer {
                acc += per_period[s];
                best = best.max(acc);
            }
        }
    }
    best
}

/// Checks the strategy toggles against the instance.
pub fn validate_config(inst: &Instance, cfg: &StrategyConfig) -> ValidationReport {
    let mut r = ValidationReport::default();
    if cfg.multiple_sourcing {
        let sm = inst.params.min_suppliers as usize;
        let available = inst.sets.n_suppliers_main
            + if cfg.backup_suppliers {
                inst.sets.n_suppliers_backup
            } else {
                0
            };
        if sm < 2 {
            r.push(
                "min-suppliers",
                "parameters.min_suppliers",
                format!("multiple sourcing needs at least 2 suppliers, got {sm}"),
            );
        } else if sm > available {
            r.push(
                "min-suppliers",
                "parameters.min_suppliers",
                format!("{sm} suppliers required but only {available} are available"),
            );
        }
    }
    r
}

/// On-disk layout of an instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub sets: NetworkSets,
    pub parameters: Parameters,
    pub scenarios: ScenarioSet,
    pub strategies: StrategyConfig,
}

impl InstanceFile {
    pub fn new(inst: Instance, scen: ScenarioSet, cfg: StrategyConfig) -> Self {
        InstanceFile {
            sets: inst.sets,
            parameters: inst.params,
            scenarios: scen,
            strategies: cfg,
        }
    }

    pub fn into_parts(self) -> (Instance, ScenarioSet, StrategyConfig) {
        (
            Instance {
                sets: self.sets,
                params: self.parameters,
            },
            self.scenarios,
            self.strategies,
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance data is serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CoreError> {
        serde_json::from_str(text).map_err(|e| CoreError::Schema {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

pub fn read_instance(
    path: impl AsRef<Path>,
) -> Result<(Instance, ScenarioSet, StrategyConfig), CoreError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    Ok(InstanceFile::from_json(&text)?.into_parts())
}

pub fn write_instance(
    path: impl AsRef<Path>,
    inst: &Instance,
    scen: &ScenarioSet,
    cfg: &StrategyConfig,
) -> Result<(), CoreError> {
    let path = path.as_ref();
    let file = InstanceFile::new(inst.clone(), scen.clone(), *cfg);
    std::fs::write(path, file.to_json()).map_err(|e| CoreError::io(path, e))
}

/// Hex SHA-256 of the canonical JSON encoding.
pub fn instance_hash(inst: &Instance, scen: &ScenarioSet, cfg: &StrategyConfig) -> String {
    use sha2::{Digest, Sha256};
    let text = InstanceFile::new(inst.clone(), scen.clone(), *cfg).to_json();
    hex::encode(Sha256::digest(text.as_bytes()))
}
