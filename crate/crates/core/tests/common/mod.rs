#![allow(dead_code)]

use std::path::PathBuf;

use gsc_core::generate::{generate_instance, generate_small};
use gsc_core::instance::{Instance, NetworkSets, ScenarioSet, StrategyConfig};
use gsc_core::model::{build_model, CapMode, DelayMode, Integrality, MilpModel, ModelOptions, Weights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_FLOW: u32 = 5;

pub fn random_case(seed: u64, temporary: bool) -> (NetworkSets, StrategyConfig, ModelOptions) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let backup = rng.gen_bool(0.5);
    let mut sets = NetworkSets {
        n_suppliers_main: if backup { 1 } else { rng.gen_range(1..=2) },
        n_suppliers_backup: if backup { 1 } else { 0 },
        n_manufacturers_main: 1,
        n_manufacturers_temp: 0,
        n_warehouses_main: 1,
        n_warehouses_temp: 0,
        n_retailers: rng.gen_range(1..=2),
        n_periods: rng.gen_range(1..=2),
        n_modes: rng.gen_range(1..=2),
        n_scenarios: rng.gen_range(1..=2),
    };
    if temporary {
        // Keep the enumeration small: one extra facility, one retailer,
        // one mode.
        sets.n_retailers = 1;
        sets.n_modes = 1;
        if rng.gen_bool(0.5) {
            sets.n_manufacturers_temp = 1;
            sets.n_periods = 1;
            sets.n_scenarios = 1;
        } else {
            sets.n_warehouses_temp = 1;
        }
    }
    let backup = backup && !temporary;
    if temporary {
        sets.n_suppliers_main = 1;
        sets.n_suppliers_backup = 0;
    }
    let mut cfg = StrategyConfig {
        backup_suppliers: backup,
        multiple_sourcing: false,
        safety_stock: !temporary && rng.gen_bool(0.5),
        stockpiling: !temporary && rng.gen_bool(0.5),
        temporary_facilities: temporary,
        info_sharing: rng.gen_bool(0.5),
    };
    if sets.suppliers() >= 2 {
        cfg.multiple_sourcing = rng.gen_bool(0.4);
    }
    let opts = ModelOptions {
        weights: Weights {
            cost: rng.gen_range(0.0..2.0),
            emission: rng.gen_range(0.1..2.0),
        },
        cap_mode: if sets.n_scenarios == 1 && rng.gen_bool(0.5) {
            CapMode::Literal
        } else {
            CapMode::PerScenario
        },
        delay_mode: if rng.gen_bool(0.5) { DelayMode::Expected } else { DelayMode::Literal },
        integrality: Integrality::Full,
    };
    (sets, cfg, opts)
}

pub struct Case {
    pub inst: Instance,
    pub scen: ScenarioSet,
    pub cfg: StrategyConfig,
    pub opts: ModelOptions,
    pub model: MilpModel,
}

pub fn case(seed: u64, temporary: bool) -> Case {
    let (sets, cfg, opts) = random_case(seed, temporary);
    let (inst, scen) = generate_small(seed, &sets, MAX_FLOW / sets.n_retailers as u32);
    let model = build_model(&inst, &scen, &cfg, &opts)
        .unwrap()
        .with_second_stage_bound(MAX_FLOW as f64);
    Case { inst, scen, cfg, opts, model }
}

pub fn all_strategies() -> StrategyConfig {
    let mut cfg = StrategyConfig::default();
    for (name, _) in StrategyConfig::default().flags() {
        *cfg.flag_mut(name).unwrap() = true;
    }
    cfg
}

pub fn paper_like() -> (Instance, ScenarioSet) {
    generate_instance(1, &NetworkSets::paper_like(), "paper-like").unwrap()
}

pub fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn golden_sets(suppliers_backup: usize, temp: usize, periods: usize, scenarios: usize) -> NetworkSets {
    NetworkSets {
        n_suppliers_main: 2,
        n_suppliers_backup: suppliers_backup,
        n_manufacturers_main: 1,
        n_manufacturers_temp: temp,
        n_warehouses_main: 1,
        n_warehouses_temp: temp,
        n_retailers: 1,
        n_periods: periods,
        n_modes: 1,
        n_scenarios: scenarios,
    }
}

/// Two suppliers, one manufacturer, warehouse and retailer, one period.
pub fn tiny_fixture() -> MilpModel {
    let (inst, scen) = generate_small(21, &golden_sets(0, 0, 1, 1), 3);
    let opts = ModelOptions {
        integrality: Integrality::Full,
        ..ModelOptions::default()
    };
    build_model(&inst, &scen, &StrategyConfig::default(), &opts).unwrap()
}

/// Every strategy on, two periods and two scenarios.
pub fn rich_fixture() -> MilpModel {
    let (inst, scen) = generate_small(22, &golden_sets(1, 1, 2, 2), 3);
    build_model(&inst, &scen, &all_strategies(), &ModelOptions::default()).unwrap()
}
