use gsc_core::generate::{generate_instance, generate_small};
use gsc_core::instance::{Instance, Link, NetworkSets, ScenarioSet, StrategyConfig};
use gsc_core::model::{
    build_model, check_feasibility, evaluate_solution, Integrality, ModelOptions, RowFamily, VarKey, ViolationKind,
};
use gsc_core::oracle::enumerate_optimal;
use gsc_core::solve::{solve_model, solve_relaxation, verify_incumbent};
use gsc_lp::{LpStatus, MipStatus, SolverOptions};

fn sets(suppliers: usize, periods: usize, modes: usize, scenarios: usize) -> NetworkSets {
    NetworkSets {
        n_suppliers_main: suppliers,
        n_suppliers_backup: 0,
        n_manufacturers_main: 1,
        n_manufacturers_temp: 0,
        n_warehouses_main: 1,
        n_warehouses_temp: 0,
        n_retailers: 1,
        n_periods: periods,
        n_modes: modes,
        n_scenarios: scenarios,
    }
}

/// Small instance with every demand set to `demand`, no capacity loss and
/// ample capacity.
fn fixture(sets: &NetworkSets, demand: f64) -> (Instance, ScenarioSet) {
    let (mut inst, mut scen) = generate_small(11, sets, 3);
    for row in scen.demand.iter_mut().flatten() {
        row.iter_mut().for_each(|d| *d = demand);
    }
    scen.mfg_capacity_loss.iter_mut().flatten().for_each(|r| *r = 0.0);
    scen.wh_capacity_loss.iter_mut().flatten().for_each(|r| *r = 0.0);
    let total = demand * sets.n_periods as f64;
    inst.params.mfg_capacity.iter_mut().for_each(|c| *c = c.max(2.0 * demand));
    inst.params.wh_capacity.iter_mut().for_each(|c| *c = c.max(2.0 * demand));
    inst.params.big_m = total.max(1.0);
    inst.params.cap.iter_mut().for_each(|c| *c = 1e6);
    inst.params.short_cost.iter_mut().flatten().for_each(|c| *c = 1e4);
    (inst, scen)
}

fn full() -> ModelOptions {
    ModelOptions {
        integrality: Integrality::Full,
        ..ModelOptions::default()
    }
}

fn count(model: &gsc_core::model::MilpModel, family: &str) -> usize {
    model.var_map.keys.iter().filter(|k| k.family() == family).count()
}

#[test]
fn column_count_of_the_smallest_network() {
    let (inst, scen) = fixture(&sets(2, 1, 1, 1), 1.0);
    let model = build_model(&inst, &scen, &StrategyConfig::default(), &ModelOptions::default()).unwrap();
    assert_eq!(model.n_cols(), 10);
    for (family, n) in [("XX", 2), ("YY", 1), ("ZZ", 1), ("X", 2), ("Y", 1), ("Z", 1), ("MI", 1), ("MS", 1)] {
        assert_eq!(count(&model, family), n, "{family}");
    }
}

#[test]
fn safety_stock_adds_one_column_and_enters_the_balance_row() {
    let (inst, scen) = fixture(&sets(2, 1, 1, 1), 1.0);
    let off = build_model(&inst, &scen, &StrategyConfig::default(), &ModelOptions::default()).unwrap();
    let cfg = StrategyConfig::only(&["safety_stock"]).unwrap();
    let on = build_model(&inst, &scen, &cfg, &ModelOptions::default()).unwrap();
    assert_eq!(on.n_cols(), 11);
    assert_eq!(on.n_rows(), off.n_rows());
    let mss = on.var_map.get(&VarKey::MSS { j: 0, t: 0, s: 0 }).expect("MSS column");
    let balance: Vec<usize> = (0..on.n_rows()).filter(|&r| on.row_tags[r].family == RowFamily::Balance).collect();
    assert_eq!(balance.len(), 1);
    let row = &on.problem.rows[balance[0]];
    assert!(row.coefs.iter().any(|&(c, a)| c == mss && a != 0.0));
}

#[test]
fn paper_like_cardinalities() {
    let (inst, scen) = generate_instance(1, &NetworkSets::paper_like(), "paper-like").unwrap();
    let opts = ModelOptions::default();
    let off = build_model(&inst, &scen, &StrategyConfig::default(), &opts).unwrap();
    assert_eq!((off.n_cols(), off.n_rows(), off.problem.nnz()), (4044, 4086, 18324));
    let mut all = StrategyConfig::default();
    for (name, _) in StrategyConfig::default().flags() {
        *all.flag_mut(name).unwrap() = true;
    }
    let on = build_model(&inst, &scen, &all, &opts).unwrap();
    assert_eq!((on.n_cols(), on.n_rows(), on.problem.nnz()), (9702, 9864, 44034));
}

#[test]
fn zero_point_on_a_zero_setup_model_costs_nothing() {
    let (inst, scen) = fixture(&sets(2, 2, 2, 2), 0.0);
    let model = build_model(&inst, &scen, &StrategyConfig::default(), &ModelOptions::default()).unwrap();
    let b = evaluate_solution(&model, &vec![0.0; model.n_cols()]).unwrap();
    assert_eq!((b.c1, b.setup_cost, b.z1, b.z2, b.z_total), (0.0, 0.0, 0.0, 0.0, 0.0));
    assert!(b.c2.iter().chain(&b.c3).chain(&b.c4).chain(&b.emission).all(|&v| v == 0.0));
}

#[test]
fn unmet_demand_is_tagged_with_its_indices() {
    let (inst, scen) = fixture(&sets(1, 1, 1, 1), 2.0);
    let model = build_model(&inst, &scen, &StrategyConfig::default(), &ModelOptions::default()).unwrap();
    let v = check_feasibility(&model, &vec![0.0; model.n_cols()], 1e-6);
    let tags: Vec<String> = v
        .iter()
        .filter_map(|v| match &v.kind {
            ViolationKind::Row(t) => Some(t.to_string()),
            _ => None,
        })
        .collect();
    assert!(tags.contains(&"demand(m=1,t=1,s=1)".to_string()), "{tags:?}");
}

#[test]
fn fractional_binary_is_an_integrality_violation() {
    let (inst, scen) = fixture(&sets(1, 1, 1, 1), 0.0);
    let model = build_model(&inst, &scen, &StrategyConfig::default(), &full()).unwrap();
    let key = VarKey::XX { i: 0, j: 0, t: 0, l: 0 };
    let mut x = vec![0.0; model.n_cols()];
    x[model.var_map.get(&key).unwrap()] = 0.5;
    let v = check_feasibility(&model, &x, 1e-6);
    assert!(v.iter().any(|v| v.kind == ViolationKind::Integrality(key)), "{v:?}");
}

#[test]
fn zero_demand_solves_to_zero() {
    let (inst, scen) = fixture(&sets(2, 2, 2, 2), 0.0);
    let model = build_model(&inst, &scen, &StrategyConfig::default(), &full()).unwrap();
    let lp = solve_relaxation(&model, &SolverOptions::default());
    assert_eq!(lp.status, LpStatus::Optimal);
    assert_eq!(lp.objective, 0.0);
    let r = solve_model(&model, &SolverOptions::default(), None);
    assert_eq!(r.status, MipStatus::Optimal);
    assert_eq!(r.objective, 0.0);
    assert!(r.incumbent.unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn zero_cap_with_positive_demand_is_infeasible() {
    let (mut inst, scen) = fixture(&sets(1, 2, 1, 2), 1.0);
    inst.params.cap.iter_mut().for_each(|c| *c = 0.0);
    let model = build_model(&inst, &scen, &StrategyConfig::default(), &ModelOptions::default()).unwrap();
    assert_eq!(solve_relaxation(&model, &SolverOptions::default()).status, LpStatus::Infeasible);
    assert_eq!(solve_model(&model, &SolverOptions::default(), None).status, MipStatus::Infeasible);
}

#[test]
fn forced_flow_matches_a_hand_sum() {
    let (inst, scen) = fixture(&sets(1, 1, 1, 1), 2.0);
    let model = build_model(&inst, &scen, &StrategyConfig::default(), &full()).unwrap();
    let r = solve_model(&model, &SolverOptions::default(), None);
    assert_eq!(r.status, MipStatus::Optimal);
    let x = r.incumbent.unwrap();
    for key in [
        VarKey::X { i: 0, j: 0, t: 0, l: 0, s: 0 },
        VarKey::Y { j: 0, k: 0, t: 0, l: 0, s: 0 },
        VarKey::Z { k: 0, m: 0, t: 0, l: 0, s: 0 },
    ] {
        assert!((x[model.var_map.get(&key).unwrap()] - 2.0).abs() < 1e-9, "{key}");
    }
    let p = &inst.params;
    let sm = &p.transport_cost.supplier_manufacturer[0][0][0][0];
    let mw = &p.transport_cost.manufacturer_warehouse[0][0][0][0];
    let wr = &p.transport_cost.warehouse_retailer[0][0][0][0];
    let delay = p.transport_delay.supplier_manufacturer[0][0][0][0]
        + p.transport_delay.manufacturer_warehouse[0][0][0][0]
        + p.transport_delay.warehouse_retailer[0][0][0][0];
    let c1 = p.delay_cost * delay;
    let c2 = 2.0 * (sm + mw + wr);
    let e = 2.0
        * (p.emission_prod[0]
            + p.emission_transport.supplier_manufacturer[0][0][0]
            + p.emission_transport.manufacturer_warehouse[0][0][0]
            + p.emission_transport.warehouse_retailer[0][0][0]);
    let hand = c1 + c2 + e;
    assert!((r.objective - hand).abs() <= 1e-9 * hand, "{} vs {hand}", r.objective);
}

#[test]
fn cheaper_supplier_is_selected_alone() {
    let (mut inst, scen) = fixture(&sets(2, 1, 1, 1), 2.0);
    let p = &mut inst.params;
    p.transport_cost.supplier_manufacturer[0][0][0][0] = 50.0;
    p.transport_cost.supplier_manufacturer[1][0][0][0] = 5.0;
    let e = p.emission_transport.supplier_manufacturer[0][0][0].min(p.emission_transport.supplier_manufacturer[1][0][0]);
    p.emission_transport.supplier_manufacturer[0][0][0] = e;
    p.emission_transport.supplier_manufacturer[1][0][0] = e;
    let d = p.transport_delay.supplier_manufacturer[0][0][0][0];
    p.transport_delay.supplier_manufacturer[1][0][0][0] = d;
    let cfg = StrategyConfig::default();
    let model = build_model(&inst, &scen, &cfg, &full()).unwrap();
    let r = solve_model(&model, &SolverOptions::default(), None);
    let x = r.incumbent.unwrap();
    let xx = |i| x[model.var_map.get(&VarKey::XX { i, j: 0, t: 0, l: 0 }).unwrap()];
    assert_eq!((xx(0), xx(1)), (0.0, 1.0));
    let best = enumerate_optimal(&inst, &scen, &cfg, &full(), 5).unwrap().unwrap();
    assert!((best.objective - r.objective).abs() <= 1e-9 * r.objective);
    assert_eq!(best.assignment.bin(Link::SupplierManufacturer, 0, 0, 0, 0), 0.0);
    assert_eq!(best.assignment.bin(Link::SupplierManufacturer, 1, 0, 0, 0), 1.0);
}

#[test]
fn relaxation_bounds_the_enumerated_optimum() {
    let mut checked = 0;
    for seed in 0..10 {
        let s = sets(2, 1, 1, 1);
        let (inst, scen) = generate_small(seed, &s, 3);
        let cfg = StrategyConfig::default();
        let model = build_model(&inst, &scen, &cfg, &full()).unwrap().with_second_stage_bound(5.0);
        let Some(best) = enumerate_optimal(&inst, &scen, &cfg, &full(), 5).unwrap() else { continue };
        let lp = solve_relaxation(&model, &SolverOptions::default());
        assert_eq!(lp.status, LpStatus::Optimal);
        assert!(lp.objective <= best.objective + 1e-9 * best.objective.abs().max(1.0));
        let r = solve_model(&model, &SolverOptions::default(), None);
        verify_incumbent(&model, r.incumbent.as_ref().unwrap(), r.objective, 1e-6, 1e-9).unwrap();
        checked += 1;
    }
    assert!(checked >= 5);
}

#[test]
fn repeated_solves_are_identical() {
    let (inst, scen) = generate_small(3, &sets(2, 2, 2, 2), 3);
    let cfg = StrategyConfig::only(&["safety_stock", "info_sharing"]).unwrap();
    let model = build_model(&inst, &scen, &cfg, &full()).unwrap();
    let opts = SolverOptions {
        seed: 7,
        ..SolverOptions::default()
    };
    let a = solve_model(&model, &opts, None);
    let b = solve_model(&model, &opts, None);
    assert_eq!(a.nodes, b.nodes);
    assert_eq!(a.incumbent, b.incumbent);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
}
