use gsc_core::generate::{generate_instance, generate_small};
use gsc_core::instance::{
    instance_hash, read_instance, validate_config, validate_instance, write_instance, InstanceFile, NetworkSets,
    StrategyConfig,
};
use gsc_core::CoreError;
use proptest::prelude::*;

fn paper_like() -> (gsc_core::instance::Instance, gsc_core::instance::ScenarioSet) {
    generate_instance(1, &NetworkSets::paper_like(), "paper-like").unwrap()
}

#[test]
fn generated_instance_is_valid() {
    let (inst, scen) = paper_like();
    assert!(validate_instance(&inst, &scen).is_valid());
    for profile in ["mild", "none"] {
        let (inst, scen) = generate_instance(5, &NetworkSets::paper_like(), profile).unwrap();
        assert!(validate_instance(&inst, &scen).is_valid(), "{profile}");
    }
}

#[test]
fn probability_mass_must_sum_to_one() {
    let (inst, mut scen) = paper_like();
    let total: f64 = scen.probability.iter().sum();
    scen.probability.iter_mut().for_each(|p| *p *= 0.9 / total);
    assert!(validate_instance(&inst, &scen).has("probability-sum"));
}

#[test]
fn capacity_loss_must_be_a_fraction() {
    let (inst, mut scen) = paper_like();
    scen.mfg_capacity_loss[0][1] = 1.2;
    let r = validate_instance(&inst, &scen);
    assert!(r.has("capacity-loss-range"));
    assert!(!r.has("probability-sum"));
}

#[test]
fn baseline_scenario_has_no_capacity_loss() {
    let (_, scen) = paper_like();
    assert!(scen.mfg_capacity_loss.iter().all(|r| r[0] == 0.0));
    assert!(scen.wh_capacity_loss.iter().all(|r| r[0] == 0.0));
}

#[test]
fn disruption_severity_grows_with_the_scenario_index() {
    let (_, scen) = paper_like();
    for r in scen.mfg_capacity_loss.iter().chain(&scen.wh_capacity_loss) {
        assert!(r[1] <= r[2] && r[2] <= r[3], "{r:?}");
    }
}

#[test]
fn generation_is_deterministic() {
    let a = paper_like();
    let b = paper_like();
    assert_eq!(a, b);
    let cfg = StrategyConfig::default();
    assert_eq!(instance_hash(&a.0, &a.1, &cfg), instance_hash(&b.0, &b.1, &cfg));
    let c = generate_instance(2, &NetworkSets::paper_like(), "paper-like").unwrap();
    assert_ne!(instance_hash(&a.0, &a.1, &cfg), instance_hash(&c.0, &c.1, &cfg));
}

#[test]
fn unknown_profile_is_rejected() {
    let err = generate_instance(1, &NetworkSets::paper_like(), "apocalyptic").unwrap_err();
    assert!(matches!(err, CoreError::Profile(_)));
}

#[test]
fn file_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    let (inst, scen) = paper_like();
    let cfg = StrategyConfig::only(&["stockpiling", "info_sharing"]).unwrap();
    write_instance(&path, &inst, &scen, &cfg).unwrap();
    let (i2, s2, c2) = read_instance(&path).unwrap();
    assert_eq!((i2, s2, c2), (inst, scen, cfg));
}

#[test]
fn missing_field_is_named() {
    let (inst, scen) = paper_like();
    let mut v: serde_json::Value =
        serde_json::from_str(&InstanceFile::new(inst, scen, StrategyConfig::default()).to_json()).unwrap();
    v["scenarios"].as_object_mut().unwrap().remove("probability");
    let err = InstanceFile::from_json(&v.to_string()).unwrap_err();
    assert!(matches!(err, CoreError::Schema { .. }));
    assert!(err.to_string().contains("probability"), "{err}");
}

#[test]
fn unknown_key_is_named() {
    let (inst, scen) = paper_like();
    let mut v: serde_json::Value =
        serde_json::from_str(&InstanceFile::new(inst, scen, StrategyConfig::default()).to_json()).unwrap();
    v["parameters"]["discount_rate"] = serde_json::json!(0.05);
    let err = InstanceFile::from_json(&v.to_string()).unwrap_err();
    assert!(err.to_string().contains("discount_rate"), "{err}");
}

#[test]
fn multiple_sourcing_needs_enough_suppliers() {
    let sets = NetworkSets {
        n_suppliers_main: 1,
        n_suppliers_backup: 0,
        n_manufacturers_main: 1,
        n_manufacturers_temp: 0,
        n_warehouses_main: 1,
        n_warehouses_temp: 0,
        n_retailers: 1,
        n_periods: 1,
        n_modes: 1,
        n_scenarios: 1,
    };
    let (inst, _) = generate_small(1, &sets, 2);
    let cfg = StrategyConfig::only(&["multiple_sourcing"]).unwrap();
    assert!(validate_config(&inst, &cfg).has("min-suppliers"));
    assert!(validate_config(&inst, &StrategyConfig::default()).is_valid());
}

#[test]
fn unknown_strategy_name_is_a_config_error() {
    assert!(matches!(StrategyConfig::only(&["teleport"]), Err(CoreError::Config(_))));
}

fn arb_sets() -> impl Strategy<Value = NetworkSets> {
    (1..3usize, 0..2usize, 1..3usize, 0..2usize, 1..3usize, 0..2usize, 1..3usize, 1..4usize, 1..3usize, 1..4usize)
        .prop_map(|(a, b, c, d, e, f, g, h, i, j)| NetworkSets {
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialization_round_trips(seed in any::<u64>(), sets in arb_sets(), flags in any::<[bool; 6]>(), small in any::<bool>()) {
        let (inst, scen) = if small {
            generate_small(seed, &sets, 4)
        } else {
            generate_instance(seed, &sets, "paper-like").unwrap()
        };
        prop_assert!(validate_instance(&inst, &scen).is_valid());
        let mut cfg = StrategyConfig::default();
        for ((name, _), on) in StrategyConfig::default().flags().into_iter().zip(flags) {
            *cfg.flag_mut(name).unwrap() = on;
        }
        let text = InstanceFile::new(inst.clone(), scen.clone(), cfg).to_json();
        let back = InstanceFile::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        prop_assert_eq!(back.into_parts(), (inst, scen, cfg));
    }
}
