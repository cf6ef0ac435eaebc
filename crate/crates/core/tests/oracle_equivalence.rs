use std::collections::BTreeSet;

mod common;

use common::{case, MAX_FLOW};
use gsc_core::model::{check_feasibility, MilpModel, ViolationKind};
use gsc_core::oracle::{check_assignment, enumerate_optimal, objective, Assignment};
use gsc_core::solve::solve_model;
use gsc_lp::{MipStatus, SolverOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn compare(seed: u64, temporary: bool) -> bool {
    let c = case(seed, temporary);
    let oracle = enumerate_optimal(&c.inst, &c.scen, &c.cfg, &c.opts, MAX_FLOW).unwrap();
    let mip = solve_model(&c.model, &SolverOptions::default(), None);
    match oracle {
        None => {
            assert_eq!(mip.status, MipStatus::Infeasible, "seed {seed}");
            false
        }
        Some(o) => {
            assert!(check_assignment(&c.inst, &c.scen, &c.cfg, &c.opts, &o.assignment, 1e-9).is_empty());
            let x = o.assignment.to_model_point(&c.model);
            assert!(check_feasibility(&c.model, &x, 1e-9).is_empty(), "seed {seed}");
            assert_eq!(mip.status, MipStatus::Optimal, "seed {seed}");
            let rel = (mip.objective - o.objective).abs() / o.objective.abs().max(1.0);
            assert!(rel <= 1e-9, "seed {seed}: mip {} oracle {}", mip.objective, o.objective);
            let recomputed = objective(&c.inst, &c.scen, &c.cfg, &c.opts, &o.assignment);
            assert!((recomputed - c.model.objective_value(&x)).abs() <= 1e-9 * recomputed.abs().max(1.0));
            true
        }
    }
}

#[test]
fn branch_and_bound_matches_enumeration_on_small_instances() {
    let feasible = (0..60u64).filter(|&seed| compare(seed, false)).count();
    assert!(feasible >= 30, "only {feasible} feasible cases");
}

#[test]
fn branch_and_bound_matches_enumeration_with_temporary_facilities() {
    let feasible = (100..130u64).filter(|&seed| compare(seed, true)).count();
    assert!(feasible >= 10, "only {feasible} feasible cases");
}

fn row_violations(model: &MilpModel, x: &[f64]) -> BTreeSet<String> {
    check_feasibility(model, x, 1e-9)
        .into_iter()
        .filter_map(|v| match v.kind {
            ViolationKind::Row(tag) => Some(tag.to_string()),
            _ => None,
        })
        .collect()
}

fn random_point(model: &MilpModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
    model
        .var_map
        .keys
        .iter()
        .map(|k| {
            if k.is_first_stage() {
                rng.gen_range(0..=1) as f64
            } else {
                rng.gen_range(0..=MAX_FLOW) as f64
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    // 100 instances x 100 points = 10^4 sampled points.
    #[test]
    fn constraint_checkers_agree(seed in 0u64..1_000_000, temporary in any::<bool>()) {
        let c = case(seed, temporary);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut points: Vec<Vec<f64>> = (0..80).map(|_| random_point(&c.model, &mut rng)).collect();
        // Points near the optimum exercise the feasible side.
        if let Some(o) = enumerate_optimal(&c.inst, &c.scen, &c.cfg, &c.opts, MAX_FLOW).ok().flatten() {
            let x = o.assignment.to_model_point(&c.model);
            points.push(x.clone());
            for _ in 0..19 {
                let mut y = x.clone();
                let j = rng.gen_range(0..y.len());
                y[j] = if c.model.var_map.keys[j].is_first_stage() { 1.0 - y[j] } else { (y[j] + 1.0).min(MAX_FLOW as f64) };
                points.push(y);
            }
        }
        for x in &points {
            let a = Assignment::from_model_point(&c.model, x);
            prop_assert_eq!(a.to_model_point(&c.model), x.clone());
            let ours: BTreeSet<String> = check_assignment(&c.inst, &c.scen, &c.cfg, &c.opts, &a, 1e-9)
                .iter()
                .map(|v| v.to_string())
                .collect();
            prop_assert_eq!(ours, row_violations(&c.model, x));
            let direct = objective(&c.inst, &c.scen, &c.cfg, &c.opts, &a);
            prop_assert!((direct - c.model.objective_value(x)).abs() <= 1e-9 * direct.abs().max(1.0));
        }
    }
}
