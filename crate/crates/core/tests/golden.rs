//! Frozen output formats. Set `GSC_BLESS=1` to rewrite the files after an
//! intentional format change.

mod common;

use common::{golden, rich_fixture, tiny_fixture};
use gsc_core::model::MilpModel;
use gsc_core::solve::{export_mps, import_mps, provenance, solve_model, solve_relaxation, SolutionReport};
use gsc_lp::{solve_lp, LpStatus, SolverOptions};

fn check(name: &str, actual: &str) {
    let path = golden(name);
    if std::env::var_os("GSC_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == actual, "{name} differs from the committed golden file");
}

fn exported(model: &MilpModel) -> String {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mps");
    export_mps(model, &path).unwrap();
    std::fs::read_to_string(&path).unwrap()
}

#[test]
fn mps_export_matches_golden_files() {
    check("tiny.mps", &exported(&tiny_fixture()));
    check("rich.mps", &exported(&rich_fixture()));
}

#[test]
fn mps_export_is_stable_across_runs() {
    assert_eq!(exported(&rich_fixture()), exported(&rich_fixture()));
}

#[test]
fn mps_round_trip_preserves_the_lp_optimum() {
    let opts = SolverOptions::default();
    for name in ["tiny.mps", "rich.mps"] {
        let model = if name == "tiny.mps" { tiny_fixture() } else { rich_fixture() };
        let original = solve_relaxation(&model, &opts);
        let imported = import_mps(golden(name)).unwrap();
        assert_eq!(imported.n_cols(), model.n_cols());
        assert_eq!(imported.rows.len(), model.n_rows());
        let again = solve_lp(&imported, &opts);
        assert_eq!((original.status, again.status), (LpStatus::Optimal, LpStatus::Optimal));
        let scale = original.objective.abs().max(1.0);
        assert!(
            (original.objective - again.objective).abs() <= 1e-9 * scale,
            "{name}: {} vs {}",
            original.objective,
            again.objective
        );
    }
}

#[test]
fn continuous_model_has_no_integer_markers() {
    let mut model = tiny_fixture();
    model.problem.integer.iter_mut().for_each(|b| *b = false);
    let text = exported(&model);
    assert!(!text.contains("INTORG"));
    assert!(exported(&tiny_fixture()).contains("INTORG"));
}

#[test]
fn solution_report_matches_golden_file() {
    let model = rich_fixture();
    let opts = SolverOptions {
        seed: 7,
        ..SolverOptions::default()
    };
    let r = solve_model(&model, &opts, None);
    let prov = provenance(&model.instance, &model.scenarios, &model.strategies, &model.options, &opts);
    let report = SolutionReport::new(&model, &r, prov);
    let json = report.to_json();
    check("rich_solution.json", &json);
    let back: SolutionReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
}
