use std::path::Path;
use std::process::{Command, Output};

fn gscd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gscd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_instance(dir: &Path, seed: u64) -> String {
    let path = dir.join(format!("small{seed}.json"));
    let p = path.to_str().unwrap().to_string();
    let seed = seed.to_string();
    let o = gscd(&["generate", "--seed", &seed, "--small", "3", "--sets", "1,0,1,0,1,0,1,2,1,2", "--out", &p]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    p
}

#[test]
fn validate_prints_ok() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_instance(dir.path(), 1);
    let o = gscd(&["validate", "--instance", &p]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().any(|l| l == "OK"));
}

#[test]
fn validate_rejects_a_broken_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_instance(dir.path(), 1);
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    v["scenarios"]["probability"][0] = serde_json::json!(-0.5);
    std::fs::write(&p, v.to_string()).unwrap();
    let o = gscd(&["validate", "--instance", &p]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_cap_solve_reports_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_instance(dir.path(), 1);
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    v["parameters"]["cap"] = serde_json::json!([0.0, 0.0]);
    std::fs::write(&p, v.to_string()).unwrap();
    let out = dir.path().join("sol.json");
    let o = gscd(&["solve", "--instance", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible"));
    let sol: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(sol["status"], "infeasible");
}

#[test]
fn repeated_solves_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_instance(dir.path(), 4);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = gscd(&["solve", "--instance", &p, "--seed", "7", "--integrality", "full", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn solve_and_oracle_agree_on_a_small_instance() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_instance(dir.path(), 5);
    let sol = dir.path().join("sol.json");
    let orc = dir.path().join("orc.json");
    let o = gscd(&["solve", "--instance", &p, "--integrality", "full", "--out", sol.to_str().unwrap()]);
    assert!(o.status.success());
    let o = gscd(&["oracle", "--instance", &p, "--integrality", "full", "--out", orc.to_str().unwrap()]);
    assert!(o.status.success());
    let read = |f: &Path| -> serde_json::Value { serde_json::from_str(&std::fs::read_to_string(f).unwrap()).unwrap() };
    let z_sol = read(&sol)["objective"]["z_total"].as_f64().unwrap();
    let z_orc = read(&orc)["objective"]["z_total"].as_f64().unwrap();
    assert!((z_sol - z_orc).abs() <= 1e-6 * z_orc.abs().max(1.0), "{z_sol} vs {z_orc}");
}

#[test]
fn effective_configuration_is_printed_first() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_instance(dir.path(), 1);
    let o = gscd(&["inspect", "--instance", &p, "--enable", "safety_stock", "--weights", "1,0"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("gscd "));
    assert!(lines.iter().any(|l| l.starts_with("strategies") && l.contains("safety_stock")));
    assert!(lines.iter().any(|l| l.starts_with("weights") && l.ends_with("1,0")));
}

#[test]
fn unknown_flag_and_unknown_strategy_exit_with_two() {
    assert_eq!(gscd(&["solve", "--bogus"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let p = small_instance(dir.path(), 1);
    assert_eq!(gscd(&["inspect", "--instance", &p, "--enable", "teleport"]).status.code(), Some(2));
}

#[test]
fn missing_instance_exits_with_two() {
    let o = gscd(&["validate", "--instance", "/nonexistent/x.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_all_formats() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_instance(dir.path(), 4);
    let out = dir.path().join("sweep");
    let o = gscd(&["sweep", "--instance", &p, "--param", "cap", "--grid", "1.0:0.0:0.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 4);
    assert!(std::fs::read_to_string(out.join("report.svg")).unwrap().contains("<svg"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["points"].as_array().unwrap().len(), 3);
}

#[test]
fn compare_rejects_identical_configurations() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_instance(dir.path(), 4);
    let out = dir.path().join("cmp");
    let o = gscd(&[
        "compare", "--instance", &p, "--a", "safety_stock", "--b", "safety_stock", "--param", "cap", "--grid", "1.0",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn export_mps_writes_sections() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_instance(dir.path(), 1);
    let out = dir.path().join("m.mps");
    let o = gscd(&["export-mps", "--instance", &p, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    for section in ["NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
        assert!(text.lines().any(|l| l.starts_with(section)), "missing {section}");
    }
}
