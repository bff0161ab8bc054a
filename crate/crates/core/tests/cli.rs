use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn demo_scenario() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo/scenario.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surgeflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn metrics(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

/// A copy of the demo dataset without deviation columns.
fn nominal_only(dir: &Path) -> PathBuf {
    let demo = demo_scenario().parent().unwrap().to_path_buf();
    for f in ["locations.csv", "capacity.csv"] {
        fs::copy(demo.join(f), dir.join(f)).unwrap();
    }
    let adm = fs::read_to_string(demo.join("admissions.csv")).unwrap();
    let trimmed: String = adm
        .lines()
        .map(|l| l.splitn(5, ',').take(4).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(dir.join("admissions.csv"), trimmed).unwrap();
    let scenario = dir.join("scenario.json");
    fs::write(&scenario, r#"{"dataset": {"dir": "."}}"#).unwrap();
    scenario
}

#[test]
fn solve_writes_bundle_and_evaluate_reproduces_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("solve");
    let o = run(&["solve", "--scenario", s(&demo_scenario()), "--objective", "min-overflow", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("Overflow Reduction"), "{stdout}");
    for f in ["transfers.csv", "census.csv", "baseline_census.csv", "metrics.json", "solution.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let m = metrics(&out);
    assert!(m["overflow_reduction"].as_f64().unwrap() > 0.0);

    let ev = tmp.path().join("eval");
    let o = run(&[
        "evaluate",
        "--scenario",
        s(&demo_scenario()),
        "--plan",
        s(&out.join("transfers.csv")),
        "--out",
        s(&ev),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(out.join("metrics.json")).unwrap(),
        fs::read(ev.join("metrics.json")).unwrap()
    );
}

#[test]
fn repeated_solves_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = run(&["solve", "--scenario", s(&demo_scenario()), "--preset", "operational", "--seed", "3", "--out", s(dir)]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["metrics.json", "transfers.csv", "solution.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn empty_plan_scores_no_reduction() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = tmp.path().join("transfers.csv");
    fs::write(&plan, "group,from,to,date,amount\n").unwrap();
    let out = tmp.path().join("eval");
    let o = run(&["evaluate", "--scenario", s(&demo_scenario()), "--plan", s(&plan), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = metrics(&out);
    assert_eq!(m["overflow_reduction"].as_f64(), Some(0.0));
    assert_eq!(m["total_transferred"].as_f64(), Some(0.0));
    assert_eq!(m["total_overflow"], m["baseline_overflow"]);
}

#[test]
fn gamma_without_deviation_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = nominal_only(tmp.path());
    let o = run(&["solve", "--scenario", s(&scenario), "--gamma", "3", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dev_lower") && err.contains("deviation_fraction"), "{err}");

    // the same scenario solves nominally
    let o = run(&["solve", "--scenario", s(&scenario), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gamma_beyond_horizon_is_rejected() {
    let o = run(&["solve", "--scenario", s(&demo_scenario()), "--gamma", "99", "--out", "/nonexistent/x"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`gamma`"));
}

#[test]
fn robust_flag_raises_planned_overflow() {
    let tmp = tempfile::tempdir().unwrap();
    let (nom, rob) = (tmp.path().join("n"), tmp.path().join("r"));
    assert_eq!(run(&["solve", "--scenario", s(&demo_scenario()), "--out", s(&nom)]).status.code(), Some(0));
    assert_eq!(
        run(&["solve", "--scenario", s(&demo_scenario()), "--gamma", "3", "--out", s(&rob)]).status.code(),
        Some(0)
    );
    let obj = |d: &Path| -> f64 {
        let v: Value = serde_json::from_str(&fs::read_to_string(d.join("solution.json")).unwrap()).unwrap();
        v["objective"].as_f64().unwrap()
    };
    assert!(obj(&rob) > obj(&nom));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(run(&["solve", "--scenario", "x.json", "--bogus"]).status.code(), Some(64));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&["solve", "--scenario", "x.json", "--objective", "max-joy"]).status.code(), Some(64));
    assert_eq!(run(&[]).status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_scenario_is_an_input_error() {
    let o = run(&["solve", "--scenario", "/definitely/not/here.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solver_failure_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let demo = demo_scenario().parent().unwrap().to_path_buf();
    let scenario = tmp.path().join("s.json");
    fs::write(
        &scenario,
        format!(
            r#"{{"dataset": {{"dir": {:?}}}, "solver": {{"iteration_limit": 1}}}}"#,
            demo.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = run(&["solve", "--scenario", s(&scenario), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn export_lp_writes_model() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["export-lp", "--scenario", s(&demo_scenario()), "--integer", "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(tmp.path().join("model.lp")).unwrap();
    assert!(text.starts_with("\\") || text.contains("Minimize"), "{}", &text[..80.min(text.len())]);
    assert!(text.contains("General"));
}

#[test]
fn estimate_writes_admissions() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["estimate", "--scenario", s(&demo_scenario()), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(tmp.path().join("estimated_admissions.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 5 * 21);
    assert!(text.starts_with("location_id,date,group,admissions\n"));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("estimation.json")).unwrap()).unwrap();
    for r in report.as_array().unwrap() {
        assert!(r["relative_residual"].as_f64().unwrap() <= 0.05, "{r}");
    }
}
