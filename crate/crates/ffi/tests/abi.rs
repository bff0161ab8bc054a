use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use surgeflow_ffi::*;

fn demo() -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/demo/scenario.json");
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = sf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    sf_string_free(s);
    out
}

#[test]
fn solve_demo_through_the_abi() {
    unsafe {
        let mut sc = ptr::null_mut();
        assert_eq!(sf_scenario_load(demo().as_ptr(), &mut sc), SfStatus::Ok);
        let mut run = ptr::null_mut();
        assert_eq!(sf_solve(sc, &mut run), SfStatus::Ok, "{}", last_error());
        assert!(sf_last_error_message().is_null());

        let (mut st, mut obj) = (SfSolveStatus::Infeasible, f64::NAN);
        assert_eq!(sf_run_solution(run, &mut st, &mut obj), SfStatus::Ok);
        assert_eq!(st, SfSolveStatus::Optimal);
        assert!(obj.is_finite() && obj > 0.0);

        let mut n = 0usize;
        assert_eq!(sf_run_transfer_count(run, &mut n), SfStatus::Ok);
        assert!(n > 0);
        let mut total = 0.0;
        for i in 0..n {
            let mut t = SfTransfer { group: 9, from: 9, to: 9, day: 99, amount: 0.0 };
            assert_eq!(sf_run_transfer(run, i, &mut t), SfStatus::Ok);
            assert!(t.from < 5 && t.to < 5 && t.from != t.to && t.day < 21 && t.amount > 0.0);
            total += t.amount;
        }
        let mut t = SfTransfer { group: 0, from: 0, to: 0, day: 0, amount: 0.0 };
        assert_eq!(sf_run_transfer(run, n, &mut t), SfStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));

        let mut json = ptr::null_mut();
        assert_eq!(sf_run_metrics_json(run, &mut json), SfStatus::Ok);
        let metrics = take(json);
        let v: serde_json::Value = serde_json::from_str(&metrics).unwrap();
        assert!((v["total_transferred"].as_f64().unwrap() - total).abs() < 1e-6);

        // saved bundle and re-evaluation agree byte for byte
        let tmp = tempfile::tempdir().unwrap();
        let dir = CString::new(tmp.path().to_str().unwrap()).unwrap();
        assert_eq!(sf_run_save(run, dir.as_ptr()), SfStatus::Ok, "{}", last_error());
        assert_eq!(std::fs::read_to_string(tmp.path().join("metrics.json")).unwrap(), metrics);
        let plan = CString::new(tmp.path().join("transfers.csv").to_str().unwrap()).unwrap();
        let mut ev = ptr::null_mut();
        assert_eq!(sf_evaluate_plan(sc, plan.as_ptr(), &mut ev), SfStatus::Ok, "{}", last_error());
        assert_eq!(take(ev), metrics);

        sf_run_free(run);
        sf_scenario_free(sc);
    }
}

#[test]
fn overrides_and_errors_map_to_status_codes() {
    unsafe {
        let mut sc = ptr::null_mut();
        assert_eq!(sf_scenario_load(demo().as_ptr(), &mut sc), SfStatus::Ok);
        let bad = CString::new(r#"{"robust": {"gamma": 99}}"#).unwrap();
        assert_eq!(sf_scenario_apply_overrides(sc, bad.as_ptr()), SfStatus::Ok);
        let mut run = ptr::null_mut();
        assert_ne!(sf_solve(sc, &mut run), SfStatus::Ok);
        assert!(run.is_null());
        assert!(last_error().contains("gamma"), "{}", last_error());

        let junk = CString::new("{not json").unwrap();
        assert_eq!(sf_scenario_apply_overrides(sc, junk.as_ptr()), SfStatus::InvalidArgument);
        sf_scenario_free(sc);

        let missing = CString::new("/no/such/scenario.json").unwrap();
        let mut sc = ptr::null_mut();
        assert_eq!(sf_scenario_load(missing.as_ptr(), &mut sc), SfStatus::Io);
        assert!(sc.is_null());

        let base = CString::new("/no/such/dir").unwrap();
        let json = CString::new(r#"{"dataset": {"dir": "."}}"#).unwrap();
        assert_eq!(sf_scenario_from_json(json.as_ptr(), base.as_ptr(), &mut sc), SfStatus::Ok);
        assert_eq!(sf_solve(sc, &mut run), SfStatus::Io);
        sf_scenario_free(sc);

        assert_eq!(sf_solve(ptr::null(), &mut run), SfStatus::NullPointer);
        assert!(last_error().contains("scenario"));
        assert_eq!(sf_scenario_load(ptr::null(), &mut sc), SfStatus::NullPointer);
        sf_run_free(ptr::null_mut());
        sf_scenario_free(ptr::null_mut());
        sf_string_free(ptr::null_mut());
    }
}

#[test]
fn estimate_admissions_roundtrip() {
    let pmf = [0.2, 0.3, 0.3, 0.2];
    let adm = [5.0, 8.0, 12.0, 15.0, 14.0, 10.0, 9.0, 7.0, 6.0, 4.0];
    // census(t) = sum_k adm(t-k) * P(los > k)
    let surv: Vec<f64> = (0..pmf.len()).map(|k| pmf[k..].iter().sum()).collect();
    let census: Vec<f64> = (0..adm.len())
        .map(|t| (0..=t.min(surv.len() - 1)).map(|k| adm[t - k] * surv[k]).sum())
        .collect();
    let mut out = vec![0.0; census.len()];
    let mut residual = f64::NAN;
    let st = unsafe {
        sf_estimate_admissions(census.as_ptr(), census.len(), pmf.as_ptr(), pmf.len(), 20_000, 1, out.as_mut_ptr(), &mut residual)
    };
    assert_eq!(st, SfStatus::Ok, "{}", last_error());
    assert!(residual <= 0.05, "{residual}");
    assert!(out.iter().all(|a| *a >= 0.0));

    let st = unsafe { sf_estimate_admissions(census.as_ptr(), 0, pmf.as_ptr(), 4, 10, 1, out.as_mut_ptr(), &mut residual) };
    assert_eq!(st, SfStatus::InvalidArgument);
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(sf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/surgeflow.h")).unwrap();
    let src = include_str!("../src/lib.rs");
    let exported: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 14);
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for ty in ["typedef struct SfScenario SfScenario;", "typedef struct SfRun SfRun;", "SF_STATUS_NULL_POINTER = 6"] {
        assert!(header.contains(ty), "{ty}");
    }
}

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let deps = exe.parent()?;
    [deps.parent()?.join("libsurgeflow_ffi.a"), deps.join("libsurgeflow_ffi.a")]
        .into_iter()
        .find(|p| p.is_file())
}

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = static_lib() else {
        eprintln!("skipping: static library not found");
        return;
    };
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "surgeflow.h"
int main(int argc, char **argv) {
    SfScenario *sc = NULL;
    SfRun *run = NULL;
    if (sf_scenario_load(argv[1], &sc) != SF_STATUS_OK) { fprintf(stderr, "%s\n", sf_last_error_message()); return 3; }
    if (sf_solve(sc, &run) != SF_STATUS_OK) { fprintf(stderr, "%s\n", sf_last_error_message()); return 4; }
    SfSolveStatus st; double obj;
    sf_run_solution(run, &st, &obj);
    size_t n = 0;
    sf_run_transfer_count(run, &n);
    printf("%d %zu %.3f\n", (int)st, n, obj);
    sf_run_free(run);
    sf_scenario_free(sc);
    return st == SF_SOLVE_STATUS_OPTIMAL && n > 0 ? 0 : 5;
}
"#,
    )
    .unwrap();
    let bin = tmp.path().join("main");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let cc = match std::process::Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
    {
        Ok(o) => o,
        Err(_) => {
            eprintln!("skipping: no C compiler");
            return;
        }
    };
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = std::process::Command::new(&bin).arg(demo().to_str().unwrap()).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.starts_with("0 "), "{stdout}");
}
