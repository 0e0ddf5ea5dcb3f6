//! Process-level tests of the command-line contract: exit codes, report
//! artifacts, and reproducibility.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_evolop")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_mini_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("mini.json");
    let text = format!(
        r#"{{
        "name": "mini",
        "field": {{"dimension": 1, "period": 1.0, "q": [["1"]], "b": ["-x1"]}},
        "numerics": {{"radius": 6.0, "spacing": 0.25, "dt": 0.025}},
        "ou_reference": {{"a": "-1", "f": "0", "q": "1"}},
        "experiments": {{ {extra} }},
        "output_dir": "{}"
    }}"#,
        dir.join("out").display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn bad_config_exits_2_with_offset_message() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{
        "name": "bad",
        "field": {"dimension": 1, "period": 1.0, "q": [["1"]], "b": ["log("]},
        "numerics": {"radius": 4.0, "spacing": 0.1, "dt": 0.01},
        "experiments": {"validate": {}}
    }"#,
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["validate", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("offset 4"), "{stderr}");
}

#[test]
fn missing_config_exits_2() {
    let out = Command::new(bin())
        .args(["validate", "--config", "/nonexistent/nowhere.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mini_run_writes_report_and_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_mini_config(
        dir.path(),
        r#""validate": {}, "solve": {"t": 0.5, "ou_tol": 0.2}, "kernel": {"t": 0.5, "moment_tol": 0.2}"#,
    );
    let out = Command::new(bin())
        .args(["all", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let report = dir.path().join("out/report.json");
    assert!(report.exists());
    let text = std::fs::read_to_string(report).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(parsed["experiments"].as_array().unwrap().len() >= 3);
    assert!(dir.path().join("out/solve.csv").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[PASS] validate"), "{stdout}");
}

#[test]
fn failed_expectation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // the autonomous OU benchmark is not tight: demanding stability under
    // doubling must fail
    let cfg = write_mini_config(
        dir.path(),
        r#""tightness": {"t": 1.0, "eps": 0.01, "doubling_check": true, "expect_tight": true}"#,
    );
    let out = Command::new(bin())
        .args(["tightness", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[FAIL]"), "{stdout}");
}

#[test]
fn reports_are_reproducible_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_mini_config(
        dir.path(),
        r#""solve": {"t": 0.5, "ou_tol": 0.2}, "mc": {"t": 0.5, "n": 5000, "em_dt": 0.025, "seed": 7}"#,
    );
    let run = |out_name: &str| {
        let out_dir = dir.path().join(out_name);
        let status = Command::new(bin())
            .args(["all", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        let text = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        // wall time varies; the numeric payload must not
        v.as_object_mut().unwrap().remove("provenance");
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(run("a"), run("b"), "re-running with the same seed must be bit-identical");
}

#[test]
fn refine_flag_tightens_the_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_mini_config(dir.path(), r#""solve": {"t": 0.5, "ou_tol": 0.2}"#);
    // base run at a coarse grid passes at a loose tolerance
    let out = Command::new(bin())
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("coarse"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    // one refinement halves h and quarters dt; errors must not grow
    let out = Command::new(bin())
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--refine", )
        .arg("1")
        .arg("--out")
        .arg(dir.path().join("fine"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let err_of = |dirname: &str| -> f64 {
        let text =
            std::fs::read_to_string(dir.path().join(dirname).join("report.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["experiments"][0]["checks"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|c| c["name"].as_str().unwrap().contains("|PDE - exact|"))
            .map(|c| c["value"].as_f64().unwrap())
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err_of("coarse"), err_of("fine"));
    assert!(fine < coarse, "refinement must reduce error: {coarse} -> {fine}");
}

#[test]
fn parallel_all_isolates_experiment_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_mini_config(
        dir.path(),
        r#""validate": {}, "solve": {"t": 0.5, "ou_tol": 0.2}, "kernel": {"t": 0.5, "moment_tol": 0.2}"#,
    );
    let out_dir = dir.path().join("par");
    let out = Command::new(bin())
        .args(["all", "--parallel", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    for sub in ["validate", "solve", "kernel"] {
        assert!(
            out_dir.join(sub).join("report.json").exists(),
            "missing isolated report for {sub}"
        );
    }
}

#[test]
fn bundled_benchmark_configs_validate() {
    for name in ["ou.json", "cubic.json"] {
        let out = Command::new(bin())
            .args(["validate", "--config"])
            .arg(configs().join(name))
            .arg("--out")
            .arg(tempfile::tempdir().unwrap().path())
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{name}");
    }
}
