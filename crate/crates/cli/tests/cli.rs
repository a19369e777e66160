use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_valguard");

fn pipeline(name: &str) -> Value {
    json!({
        "name": name,
        "model": "pls",
        "n_lv_grid": [0, 1, 2],
        "selection_grid": [{"method": "vip"}],
        "outer_policy": {"kind": "random", "n_folds": 5},
        "inner_policy": {"kind": "random", "n_folds": 4},
        "metric": {"name": "q2"},
        "n_repetitions": 3
    })
}

fn config() -> Value {
    json!({
        "schema_version": 1,
        "seed": 5,
        "scenario": {"name": "fig4_pls_null"},
        "pipelines": [pipeline("a"), pipeline("b")]
    })
}

fn write_config(dir: &Path, v: &Value) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, v.to_string()).unwrap();
    path
}

fn valguard(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("VALGUARD_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn run_config(dir: &Path, v: &Value, extra: &[&str]) -> Output {
    let cfg = write_config(dir, v);
    let out = dir.join("out");
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    valguard(&args, &[])
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

#[test]
fn null_scenario_run_writes_report_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(dir.path(), &config(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path());
    assert_eq!(r["reports"][0]["per_repetition"].as_array().unwrap().len(), 3);
    assert_eq!(r["comparisons"].as_array().unwrap().len(), 1);
    assert!(r.get("watermark").is_none());
    for f in ["out/timings.json", "out/curves/a_cv_curve.csv", "out/curves/boxplot.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let boxplot = fs::read_to_string(dir.path().join("out/curves/boxplot.csv")).unwrap();
    assert!(boxplot.starts_with("a,b\n"));
}

#[test]
fn report_matches_shipped_schema() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = config();
    v["permutation"] = json!({"enabled": true, "n_perm": 5});
    v["bootstrap"] = json!({"n_boot": 50});
    assert_eq!(run_config(dir.path(), &v, &[]).status.code(), Some(0));
    let schema: Value = serde_json::from_str(
        &fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json")).unwrap(),
    )
    .unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let r = report(dir.path());
    let errors: Vec<String> = validator.iter_errors(&r).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    assert_eq!(r["reports"][0]["null_distribution"].as_array().unwrap().len(), 5);
    assert!(dir.path().join("out/curves/a_null_histogram.csv").exists());
    assert!(!validator.is_valid(&json!({"schema_version": 1})));
}

#[test]
fn both_data_sources_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = config();
    v["data"] = json!({"path": "x.csv", "y_cols": [-1]});
    let o = run_config(dir.path(), &v, &[]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("data, scenario") && msg.contains("not both"), "{msg}");
}

#[test]
fn invalid_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = config();
    v["pipelines"][1]["metric"]["name"] = json!("accuracy");
    let o = run_config(dir.path(), &v, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pipelines[1].metric.name"), "{}", stderr(&o));
    let cfg = write_config(dir.path(), &v);
    let o = valguard(&["validate-config", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn leakage_needs_flag_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = config();
    let o = run_config(dir.path(), &v, &["--demonstrate-leakage"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--demonstrate-leakage"));

    v["demonstrate_leakage"] = json!(true);
    assert_eq!(run_config(dir.path(), &v, &[]).status.code(), Some(2));

    let o = run_config(dir.path(), &v, &["--demonstrate-leakage"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path());
    assert_eq!(r["watermark"], "INVALID — leakage demonstration");
    assert_eq!(r["reports"][0]["watermark"], "INVALID — leakage demonstration");
    assert!(String::from_utf8_lossy(&o.stdout).contains("INVALID — leakage demonstration"));
}

#[test]
fn seed_flag_overrides_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let v = config();
    run_config(dir.path(), &v, &["--seed", "9"]);
    let first = fs::read(dir.path().join("out/report.json")).unwrap();
    let curve = fs::read(dir.path().join("out/curves/b_cv_curve.csv")).unwrap();
    assert_eq!(report(dir.path())["seed"], 9);
    assert_eq!(report(dir.path())["reports"][1]["seed"], 9);
    run_config(dir.path(), &v, &["--seed", "9", "--threads", "1"]);
    assert_eq!(first, fs::read(dir.path().join("out/report.json")).unwrap());
    assert_eq!(curve, fs::read(dir.path().join("out/curves/b_cv_curve.csv")).unwrap());
    run_config(dir.path(), &v, &[]);
    assert_ne!(first, fs::read(dir.path().join("out/report.json")).unwrap());
}

#[test]
fn thread_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &config());
    let out = dir.path().join("out");
    let args = ["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(valguard(&args, &[("VALGUARD_THREADS", "2")]).status.code(), Some(0));
    let o = valguard(&args, &[("VALGUARD_THREADS", "lots")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("VALGUARD_THREADS"));
}

#[test]
fn csv_data_round_trip_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = valguard(
        &["simgen", "--scenario", "fig4_pls_null", "--seed", "3", "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut v = config();
    v.as_object_mut().unwrap().remove("scenario");
    v["data"] = json!({"path": "fig4_pls_null.csv", "y_cols": ["y1"]});
    let o = run_config(dir.path(), &v, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(dir.path())["reports"][0]["n_vars"], 10);

    v["data"]["path"] = json!("missing.csv");
    let o = run_config(dir.path(), &v, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("missing.csv"));

    v["data"] = json!({"path": "fig4_pls_null.csv", "y_cols": ["nope"]});
    assert_eq!(run_config(dir.path(), &v, &[]).status.code(), Some(3));
}

#[test]
fn degenerate_computation_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("x1,x2,y\n");
    for i in 0..12 {
        csv += &format!("{},{},1.5\n", i, (i * 7) % 5);
    }
    fs::write(dir.path().join("flat.csv"), csv).unwrap();
    let mut v = config();
    v.as_object_mut().unwrap().remove("scenario");
    v["data"] = json!({"path": "flat.csv", "y_cols": ["y"]});
    let o = run_config(dir.path(), &v, &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn figure_and_simgen_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(valguard(&["figure", "2", "--seed", "1", "--out", out], &[]).status.code(), Some(0));
    assert!(dir.path().join("fig2_boxplot.csv").exists());
    assert_eq!(valguard(&["figure", "0", "--out", out], &[]).status.code(), Some(2));
    assert_eq!(valguard(&["simgen", "--scenario", "fig9", "--out", out], &[]).status.code(), Some(2));
    fs::write(dir.path().join("s.json"), r#"{"name":"fig6_informative","p":30}"#).unwrap();
    let s = dir.path().join("s.json");
    let o = valguard(&["simgen", "--config", s.to_str().unwrap(), "--out", out], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("fig6_informative.csv")).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 32);
}
