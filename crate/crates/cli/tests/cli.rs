use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn small_config(extra: Value) -> Value {
    let mut base = json!({
        "seed": 5,
        "pulse": { "n_steps": 200 },
        "noise_grid": { "m": 8, "n": 8 },
        "optimizer": { "trials": 3, "compare": [["B-PM", 1], ["PM", 1]] },
        "surrogate_demo": { "lattice_sizes": [4, 16], "fields": 2 },
        "magnetometry": { "realizations": 3, "t_max_us": 40.0 }
    });
    merge(&mut base, extra);
    base
}

fn merge(into: &mut Value, from: Value) {
    match (into, from) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in b {
                merge(a.entry(k).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}

fn bpm(dir: &Path, config: &Value, args: &[&str]) -> Output {
    let path = dir.join("config.in.json");
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_bpm"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap()).collect()
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(String::from).collect()
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_bpm"))
        .args(["--config", "/definitely/not/here.json", "optimize"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = bpm(
        dir.path(),
        &small_config(json!({ "pulse": { "n_steps": 0 } })),
        &["optimize"],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = bpm(dir.path(), &small_config(json!({ "typo": 1 })), &["optimize"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_threads_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = bpm(dir.path(), &small_config(json!({})), &["--threads", "0", "optimize"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn optimize_writes_run_and_map() {
    let dir = TempDir::new().unwrap();
    let out = bpm(dir.path(), &small_config(json!({})), &["optimize"]);
    ok(&out);
    let o = dir.path().join("out");
    let run: Value = serde_json::from_str(&std::fs::read_to_string(o.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["method"], "B-PM");
    assert_eq!(run["lambda_opt"].as_array().unwrap().len(), 3);
    let f = run["f_verified"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f));
    assert_eq!(header(&o.join("fidelity_map.csv")), ["delta_mhz", "kappa", "fidelity"]);
    assert_eq!(rows(&o.join("fidelity_map.csv")).len(), 64);
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(o.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "optimize");
}

#[test]
fn sfb_method_from_flags() {
    let dir = TempDir::new().unwrap();
    let out = bpm(
        dir.path(),
        &small_config(json!({})),
        &["optimize", "--method", "sfb", "--nd", "2"],
    );
    ok(&out);
    let run: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/run.json")).unwrap()).unwrap();
    assert_eq!(run["method"], "SFB");
    assert_eq!(run["n_sets"], 2);
    assert_eq!(run["lambda_opt"].as_array().unwrap().len(), 8);
    assert!(run["p_fit"].is_null());
}

#[test]
fn trials_are_reproducible_for_a_seed() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let config = small_config(json!({}));
    ok(&bpm(a.path(), &config, &["trials", "--threads", "1"]));
    ok(&bpm(b.path(), &config, &["trials", "--threads", "3"]));
    for name in ["trials.csv", "summary.json", "histogram.csv"] {
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
    let trials = rows(&a.path().join("out/trials.csv"));
    assert_eq!(trials.len(), 3);
    let hist = rows(&a.path().join("out/histogram.csv"));
    assert_eq!(hist.len(), 100);
    let total: usize = hist.iter().map(|r| r[2].parse::<usize>().unwrap()).sum();
    assert_eq!(total, 3);
    // lambda_opt is a whitespace-separated list of floats
    for t in &trials {
        let lambda: Vec<f64> = t[12].split(' ').map(|v| v.parse().unwrap()).collect();
        assert_eq!(lambda.len(), 3);
    }
}

#[test]
fn compare_summarises_each_pair() {
    let dir = TempDir::new().unwrap();
    ok(&bpm(
        dir.path(),
        &small_config(json!({})),
        &["compare", "--trials", "2"],
    ));
    let summary = rows(&dir.path().join("out/compare.csv"));
    assert_eq!(summary.len(), 2);
    assert_eq!(&summary[0][0], "B-PM");
    assert_eq!(&summary[1][0], "PM");
    assert_eq!(rows(&dir.path().join("out/compare_trials.csv")).len(), 4);
}

#[test]
fn surrogate_demo_outputs() {
    let dir = TempDir::new().unwrap();
    ok(&bpm(dir.path(), &small_config(json!({})), &["surrogate-demo"]));
    let o = dir.path().join("out");
    assert_eq!(rows(&o.join("truth_map.csv")).len(), 64);
    for n in [9, 16] {
        assert_eq!(rows(&o.join(format!("samples_n{n}.csv"))).len(), n);
        assert_eq!(rows(&o.join(format!("subsample_n{n}.csv"))).len(), n);
        assert_eq!(rows(&o.join(format!("prediction_n{n}.csv"))).len(), 64);
    }
    let scaling = rows(&o.join("objective_scaling.csv"));
    assert_eq!(scaling.len(), 4);
    for r in &scaling {
        for i in 2..6 {
            assert!(r[i].parse::<f64>().unwrap() >= 0.0);
        }
    }
}

#[test]
fn constant_truth_is_reproduced_exactly() {
    let dir = TempDir::new().unwrap();
    let config = small_config(json!({ "surrogate_demo": { "synthetic_constant": 0.75 } }));
    ok(&bpm(dir.path(), &config, &["surrogate-demo"]));
    let o = dir.path().join("out");
    for r in rows(&o.join("prediction_n9.csv")) {
        assert!((r[2].parse::<f64>().unwrap() - 0.75).abs() < 1e-12);
    }
    for r in rows(&o.join("objective_scaling.csv")) {
        assert!(r[3].parse::<f64>().unwrap() < 1e-12);
        assert!(r[5].parse::<f64>().unwrap() < 1e-12);
    }
}

#[test]
fn noiseless_magnetometry_matches_ideal_phase() {
    let dir = TempDir::new().unwrap();
    let config = small_config(json!({
        "magnetometry": { "noise_enabled": false, "ideal_reference": true }
    }));
    ok(&bpm(dir.path(), &config, &["magnetometry"]));
    let o = dir.path().join("out");
    let traces = rows(&o.join("ramsey_traces.csv"));
    let g = 2.0 * std::f64::consts::PI * 0.1e6;
    let mut ideal = 0;
    for r in &traces {
        let p: f64 = r[1].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert!(r[2].parse::<f64>().unwrap() < 1e-12);
        if &r[3] == "ideal" {
            // readouts fall on whole half periods of |cos|, each adding 2g/ω
            let t = r[0].parse::<f64>().unwrap() * 1e-6;
            let chi = g * t * 2.0 / std::f64::consts::PI;
            assert!((p - 0.5 * (1.0 + (2.0 * chi).cos())).abs() < 1e-6, "t = {t}");
            ideal += 1;
        }
    }
    assert_eq!(ideal, 12);
    let kinds: Vec<String> = rows(&o.join("t2.csv")).iter().map(|r| r[0].to_string()).collect();
    assert_eq!(kinds, ["rectangular", "pm", "ideal"]);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(o.join("t2_summary.json")).unwrap()).unwrap();
    assert!(summary["ratio_shaped_over_rectangular"].as_f64().unwrap() > 0.0);
}

#[test]
fn magnetometry_accepts_an_optimised_field() {
    let dir = TempDir::new().unwrap();
    ok(&bpm(dir.path(), &small_config(json!({})), &["optimize"]));
    let run = dir.path().join("out/run.json");
    let second = TempDir::new().unwrap();
    let config = small_config(json!({ "magnetometry": { "shaped_field_path": run } }));
    ok(&bpm(second.path(), &config, &["magnetometry"]));
    assert_eq!(rows(&second.path().join("out/t2.csv")).len(), 2);
}
