use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn study(name: &str) -> PathBuf {
    root().join("studies").join(format!("{name}.json"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("inverter-doa-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inverter-doa"))
        .args(args)
        .env("INVERTER_DOA_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn strip_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema").join(name);
    let s: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&s).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ccr_command_reports_radius() {
    let o = run(&["ccr", "--study", s(&study("table_a1_xg035"))]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert_valid(&schema("ccr.schema.json"), &v);
    let ccr = v["ccr"].as_f64().unwrap();
    assert!((ccr - 0.90).abs() < 0.01, "{ccr}");
    assert!(v["t_ccr"].as_f64().unwrap() > 0.0);
}

#[test]
fn override_equals_edited_study() {
    let dir = scratch("override");
    let text = std::fs::read_to_string(study("table_a1_xg035")).unwrap();
    let mut edited: Value = serde_json::from_str(&text).unwrap();
    edited["network"]["xg"] = 0.4.into();
    let path = dir.join("edited.json");
    std::fs::write(&path, serde_json::to_string(&edited).unwrap()).unwrap();

    let a = run(&["study", "--study", s(&study("table_a1_xg035")), "--set", "network.xg=0.4", "--out", s(&dir.join("a"))]);
    let b = run(&["study", "--study", s(&path), "--out", s(&dir.join("b"))]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(strip_timing(json_out(&a)), strip_timing(json_out(&b)));
}

#[test]
fn bad_override_is_an_error() {
    let o = run(&["ccr", "--study", s(&study("table_a1_xg035")), "--set", "network.xq=0.4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("network.xq"));
}

#[test]
fn missing_equilibrium_exit_code() {
    let o = run(&["equilibria", "--study", s(&study("gsp_no_sep"))]);
    assert_eq!(o.status.code(), Some(2));
    let v = json_out(&o);
    assert_valid(&schema("equilibria.schema.json"), &v);
    assert!(v["pre_sep"].is_null());
    assert!(v["equilibria"]["prefault"].as_array().unwrap().iter().all(|e| e["kind"] != "SEP"));
}

#[test]
fn equilibria_output_validates() {
    let o = run(&["equilibria", "--study", s(&study("table_a3"))]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert_valid(&schema("equilibria.schema.json"), &v);
    let kinds: Vec<&str> = v["equilibria"]["postfault"].as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds.iter().filter(|k| **k == "SEP").count(), 1, "{kinds:?}");
}

#[test]
fn portrait_layer_matches_doa_export() {
    let dir = scratch("portrait");
    let o = run(&["portrait", "--study", s(&study("table_a1_xg040")), "--out", s(&dir)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doa = std::fs::read_to_string(dir.join("doa_0.csv")).unwrap();
    let layer = std::fs::read_to_string(dir.join("portrait_0_doa.csv")).unwrap();
    let rows = |t: &str| t.lines().skip(1).map(str::to_owned).collect::<Vec<_>>();
    assert!(rows(&doa).len() > 10);
    assert_eq!(rows(&doa), rows(&layer));
    let svg = std::fs::read_to_string(dir.join("portrait_0.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.contains("class=\"doa\"") && svg.contains("class=\"spo\""));
    assert!(dir.join("cycle_0.csv").exists());
}

#[test]
fn portrait_without_equilibrium_is_annotated() {
    let dir = scratch("nosep");
    let o = run(&["portrait", "--study", s(&study("gsp_no_sep")), "--out", s(&dir)]);
    assert_eq!(o.status.code(), Some(2));
    let svg = std::fs::read_to_string(dir.join("portrait_0.svg")).unwrap();
    assert!(svg.contains("no stable equilibrium"));
}

#[test]
fn portrait_needs_doa() {
    let o = run(&["portrait", "--study", s(&study("table_a1_xg035")), "--set", "analysis.doa=false", "--set", "analysis.ccr=false",
        "--set", "analysis.t_ccr=false", "--set", "analysis.cct=false", "--set", "analysis.cca=false", "--set", "analysis.lyapunov=false"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("doa"));
}

#[test]
fn runs_are_deterministic() {
    let dir = scratch("determinism");
    let args = |d: &str| vec!["study".to_owned(), "--study".into(), s(&study("table_a3")).into(), "--seed".into(), "7".into(), "--out".into(), s(&dir.join(d)).into()];
    let a = run(&args("a").iter().map(String::as_str).collect::<Vec<_>>());
    let b = run(&args("b").iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(strip_timing(json_out(&a)), strip_timing(json_out(&b)));
    for f in ["doa_0.csv", "doa_2.csv", "trajectory_1_0.csv", "sweep_summary.csv"] {
        assert_eq!(std::fs::read(dir.join("a").join(f)).unwrap(), std::fs::read(dir.join("b").join(f)).unwrap(), "{f}");
    }
    let basin = &json_out(&a)["points"][0]["basin"];
    assert_eq!(basin["samples"].as_u64(), Some(41 * 41));
}

#[test]
fn sweep_points_are_independent() {
    let dir = scratch("independent");
    let text = std::fs::read_to_string(study("table_a3")).unwrap();
    let mut alone: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(alone["sweep"]["parameter"], "ibr2.m_q");
    let m_q = alone["sweep"]["values"][1].clone();
    alone.as_object_mut().unwrap().remove("sweep");
    alone["ibr2"]["m_q"] = m_q;
    let path = dir.join("alone.json");
    std::fs::write(&path, serde_json::to_string(&alone).unwrap()).unwrap();

    let full = json_out(&run(&["sweep", "--study", s(&study("table_a3")), "--workers", "3", "--out", s(&dir.join("full"))]));
    let single = json_out(&run(&["study", "--study", s(&path), "--workers", "1", "--out", s(&dir.join("one"))]));
    for key in ["report", "equilibria", "doa", "clearing", "system"] {
        assert_eq!(full["points"][1][key], single["points"][0][key], "{key}");
    }
}

#[test]
fn sweep_needs_sweep_block() {
    let o = run(&["sweep", "--study", s(&study("table_a1_xg035"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reports_validate_against_schema() {
    let v = schema("report.schema.json");
    for name in ["table_a1_xg040", "table_a2_gsp", "location_gsp", "gsp_no_sep"] {
        let dir = scratch(name);
        let o = run(&["study", "--study", s(&study(name)), "--out", s(&dir)]);
        let doc = json_out(&o);
        assert_valid(&v, &doc);
        let file: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
        assert_eq!(strip_timing(file), strip_timing(doc));
    }
}

fn close(a: &Value, b: &Value, path: &str) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            assert!((x - y).abs() <= 1e-6 * (1.0 + y.abs()), "{path}: {x} vs {y}");
        }
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len(), "{path}");
            for (i, (p, q)) in x.iter().zip(y).enumerate() {
                close(p, q, &format!("{path}.{i}"));
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            assert_eq!(x.len(), y.len(), "{path}");
            for (k, q) in y {
                close(&x[k], q, &format!("{path}.{k}"));
            }
        }
        _ => assert_eq!(a, b, "{path}"),
    }
}

#[test]
fn golden_metrics() {
    for name in ["table_a1_xg035", "table_a2_gsp", "table_a3"] {
        let dir = scratch(&format!("golden-{name}"));
        let r = json_out(&run(&["study", "--study", s(&study(name)), "--out", s(&dir)]));
        let points: Vec<Value> = r["points"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| {
                let rep = &p["report"];
                let sep = &p["post_sep"];
                serde_json::json!({
                    "sweep_value": p["sweep_value"],
                    "outcome": p["outcome"]["status"],
                    "ccr": rep["ccr"],
                    "t_ccr": rep["t_ccr"],
                    "cct": rep["cct"],
                    "post_sep": if sep.is_null() { Value::Null } else { serde_json::json!([sep["d1"], sep["d2"]]) },
                })
            })
            .collect();
        let mut got = serde_json::json!({ "points": points });
        if let Some(c) = r["convergence"].as_array() {
            got["hausdorff"] = c.iter().map(|c| c["hausdorff"].clone()).collect();
        }
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.json"));
        let want: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        close(&got, &want, name);
    }
}
