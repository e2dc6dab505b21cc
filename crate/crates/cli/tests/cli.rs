use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bombieri(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bombieri"))
        .args(args)
        .env("BOMBIERI_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn gen(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name);
    let p = path.to_str().unwrap().to_string();
    let mut all = vec!["gen-array", "--out", &p];
    all.extend_from_slice(args);
    let o = bombieri(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    p
}

#[test]
fn gen_array_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.json", &["--k", "20", "--density", "1.5"]);
    let arr: Value = serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    assert_eq!(arr["k"], 20);
    assert_eq!(arr["nodes"].as_array().unwrap().len(), 30);

    let f = json(&bombieri(&["frame-bounds", "--array", &a]));
    assert_eq!(f["k"], 20);
    assert!(f["lower_bound"].as_f64().unwrap() > 0.0);
    assert_eq!(f["singular_values"].as_array().unwrap().len(), 21);

    let csv = stdout(&bombieri(&["frame-bounds", "--array", &a, "--format", "csv"]));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].split(',').any(|h| h == "upper_bound"));

    let g = json(&bombieri(&["geometry", "--array", &a, "--c", "-0.5", "--mesh", "5000"]));
    assert_eq!(g["c"], -0.5);
    assert_eq!(g["mesh_size"], 5000);
    assert!(g["overlap_count"].as_u64().unwrap() >= 1);
}

#[test]
fn interpolation_constant_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.json", &["--k", "30", "--density", "0.5", "--separate", "0"]);
    let v = json(&bombieri(&["interp-constant", "--array", &a]));
    assert!(v["interpolation_constant"].as_f64().unwrap() >= 1.0);

    let b = gen(dir.path(), "b.json", &["--k", "10", "--density", "2"]);
    let o = bombieri(&["interp-constant", "--array", &b]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("overdetermined"));

    let o = bombieri(&["frame-bounds", "--array", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = bombieri(&["gen-array", "--k", "16", "--mult", "uniform:5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hand_case_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("two.json");
    std::fs::write(
        &p,
        r#"{"k": 1, "nodes": [{"re": 0, "im": 0, "m": 1}, {"re": 1, "im": 0, "m": 1}]}"#,
    )
    .unwrap();
    let v = json(&bombieri(&["interp-constant", "--array", p.to_str().unwrap()]));
    let want = 1.0 / (1.0 - 0.5f64.sqrt()).sqrt();
    assert!((v["interpolation_constant"].as_f64().unwrap() - want).abs() < 1e-10);
    let f = json(&bombieri(&["frame-bounds", "--array", p.to_str().unwrap(), "--k", "3"]));
    assert_eq!(f["condition"], "inf");
    assert_eq!(f["rank"], 2);
}

fn without_timing(csv: &str) -> String {
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "wall_time_ms").unwrap();
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(col);
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "sweep".to_string(),
            "--generator".into(),
            "perturbed".into(),
            "--k".into(),
            "16,25,36".into(),
            "--mult".into(),
            "random:2:5".into(),
            "--seed".into(),
            "3".into(),
            "--mesh".into(),
            "1000".into(),
            "--hole".into(),
            "0.1,-0.2,0.3".into(),
            "--out".into(),
            out.into(),
        ]
    };
    let mut texts = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let a = args(out.to_str().unwrap());
        let o = bombieri(&a.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        texts.push(std::fs::read_to_string(out).unwrap());
    }
    assert_eq!(texts[0].lines().count(), 4);
    assert_eq!(without_timing(&texts[0]), without_timing(&texts[1]));
    // no temporary files left behind
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn sweep_from_config_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("rows.json");
    std::fs::write(
        &cfg,
        serde_json::json!({
            "generator": "CLUSTERED",
            "k_list": [16, 36],
            "density": 1.0,
            "multiplicity_rule": {"UNIFORM": {"m": 2}},
            "c": 0.5,
            "mesh_n": 1000,
            "seed": 1,
            "output_path": out,
        })
        .to_string(),
    )
    .unwrap();
    let o = bombieri(&["sweep", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["k"], 16);
    assert_eq!(rows[1]["total_multiplicity"], 36);

    std::fs::write(&cfg, r#"{"generator": "FIBONACCI", "k_list": [20, 10], "density": 1.0,
        "multiplicity_rule": "SQRT_K", "c": 1.0, "mesh_n": 1000, "seed": 0}"#)
        .unwrap();
    let o = bombieri(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("strictly increasing"));
}

#[test]
fn verify_annex_exit_status() {
    let o = bombieri(&["verify-annex", "--k", "100,200", "--id", "lemma0,tip_beta"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    assert!(csv.starts_with("id,k,m,"));
    assert!(csv.lines().skip(1).all(|l| l.contains(",true,")));

    // m > k is a regime error, not a failure
    let o = bombieri(&["verify-annex", "--k", "100", "--id", "LEMMA0", "--m", "5,101", "--format", "json"]);
    let v = json(&o);
    let rows = v["rows"].as_array().unwrap();
    assert!(rows[0]["report"]["holds"].as_bool().unwrap());
    assert!(rows[1]["error"].as_str().unwrap().contains("regime"));

    // an impossible floor makes every cell fail
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("baseline.json");
    let committed: Value =
        serde_json::from_str(include_str!("../../core/data/annex_baseline.json")).unwrap();
    let mut b = committed.clone();
    for e in b["entries"].as_array_mut().unwrap() {
        if e["id"] == "TIP_BETA" {
            e["floor"] = Value::from(1.0);
        }
    }
    std::fs::write(&path, b.to_string()).unwrap();
    let o = bombieri(&["verify-annex", "--k", "100", "--id", "TIP_BETA", "--baseline", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn thread_variable_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_bombieri"))
        .args(["gen-array", "--k", "4"])
        .env("BOMBIERI_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("BOMBIERI_THREADS"));
}
