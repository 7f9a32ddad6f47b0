use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn exa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exa"))
        .args(args)
        .output()
        .expect("runs")
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("report is JSON")
}

#[test]
fn extract_stage_only_writes_exa() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = exa(&[
        "run", "--phantom", "ball", "--dims", "32", "--stages", "extract", "--no-resample",
        "--out-dir", out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(files(dir.path()), ["mesh.exa"]);
    let r = json(&o);
    assert!(r["vertices"].as_u64().unwrap() > 0);
    let tau = r["tau"].as_f64().unwrap();
    assert!(tau > 0.0 && tau < 1.0);
}

#[test]
fn phantom_file_round_trip_through_run_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let vol = dir.path().join("box");
    let o = exa(&[
        "phantom", "--phantom", "nested-box", "--dims", "48,40,32", "--noise", "0.1", "--seed", "3",
        "--out", vol.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let report = dir.path().join("report.json");
    let o = exa(&[
        "run", "--in", vol.to_str().unwrap(), "--no-resample", "--ao-rays", "16", "--ao-radius",
        "16", "--smooth-iters", "8", "--vertex-iters", "2", "--k1-thresh", "-0.5", "--export",
        "ply,stl,obj,bundle", "--threads", "1", "--out-dir", out.to_str().unwrap(), "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        files(&out),
        [
            "mesh.bundle", "mesh.exa", "mesh.features.exa", "mesh.obj", "mesh.ply",
            "mesh.smoothed.exa", "mesh.stl"
        ]
    );
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["tau_source"], "estimated");
    let names: Vec<&str> = r["stages"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    for s in ["import", "estimate", "denoise", "extract", "mesh", "smooth", "curvature", "ao", "deltas", "export"] {
        assert!(names.contains(&s), "{s} missing from {names:?}");
    }
    let o = exa(&["stats", "--json", out.join("mesh.features.exa").to_str().unwrap()]);
    assert!(o.status.success());
    let s = json(&o);
    assert_eq!(s["vertices"], r["vertices"]);
    let tags: Vec<&str> = s["sections"].as_array().unwrap().iter().map(|x| x["tag"].as_str().unwrap()).collect();
    assert_eq!(tags, ["TOPO", "AMBG", "PREC", "DPOS", "DNRM", "FEAT", "AOCC"]);
    assert!(s["partitions"].as_array().unwrap().len() >= 2);
    let o = exa(&["stats", out.join("mesh.bundle").to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("partition 2"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        serde_json::json!({
            "phantom": {"dims": [24, 24, 24], "kind": "sphere", "radius": 8.0, "polarity": "density"},
            "resample": false,
            "precision": 6,
            "stages": ["extract"],
            "out_dir": out,
        })
        .to_string(),
    )
    .unwrap();
    let o = exa(&["run", "--config", cfg.to_str().unwrap(), "--precision", "3", "--stem", "s"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["precision"], 3);
    assert_eq!(files(&out), ["s.exa"]);
    let o = exa(&["run", "--config", cfg.to_str().unwrap(), "--preset", "tablet"]);
    assert_eq!(json(&o)["precision"], 4);
}

#[test]
fn failures_exit_nonzero_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = exa(&["run", "--in", dir.path().join("nope").to_str().unwrap()]);
    assert!(!o.status.success());
    assert_eq!(json(&o)["error"]["stage"], "import");
    let o = exa(&["run", "--stages", "paint"]);
    assert!(!o.status.success());
    let o = exa(&["stats", dir.path().join("missing.exa").to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn config_table_census() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.bin");
    let o = exa(&["gen-table", "--kind", "config", "--out", p.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "328 cases, 27 classes");
}
