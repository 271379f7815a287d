use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn riskcot(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskcot"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PRIME_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(cwd: &Path, args: &[&str]) -> String {
    let out = riskcot(cwd, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Every file under `dir`, relative path to contents.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn generate_is_deterministic_and_stays_in_out() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    ok(cwd, &["generate", "--template", "empty-road", "--seed", "1", "--out", "a"]);
    ok(cwd, &["generate", "--template", "empty-road", "--seed", "1", "--out", "b"]);
    let a = snapshot(&cwd.join("a"));
    assert_eq!(a, snapshot(&cwd.join("b")));
    assert!(a.contains_key(Path::new("manifest.json")));
    assert!(a.contains_key(Path::new("empty-road_0001.json")));
    let top: Vec<_> = fs::read_dir(cwd).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(top.len(), 2, "{top:?}");
}

#[test]
fn reason_on_pedestrian_scene_brakes() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    ok(cwd, &["generate", "--template", "pedestrian-crossing", "--seed", "3", "--out", "suite"]);
    let stdout = ok(cwd, &["reason", "--scene", "suite/pedestrian-crossing_0003.json", "--out", "r"]);
    assert!(stdout.contains("braking"), "{stdout}");
    let trace: serde_json::Value = serde_json::from_str(&fs::read_to_string(cwd.join("r/trace.json")).unwrap()).unwrap();
    assert_eq!(trace["speed"], "Brake");
    let steps = trace["steps"].as_array().unwrap();
    assert!(steps.last().unwrap()["conclusion"].as_str().unwrap().contains("Brake"));

    let text = ok(cwd, &["trace", "--trace", "r/trace.json", "--out", "t"]);
    assert!(text.contains(" 1. "));
    assert_eq!(fs::read_to_string(cwd.join("t/trace.txt")).unwrap(), text);
}

#[test]
fn pipeline_commands_write_their_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    ok(cwd, &["generate", "--template", "dense-traffic", "--seed", "2", "--out", "s"]);
    let scene = "s/dense-traffic_0002.json";
    ok(cwd, &["detect", "--scene", scene, "--out", "d1"]);
    ok(cwd, &["detect", "--scene", scene, "--out", "d2"]);
    assert_eq!(snapshot(&cwd.join("d1")), snapshot(&cwd.join("d2")));
    ok(cwd, &["assess", "--scene", "d1/dense-traffic_0002_detected.json", "--use-scene-objects", "--out", "a"]);
    let assessments: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cwd.join("a/assessments.json")).unwrap()).unwrap();
    let first = &assessments[0];
    assert!(first["tier"]["color"].is_string(), "{first}");
    ok(cwd, &["graph", "--scene", scene, "--out", "g"]);
    let graph: serde_json::Value = serde_json::from_str(&fs::read_to_string(cwd.join("g/graph.json")).unwrap()).unwrap();
    assert_eq!(
        graph["nodes"].as_array().unwrap().len(),
        assessments.as_array().unwrap().len() + 1
    );
}

#[test]
fn evaluate_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    ok(
        cwd,
        &["generate", "--template", "empty-road,lead-vehicle", "--count", "2", "--out", "suite"],
    );
    let cfg = cwd.join("noiseless.json");
    fs::write(
        &cfg,
        r#"{"detector": {"kind": "oracle", "pos_std": 0, "dim_std": 0, "yaw_std": 0,
            "class_temperature": 0.001, "dropout_prob": 0, "seed": 0}}"#,
    )
    .unwrap();
    let table = ok(
        cwd,
        &["evaluate", "--manifest", "suite/manifest.json", "--config", "noiseless.json", "--jobs", "2", "--out", "e"],
    );
    for f in ["table.txt", "metrics.csv", "plot.json", "scenes.csv"] {
        assert!(cwd.join("e").join(f).exists(), "{f}");
    }
    assert!(table.contains("speed accuracy 100.0%"), "{table}");
    ok(cwd, &["report", "--metrics", "e/metrics.csv", "--out", "rep"]);
    assert_eq!(
        fs::read(cwd.join("rep/table.txt")).unwrap(),
        fs::read(cwd.join("e/table.txt")).unwrap()
    );
    assert_eq!(
        fs::read(cwd.join("rep/plot.json")).unwrap(),
        fs::read(cwd.join("e/plot.json")).unwrap()
    );

    // A missing scene is reported and makes the exit code nonzero.
    let manifest = cwd.join("suite/manifest.json");
    let text = fs::read_to_string(&manifest).unwrap();
    fs::write(&manifest, text.replace("empty-road_0000.json", "gone.json")).unwrap();
    let out = riskcot(cwd, &["evaluate", "--manifest", "suite/manifest.json", "--out", "e2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(cwd.join("e2/scenes.csv").exists());
}

#[test]
fn trained_parameters_are_usable() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    fs::write(
        cwd.join("small.json"),
        r#"{"interaction": {"layers": 1, "embed_dim": 8}, "training": {"steps": 5}}"#,
    )
    .unwrap();
    ok(cwd, &["train-bgnn", "--config", "small.json", "--graphs", "8", "--out", "m"]);
    assert!(cwd.join("m/bgnn.params").exists() && cwd.join("m/training.json").exists());
    fs::write(
        cwd.join("m/use.json"),
        r#"{"interaction": {"layers": 1, "embed_dim": 8}, "bgnn_params": "bgnn.params"}"#,
    )
    .unwrap();
    ok(cwd, &["generate", "--template", "lead-vehicle", "--out", "s"]);
    ok(cwd, &["reason", "--config", "m/use.json", "--scene", "s/lead-vehicle_0000.json", "--out", "r"]);
    // Architecture mismatch with the saved network is a runtime error.
    fs::write(cwd.join("m/bad.json"), r#"{"bgnn_params": "bgnn.params"}"#).unwrap();
    let out = riskcot(cwd, &["reason", "--scene", "s/lead-vehicle_0000.json", "--out", "r2", "--config", "m/bad.json"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("trained with"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn environment_config_fallback() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    fs::write(cwd.join("c.json"), r#"{"scenario": {"n_objects": 3}}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_riskcot"))
        .args(["generate", "--template", "lead-vehicle", "--out", "s"])
        .current_dir(cwd)
        .env("PRIME_CONFIG", cwd.join("c.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let scene: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cwd.join("s/lead-vehicle_0000.json")).unwrap()).unwrap();
    assert_eq!(scene["ground_truth"].as_array().unwrap().len(), 4);
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["frobnicate"][..], &["reason"], &["evaluate", "--jobs", "many", "--manifest", "m"]] {
        let out = riskcot(tmp.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert!(fs::read_dir(tmp.path()).unwrap().next().is_none());
}
