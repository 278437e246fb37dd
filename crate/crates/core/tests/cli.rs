use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_insect-vision")).current_dir(dir).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn help_and_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["optics", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn missing_taxonomy_is_a_config_error_and_creates_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--taxonomy", "missing.tsv", "--out", "run", "pipeline"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.tsv"));
    assert!(!dir.path().join("run").exists());
    assert!(!dir.path().join("runs").exists());
}

#[test]
fn bad_config_file_and_unreadable_input() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"sed": 1}"#).unwrap();
    assert_eq!(run(dir.path(), &["--config", "cfg.json", "optics"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["trigger", "nope.json"]).status.code(), Some(3));
    std::fs::write(dir.path().join("bad.txt"), "1.0\nbanana\n").unwrap();
    assert_eq!(run(dir.path(), &["trigger", "bad.txt"]).status.code(), Some(3));
}

#[test]
fn optics_reports_design_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&run(dir.path(), &["--json", "optics", "--pixel-pitch", "1.92", "--fov-width", "62.87"]));
    let blur = v["blur_pixels"].as_f64().unwrap();
    assert!((blur - 13.02).abs() < 0.01, "{blur}");
    assert_eq!(run(dir.path(), &["optics", "--aperture", "0"]).status.code(), Some(2));
}

#[test]
fn simulate_trigger_detect_chain() {
    let dir = tempfile::tempdir().unwrap();
    let sim = json(&run(dir.path(), &["--json", "--seed", "4", "--out", "sim", "simulate", "--class", "5", "--frames", "24"]));
    let lead = sim["layout"]["lead"].as_u64().unwrap();
    assert!(dir.path().join("sim/frame_0023.ppm").exists());
    assert!(dir.path().join(format!("sim/mask_{lead:04}.pgm")).exists());

    let ev = json(&run(dir.path(), &["--json", "trigger", "sim/transit.json"]));
    let events = ev["events"].as_array().unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0]["trigger_index"].as_u64(), Some(lead));

    let frame = format!("sim/frame_{lead:04}.ppm");
    let mask = format!("sim/mask_{lead:04}.pgm");
    let det = json(&run(dir.path(), &["--json", "--out", "det", "detect", &frame, "--mask", &mask, "--resize", "48"]));
    assert_eq!(det["bbox"]["w"], det["bbox"]["h"]);
    let crop = std::fs::read(dir.path().join("det/crop.ppm")).unwrap();
    assert!(crop.starts_with(b"P6\n48 48 255\n"));
}

#[test]
fn synth_split_train_eval_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    json(&run(d, &["--json", "--out", "data", "synth", "--classes", "3", "--per-class", "10"]));
    assert_eq!(std::fs::read_to_string(d.join("data/cropped.tsv")).unwrap().lines().count(), 30);

    let sp = json(&run(d, &["--json", "--out", "split", "split", "--manifest", "data/cropped.tsv"]));
    assert_eq!(sp["counts"][0], serde_json::json!([6, 2, 2]));
    assert!(d.join("split/split.tsv").exists());

    let tr = json(&run(d, &["--json", "--seed", "2", "--out", "model", "train", "--manifest", "data/cropped.tsv", "--epochs", "3", "--class-weights"]));
    assert_eq!(tr["history"].as_array().unwrap().len(), 3);
    for f in ["params.bin", "spec.json", "split.json", "train_metrics.json"] {
        assert!(d.join("model").join(f).exists(), "{f}");
    }

    let ev = json(&run(d, &["--json", "--seed", "2", "--out", "eval", "eval", "--manifest", "data/cropped.tsv", "--params", "model/params.bin"]));
    assert_eq!(ev["samples"], 6);
    assert!(d.join("eval/confusion.csv").exists());
    assert!(d.join("eval/confusion.ppm").exists());

    let cmp = json(&run(d, &["--json", "compare", "eval/metrics.json", "eval/metrics.json"]));
    assert_eq!(cmp["top1_delta"], 0.0);

    let pr = json(&run(d, &["--json", "predict", "data/full/00000.ppm", "--params", "model/params.bin", "--threshold", "0.5"]));
    let total: f64 = pr["probabilities"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);

    let wrong = run(d, &["--json", "--out", "x", "eval", "--manifest", "data/cropped.tsv", "--params", "missing.bin"]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn rollup_decides_genus_for_split_bumblebee_mass() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = vec![0.0; 16];
    v[1] = 0.40;
    v[2] = 0.35;
    v[0] = 0.10;
    v[15] = 0.15;
    std::fs::write(dir.path().join("p.json"), serde_json::to_string(&v).unwrap()).unwrap();
    let r = json(&run(dir.path(), &["--json", "rollup", "p.json", "--threshold", "0.7"]));
    assert_eq!(r["decision"]["taxon"], "Bombus");
    assert_eq!(r["decision"]["rank"], "genus");
    std::fs::write(dir.path().join("bad.json"), "[0.5, 0.6]").unwrap();
    assert_eq!(run(dir.path(), &["rollup", "bad.json"]).status.code(), Some(3));
}

#[test]
fn pipeline_writes_run_directory_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let rec = json(&run(d, &["--json", "--seed", "9", "--out", "run", "pipeline", "--transits", "3", "--epochs", "4"]));
    let m = &rec["metrics"];
    assert_eq!(m["transits"], 3);
    assert_eq!(m["captures"], 3);
    assert_eq!(m["crops"], 9);
    let crops = std::fs::read_dir(d.join("run/crops")).unwrap().count();
    assert_eq!(crops, 9);
    for f in ["run_record.json", "metrics.json", "predictions.json", "confusion.csv", "confusion.ppm", "params.bin"] {
        assert!(d.join("run").join(f).exists(), "{f}");
    }
    json(&run(d, &["--json", "--out", "again", "pipeline", "--replay", "run/run_record.json"]));
    assert_eq!(std::fs::read(d.join("run/metrics.json")).unwrap(), std::fs::read(d.join("again/metrics.json")).unwrap());
}

#[test]
fn every_json_report_records_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&run(dir.path(), &["--json", "--seed", "17", "optics"]));
    assert_eq!(v["seed"], 17);
    assert!(v["magnification"].as_f64().is_some());
    std::fs::write(dir.path().join("l.txt"), "1\n1\n1\n1\n1\n1\n1\n1\n5\n1\n").unwrap();
    let t = json(&run(dir.path(), &["--json", "--seed", "18", "trigger", "l.txt"]));
    assert_eq!(t["seed"], 18);
    assert_eq!(t["events"][0]["trigger_index"], 8);
}
