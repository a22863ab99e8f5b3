use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scenery::inversion::{TemporalOracle, TraceTemporal};
use scenery::reconstruct::read_trace;
use serde_json::{json, Value};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_scenery");

fn three_arcs() -> Value {
    json!({"dim": 1, "boxes": [[[0.3, 1.1]], [[2.0, 3.4]], [[4.2, 5.0]]]})
}

fn half() -> Value {
    json!({"dim": 1, "boxes": [[[0.0, std::f64::consts::PI]]]})
}

fn brownian() -> Value {
    json!({"dim": 1, "brownian": {"drift": [1.0], "sigma2": [1.0]}})
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_stage(stage: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        stage,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn simulate_is_seeded_and_stamped() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({"law": brownian(), "scenery": three_arcs(), "dt": 0.1, "horizon": 20.0});
    let c = write_config(dir.path(), "sim.json", &cfg);
    let (a, b, other) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    ok(&run_stage("simulate", &c, &a, &["--seed", "5"]));
    ok(&run_stage(
        "simulate",
        &c,
        &b,
        &["--seed", "5", "--workers", "2"],
    ));
    ok(&run_stage("simulate", &c, &other, &["--seed", "6"]));
    let ta = fs::read(a.join("trace.csv")).unwrap();
    assert_eq!(ta, fs::read(b.join("trace.csv")).unwrap());
    assert_ne!(ta, fs::read(other.join("trace.csv")).unwrap());
    let text = String::from_utf8(ta).unwrap();
    assert!(text.contains("# seed: 5\n"));
    assert!(text.lines().any(|l| l.starts_with("# config_hash: ")));
    assert!(text.lines().any(|l| l == "time,value"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 202);
}

#[test]
fn simulate_empty_scenery_gives_zeros() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({"law": brownian(), "scenery": {"dim": 1, "boxes": []}, "dt": 0.5, "horizon": 10.0, "seed": 1});
    let c = write_config(dir.path(), "sim.json", &cfg);
    ok(&run_stage("simulate", &c, dir.path(), &[]));
    let (values, _) = read_trace(&dir.path().join("trace.csv")).unwrap();
    assert_eq!(values.len(), 21);
    assert!(values.iter().all(|&v| v == 0.0));
}

#[test]
fn occupation_fraction_matches_measure() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({"law": brownian(), "scenery": three_arcs(), "dt": 0.05, "horizon": 4000.0, "seed": 11});
    let c = write_config(dir.path(), "sim.json", &cfg);
    ok(&run_stage("simulate", &c, dir.path(), &[]));
    let (values, dt) = read_trace(&dir.path().join("trace.csv")).unwrap();
    let est = TraceTemporal::new(values, dt)
        .unwrap()
        .temporal(&[])
        .unwrap();
    let expected = (0.8 + 1.4 + 0.8) / std::f64::consts::TAU;
    assert!(
        (est.value - expected).abs() <= 4.0 * est.stderr,
        "fraction {} vs {expected}, stderr {}",
        est.value,
        est.stderr
    );
}

#[test]
fn fourier_output_feeds_back_as_table() {
    let dir = TempDir::new().unwrap();
    let c = write_config(
        dir.path(),
        "f.json",
        &json!({"scenery": half(), "n": 1, "K": 2}),
    );
    ok(&run_stage("fourier", &c, dir.path(), &[]));
    let text = fs::read_to_string(dir.path().join("fourier.json")).unwrap();
    let table = scenery::inversion::SpatialFourierTable::from_json_str(&text).unwrap();
    assert_eq!(table.len(), 5);
    // k = 0: μ² / 2π with μ = π
    let zero = table.get(&[0]).unwrap();
    assert!((zero.re - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    assert!(read_json(&dir.path().join("fourier.json"))["meta"]["config_hash"].is_string());
}

#[test]
fn correlate_mc_agrees_with_exact() {
    let dir = TempDir::new().unwrap();
    let times = json!([[], [0.4], [1.5], [0.3, 0.6]]);
    let base = json!({"law": brownian(), "scenery": three_arcs(), "times": times, "samples": 40000, "seed": 3});
    let mut mc = base.clone();
    mc["method"] = json!("mc");
    let mut exact = base;
    exact["method"] = json!("exact");
    let (dm, de) = (dir.path().join("mc"), dir.path().join("exact"));
    ok(&run_stage(
        "correlate",
        &write_config(dir.path(), "mc.json", &mc),
        &dm,
        &[],
    ));
    ok(&run_stage(
        "correlate",
        &write_config(dir.path(), "ex.json", &exact),
        &de,
        &[],
    ));
    let rows = |p: &Path| -> Vec<(f64, f64)> {
        fs::read_to_string(p.join("correlations.csv"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with('n'))
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                let n = f.len();
                (f[n - 4].parse().unwrap(), f[n - 3].parse().unwrap())
            })
            .collect()
    };
    let (m, e) = (rows(&dm), rows(&de));
    assert_eq!(m.len(), 4);
    for ((mv, ms), (ev, _)) in m.iter().zip(&e) {
        assert!(*ms > 0.0);
        assert!((mv - ev).abs() <= 4.0 * ms, "mc {mv} ± {ms} vs exact {ev}");
    }
}

#[test]
fn reconstruct_half_circle_exactly() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({"law": brownian(), "scenery": half(), "m": 4, "mode": "exact", "seed": 1});
    let c = write_config(dir.path(), "rec.json", &cfg);
    ok(&run_stage("reconstruct", &c, dir.path(), &[]));
    let out = read_json(&dir.path().join("reconstruction.json"));
    assert!(out["aligned_distance"].as_f64().unwrap() < 1e-9);
    assert_eq!(out["meta"]["seed"], json!(1));

    let truth = write_config(dir.path(), "truth.json", &half());
    let ev = json!({"estimate": "reconstruction.json", "truth": truth, "resolution": 64});
    ok(&run_stage(
        "evaluate",
        &write_config(dir.path(), "ev.json", &ev),
        dir.path(),
        &[],
    ));
    let e = read_json(&dir.path().join("evaluation.json"));
    assert!(e["distance"].as_f64().unwrap() < 1e-9);
}

#[test]
fn evaluate_identical_is_zero() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), "s.json", &three_arcs());
    let ev = json!({"estimate": "s.json", "truth": "s.json"});
    ok(&run_stage(
        "evaluate",
        &write_config(dir.path(), "ev.json", &ev),
        dir.path(),
        &[],
    ));
    assert_eq!(
        read_json(&dir.path().join("evaluation.json"))["distance"],
        json!(0.0)
    );
}

#[test]
fn invert_from_exact_and_from_trace() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({"law": brownian(), "scenery": three_arcs(), "n": 1, "K": 3, "guard": 2, "moments": 22, "oracle": "exact"});
    ok(&run_stage(
        "invert",
        &write_config(dir.path(), "inv.json", &cfg),
        dir.path(),
        &[],
    ));
    let out = read_json(&dir.path().join("spatial_fourier_n1.json"));
    assert_eq!(out["recovery"]["trusted"], json!(true));

    let sim = json!({"law": brownian(), "scenery": three_arcs(), "dt": 0.25, "horizon": 500.0, "seed": 2});
    ok(&run_stage(
        "simulate",
        &write_config(dir.path(), "sim.json", &sim),
        dir.path(),
        &[],
    ));
    let cfg = json!({"law": brownian(), "trace_file": "trace.csv", "n": 1, "K": 2, "t0": 0.5, "oracle": "trace"});
    let sub = dir.path().join("fromtrace");
    ok(&run_stage(
        "invert",
        &write_config(dir.path(), "inv_trace.json", &cfg),
        &sub,
        &[],
    ));
    assert!(sub.join("spatial_fourier_n1.json").exists());
}

#[test]
fn missing_upstream_exits_3() {
    let dir = TempDir::new().unwrap();
    let ev = json!({"estimate": "nowhere.json", "truth": "nowhere.json"});
    let o = run_stage(
        "evaluate",
        &write_config(dir.path(), "ev.json", &ev),
        dir.path(),
        &[],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere.json"));

    let cfg =
        json!({"law": brownian(), "trace_file": "absent.csv", "n": 1, "K": 2, "oracle": "trace"});
    let o = run_stage(
        "invert",
        &write_config(dir.path(), "inv.json", &cfg),
        dir.path(),
        &[],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.csv"));

    let atom =
        json!({"dim": 1, "jump": {"rate": 1.0, "mixture": [{"w": 1.0, "mean": 0.9, "var": 0.3}]}});
    let cfg = json!({"law": atom, "scenery": three_arcs(), "n": 2, "K": 1, "oracle": "exact"});
    let o = run_stage(
        "invert",
        &write_config(dir.path(), "inv2.json", &cfg),
        dir.path(),
        &[],
    );
    assert_eq!(
        o.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn bad_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let o = run_stage("fourier", &dir.path().join("absent.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let c = write_config(dir.path(), "bad.json", &json!({"scenery": half(), "n": 1}));
    let o = run_stage("fourier", &c, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
    let c = write_config(
        dir.path(),
        "bad2.json",
        &json!({"scenery": {"dim": 1, "boxes": [[[1.0, 0.5]]]}, "n": 1, "K": 1}),
    );
    assert_eq!(
        run_stage("fourier", &c, dir.path(), &[]).status.code(),
        Some(2)
    );
}

#[test]
fn inputs_are_not_modified() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({"law": brownian(), "scenery": half(), "m": 4, "mode": "exact"});
    let c = write_config(dir.path(), "rec.json", &cfg);
    let before = fs::read(&c).unwrap();
    ok(&run_stage("reconstruct", &c, dir.path(), &[]));
    assert_eq!(before, fs::read(&c).unwrap());
}

#[test]
fn selftest_negative_control_exits_4() {
    let o = run(&["selftest", "--corrupt-gamma-hat"]);
    assert_eq!(o.status.code(), Some(4));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(
        out.lines().any(|l| l.starts_with("criterion  1 FAIL")),
        "{out}"
    );
}
