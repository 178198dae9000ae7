use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gpsteer::dataset::read_dataset;
use gpsteer::model::{read_model, ModelBody};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gpsteer"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SCENE: &str = r#"{"kind": "sphere-scene", "seed": 0, "n_freqs": 12, "n_dirs": 40}"#;
const FIT: &str = r#"{"seed": 2, "n_obs": 10, "noise_var": 1e-8,
    "gp": {"iterations": 20, "pretrain_iterations": 5, "encoding": 8, "hidden": [8], "checkpoint_every": 10},
    "nf": {"iterations": 20, "encoding": 8, "hidden": [8]}, "chmat": {"iterations": 5}}"#;

fn simulated(dir: &Path) -> PathBuf {
    let cfg = write(dir, "scene.json", SCENE);
    let ds = dir.join("ds.json");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&ds)]);
    ds
}

#[test]
fn simulate_is_reproducible_and_echoes_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "scene.json", SCENE);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let msg = ok(&["simulate", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["simulate", "--config", s(&cfg), "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let ds = read_dataset(&a).unwrap().dataset;
    assert!(msg.contains(&format!("= {} values", ds.values.len())), "{msg}");
    assert_eq!(ds.values.len(), 12 * 4 * 40);
}

#[test]
fn mic_inside_sphere_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "scene.json", r#"{"kind": "sphere-scene", "mic_positions": [[0.01, 0.0, 0.0]]}"#);
    let out = run(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("x.json"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("inside the sphere"));
}

#[test]
fn usage_and_schema_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulated(dir.path());
    let out = run(&["fit", "--dataset", s(&ds), "--method", "kriging", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for m in ["gp-steerer", "gp-chmat", "krr", "sh", "nn", "nf", "nf-gw", "pcnn"] {
        assert!(err.contains(m), "{err}");
    }
    let bad = write(dir.path(), "fit.json", r#"{"gp": {"iterations": "many"}}"#);
    let out = run(&["fit", "--dataset", s(&ds), "--method", "nn", "--config", s(&bad), "--out", s(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/gp/iterations"));
    let out = run(&["fit", "--dataset", s(&dir.path().join("missing.json")), "--method", "nn", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn nn_stores_only_the_training_subset() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulated(dir.path());
    let m = dir.path().join("nn.json");
    ok(&["fit", "--dataset", s(&ds), "--method", "nn", "--n-obs", "7", "--out", s(&m)]);
    let file = read_model(&m).unwrap();
    let ModelBody::Nn { training } = &file.model else { panic!("wrong kind") };
    assert_eq!(training.source_directions.len(), 7);
    assert_eq!(file.meta.observed_directions.len(), 7);
    let log = fs::read_to_string(dir.path().join("nn.losses.csv")).unwrap();
    assert_eq!(log.trim(), "step,phase,train_loss,valid_loss");
}

#[test]
fn fits_are_deterministic_and_zero_iterations_work() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulated(dir.path());
    let cfg = write(dir.path(), "fit.json", FIT);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for m in [&a, &b] {
        ok(&["fit", "--dataset", s(&ds), "--method", "gp-steerer", "--config", s(&cfg), "--out", s(m)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(dir.path().join("a.losses.csv")).unwrap(), fs::read(dir.path().join("b.losses.csv")).unwrap());
    let zero =
        write(dir.path(), "zero.json", r#"{"n_obs": 10, "gp": {"iterations": 0, "pretrain_iterations": 0, "encoding": 8, "hidden": [8]}}"#);
    let z = dir.path().join("z.json");
    ok(&["fit", "--dataset", s(&ds), "--method", "gp-steerer", "--config", s(&zero), "--out", s(&z)]);
    ok(&["evaluate", "--model", s(&z), "--dataset", s(&ds), "--out", s(&dir.path().join("rep"))]);
    let sub = dir.path().join("sub.json");
    ok(&["fit", "--dataset", s(&ds), "--method", "gp-steerer", "--config", s(&cfg), "--freq-subsample", "3", "--out", s(&sub)]);
    ok(&["evaluate", "--model", s(&sub), "--dataset", s(&ds), "--out", s(&dir.path().join("rep_sub"))]);
    let out = run(&["fit", "--dataset", s(&ds), "--method", "nn", "--freq-subsample", "2", "--out", s(&sub)]);
    assert_eq!(out.status.code(), Some(2));
}

fn csv_column(path: &Path, col: usize) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn evaluate_oracle_and_summary_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulated(dir.path());
    let m = dir.path().join("oracle.json");
    ok(&["fit", "--dataset", s(&ds), "--method", "oracle", "--out", s(&m)]);
    let rep = dir.path().join("rep");
    ok(&["evaluate", "--model", s(&m), "--dataset", s(&ds), "--out", s(&rep)]);
    assert!(csv_column(&rep.join("nmse_per_freq.csv"), 4).iter().all(|v| *v == -300.0));
    assert!(csv_column(&rep.join("csim_per_dir.csv"), 4).iter().all(|v| (v - 1.0).abs() < 1e-12));

    let cfg = write(dir.path(), "fit.json", FIT);
    let g = dir.path().join("gp.json");
    ok(&["fit", "--dataset", s(&ds), "--method", "krr", "--config", s(&cfg), "--out", s(&g)]);
    let r1 = dir.path().join("r1");
    let r2 = dir.path().join("r2");
    ok(&["evaluate", "--model", s(&g), "--dataset", s(&ds), "--out", s(&r1)]);
    ok(&["evaluate", "--model", s(&g), "--dataset", s(&ds), "--out", s(&r2)]);
    for f in ["nmse_per_freq.csv", "csim_per_dir.csv", "summary.json"] {
        assert_eq!(fs::read(r1.join(f)).unwrap(), fs::read(r2.join(f)).unwrap(), "{f}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(r1.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["median_nmse_db"].as_f64().unwrap(), median(csv_column(&r1.join("nmse_per_freq.csv"), 4)));
    assert_eq!(summary["median_csim"].as_f64().unwrap(), median(csv_column(&r1.join("csim_per_dir.csv"), 4)));
    let header = fs::read_to_string(r1.join("nmse_per_freq.csv")).unwrap();
    assert!(header.starts_with("method,n_obs,seed,freq_hz,value\nkrr,10,2,"), "{header}");
}

#[test]
fn beampattern_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulated(dir.path());
    let cfg = write(dir.path(), "fit.json", FIT);
    let m = dir.path().join("m.json");
    ok(&["fit", "--dataset", s(&ds), "--method", "gp-chmat", "--config", s(&cfg), "--out", s(&m)]);
    let bcfg = write(
        dir.path(),
        "beam.json",
        r#"{"look_directions": [{"azimuth_deg": 0, "colatitude_deg": 90}, {"azimuth_deg": 90, "colatitude_deg": 90}],
            "frequencies_hz": [1000, 3000], "scan_step_deg": 10}"#,
    );
    let out = dir.path().join("bp.csv");
    ok(&["beampattern", "--model", s(&m), "--dataset", s(&ds), "--config", s(&bcfg), "--out", s(&out)]);
    let first = fs::read(&out).unwrap();
    ok(&["beampattern", "--model", s(&m), "--dataset", s(&ds), "--config", s(&bcfg), "--out", s(&out)]);
    assert_eq!(first, fs::read(&out).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("freq_hz,azimuth_deg,gain_db,"));
    let mut sources = std::collections::BTreeSet::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        sources.insert(f[3].to_string());
        if f[1] == f[4] {
            assert_eq!(f[2].parse::<f64>().unwrap(), 0.0, "{line}");
        }
    }
    assert_eq!(sources.into_iter().collect::<Vec<_>>(), vec!["interpolated", "oracle"]);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("bp.summary.json")).unwrap()).unwrap();
    assert!(summary["max_distortionless_error"].as_f64().unwrap() <= 1e-10);
    assert_eq!(summary["records"].as_array().unwrap().len(), 8);
}
