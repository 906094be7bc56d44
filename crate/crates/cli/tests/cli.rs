use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_spreadlab");

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(format!("{name}.toml"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn speed_prints_the_canonical_minimum() {
    let out = scratch("speed");
    let cfg = preset("canonical-h1h2");
    let stdout = run_ok(&["speed", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(stdout.contains("c0* = 1.78885, mu* = 0.89443"), "{stdout}");
    let csv = fs::read_to_string(out.join("canonical-h1h2/dispersion.csv")).unwrap();
    assert!(csv.starts_with("mu,lambda,lambda_over_mu\n"));
    assert_eq!(csv.lines().count(), 101);
}

#[test]
fn grid_only_scan_agrees_with_refinement() {
    let cfg = preset("canonical-h1h2");
    let value = |extra: &[&str], tag: &str| {
        let out = scratch(tag);
        let mut args = vec!["speed", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        run_ok(&args);
        json(&out.join("canonical-h1h2/speed.json"))["estimate"]["value"].as_f64().unwrap()
    };
    let refined = value(&[], "grid-refined");
    let coarse = value(&["--mu-grid-only"], "grid-only");
    assert!((refined - coarse).abs() < 1e-3, "{refined} vs {coarse}");
    assert!(coarse >= refined);
}

#[test]
fn violated_hypothesis_exits_with_precondition_code() {
    let dir = scratch("h1");
    let text = fs::read_to_string(preset("continuity-sweep")).unwrap().replace("a2 = { constant = 0.4 }", "a2 = { constant = 2.5 }");
    let cfg = dir.join("bad.toml");
    fs::write(&cfg, text).unwrap();
    let out = run(&["speed", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("a1L > c1M*a2M/c2L"), "{err}");
}

#[test]
fn unknown_keys_are_config_errors() {
    let dir = scratch("unknown");
    let text = fs::read_to_string(preset("continuity-sweep")).unwrap().replace("[scheme]\n", "[scheme]\nsubsteps = 4\n");
    let cfg = dir.join("bad.toml");
    fs::write(&cfg, text).unwrap();
    let out = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_one_row_per_shift() {
    let out = scratch("sweep");
    let cfg = preset("continuity-sweep");
    run_ok(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "2"]);
    let csv = fs::read_to_string(out.join("continuity-sweep/sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    for (row, eps) in rows.iter().zip([0.2, 0.1, 0.05]) {
        assert_eq!(row[0], eps);
        assert!((row[1] - 2.0 * (0.8f64 + eps).sqrt()).abs() < 1e-4);
    }
}

#[test]
fn weak_competition_persists() {
    let out = scratch("persistence");
    let cfg = preset("weak-persistence");
    run_ok(&["persistence", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let report = json(&out.join("weak-persistence/persistence.json"));
    assert!(report["eta"].as_f64().unwrap() > 0.6, "{report}");
    assert!(report["failures"].as_array().unwrap().is_empty());
}

#[test]
fn outputs_are_deterministic_and_reproducible_from_the_manifest() {
    let cfg = preset("weak-persistence");
    let (a, b, c) = (scratch("det-a"), scratch("det-b"), scratch("det-c"));
    for dir in [&a, &b] {
        run_ok(&["persistence", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    }
    let first = files(&a.join("weak-persistence"));
    assert_eq!(first, files(&b.join("weak-persistence")));
    assert_eq!(first.len(), 3);
    let manifest = a.join("weak-persistence/manifest.json");
    let m = json(&manifest);
    assert_eq!(m["files"].as_array().unwrap().len(), 2);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    run_ok(&["persistence", "--config", manifest.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert_eq!(first, files(&c.join("weak-persistence")));
}

#[test]
fn periods_override_is_recorded() {
    let out = scratch("periods");
    let cfg = preset("weak-persistence");
    run_ok(&["persistence", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--periods", "500"]);
    let m = json(&out.join("weak-persistence/manifest.json"));
    assert_eq!(m["config"]["scenario"]["periods"], 500);
}
