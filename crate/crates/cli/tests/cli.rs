use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn crsvm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crsvm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn crsvm")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Asserts failure with exactly one stderr line of the form `error[class]: ...`.
fn fails_with(out: &Output, class: &str) {
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {err}");
    assert!(lines[0].starts_with(&format!("error[{class}]: ")), "stderr: {err}");
}

fn datagen(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let out = crsvm(
        &["datagen", "--n", &n.to_string(), "--p", "12", "--seed", &seed.to_string(), "--out", name],
        dir,
    );
    ok(&out);
    dir.join(name)
}

const FAST: &[&str] = &["--lambda1", "0.05", "--max-iter", "300"];

fn train(dir: &Path, data: &str, model: &str, extra: &[&str]) -> Value {
    let mut args = vec!["train", "--data", data, "--model-out", model];
    for pair in FAST.chunks(2) {
        if !extra.contains(&pair[0]) {
            args.extend_from_slice(pair);
        }
    }
    args.extend_from_slice(extra);
    let out = crsvm(&args, dir);
    ok(&out);
    serde_json::from_slice(&out.stdout).expect("metrics json")
}

#[test]
fn datagen_is_deterministic_and_records_manifest() {
    let dir = TempDir::new().unwrap();
    let a = crsvm(&["datagen", "--n", "1000", "--p", "50", "--rho", "0.5", "--seed", "7", "--out", "a.csv"], dir.path());
    let b = crsvm(&["datagen", "--n", "1000", "--p", "50", "--rho", "0.5", "--seed", "7", "--out", "b.csv"], dir.path());
    ok(&a);
    ok(&b);
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["spec"]["alpha"], 0.2);
    assert_eq!(manifest["spec"]["seed"], 7);
}

#[test]
fn datagen_rejects_small_p() {
    let dir = TempDir::new().unwrap();
    fails_with(&crsvm(&["datagen", "--p", "5", "--out", "x.csv"], dir.path()), "invalid-argument");
}

#[test]
fn training_is_reproducible() {
    let dir = TempDir::new().unwrap();
    datagen(dir.path(), "d.csv", 200, 1);
    let m = train(dir.path(), "d.csv", "m1.json", &["--K", "2", "--seed", "3"]);
    train(dir.path(), "d.csv", "m2.json", &["--K", "2", "--seed", "3"]);
    assert_eq!(
        fs::read(dir.path().join("m1.json")).unwrap(),
        fs::read(dir.path().join("m2.json")).unwrap()
    );
    assert_eq!(m["schema_version"], 1);
    let car = m["car"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&car));
    for key in ["ct", "ni", "sparsity", "residuals"] {
        assert!(m.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn group_structure_requires_a_group_map() {
    let dir = TempDir::new().unwrap();
    datagen(dir.path(), "d.csv", 100, 1);
    let out = crsvm(&["train", "--data", "d.csv", "--structure", "sgl", "--model-out", "m.json"], dir.path());
    fails_with(&out, "config");
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn group_training_reports_group_norms() {
    let dir = TempDir::new().unwrap();
    datagen(dir.path(), "d.csv", 200, 2);
    fs::write(
        dir.path().join("g.toml"),
        "[[group]]\nname = \"a\"\ncolumns = [\"x1\", \"x2\", \"x3\", \"x4\", \"x5\", \"x6\", \"x7\", \"x8\", \"x9\", \"x10\"]\n\n[[group]]\nname = \"b\"\nrest = true\n",
    )
    .unwrap();
    let m = train(dir.path(), "d.csv", "m.json", &["--structure", "sgl", "--groups", "g.toml"]);
    let norms = m["group_norms"].as_array().expect("group norms");
    assert_eq!(norms.len(), 2);
}

#[test]
fn predict_matches_saved_model_and_reports_car() {
    let dir = TempDir::new().unwrap();
    datagen(dir.path(), "d.csv", 200, 4);
    train(dir.path(), "d.csv", "m.json", &[]);
    let out = crsvm(&["predict", "--model-in", "m.json", "--data", "d.csv", "--out", "p1.csv"], dir.path());
    ok(&out);
    let metrics: Value = serde_json::from_slice(&out.stderr).expect("car json on stderr");
    assert_eq!(metrics["n"], 200);

    // a model re-serialised by the library predicts identically
    let model = crsvm_core::ModelFile::load(dir.path().join("m.json")).unwrap();
    model.save(dir.path().join("m2.json")).unwrap();
    ok(&crsvm(&["predict", "--model-in", "m2.json", "--data", "d.csv", "--out", "p2.csv"], dir.path()));
    assert_eq!(
        fs::read(dir.path().join("p1.csv")).unwrap(),
        fs::read(dir.path().join("p2.csv")).unwrap()
    );
    let rows = fs::read_to_string(dir.path().join("p1.csv")).unwrap();
    assert_eq!(rows.lines().count(), 201);
}

#[test]
fn unlabeled_input_gives_scores_only() {
    let dir = TempDir::new().unwrap();
    datagen(dir.path(), "d.csv", 100, 5);
    train(dir.path(), "d.csv", "m.json", &[]);
    let text = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let stripped: String = text
        .lines()
        .map(|l| l.split_once(',').unwrap().1.to_owned() + "\n")
        .collect();
    fs::write(dir.path().join("u.csv"), stripped).unwrap();
    let out = crsvm(&["predict", "--model-in", "m.json", "--data", "u.csv"], dir.path());
    ok(&out);
    assert!(out.stderr.is_empty());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 101);
}

#[test]
fn zero_model_predicts_a_constant() {
    let dir = TempDir::new().unwrap();
    datagen(dir.path(), "d.csv", 100, 6);
    let m = train(dir.path(), "d.csv", "m.json", &["--lambda1", "1000"]);
    assert_eq!(m["support_size"], 0);
    let out = crsvm(&["predict", "--model-in", "m.json", "--data", "d.csv"], dir.path());
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    let scores: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn tune_reports_every_cell() {
    let dir = TempDir::new().unwrap();
    datagen(dir.path(), "d.csv", 150, 8);
    fs::write(dir.path().join("grid.toml"), "[grid]\nlambda1 = [0.1, 0.02]\nlambda2 = [0.0, 0.01]\nmu0 = [1.0]\n").unwrap();
    let out = crsvm(
        &["tune", "--data", "d.csv", "--config", "grid.toml", "--model-out", "m.json", "--max-iter", "200"],
        dir.path(),
    );
    ok(&out);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 4);
    let best = &report["best"];
    let min = report["cells"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["svmic"].as_f64().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(best["svmic"].as_f64().unwrap(), min);
    assert!(dir.path().join("m.json").exists());
}

#[test]
fn tune_single_cell_matches_train() {
    let dir = TempDir::new().unwrap();
    datagen(dir.path(), "d.csv", 150, 9);
    fs::write(dir.path().join("grid.toml"), "[grid]\nlambda1 = [0.05]\nlambda2 = [0.01]\nmu0 = [1.0]\n").unwrap();
    ok(&crsvm(
        &["tune", "--data", "d.csv", "--config", "grid.toml", "--model-out", "t.json", "--max-iter", "300"],
        dir.path(),
    ));
    train(dir.path(), "d.csv", "m.json", &[]);
    let t = crsvm_core::ModelFile::load(dir.path().join("t.json")).unwrap();
    let m = crsvm_core::ModelFile::load(dir.path().join("m.json")).unwrap();
    assert_eq!(t.coefficients, m.coefficients);
    assert_eq!(t.intercept, m.intercept);
}

#[test]
fn bench_single_row() {
    let dir = TempDir::new().unwrap();
    let out = crsvm(
        &["bench", "--n", "200", "--p", "12", "--K", "1", "--repeats", "1", "--test-n", "500", "--max-iter", "300"],
        dir.path(),
    );
    ok(&out);
    let rows: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 1);
    let out = crsvm(
        &["bench", "--n", "200", "--p", "12", "--K", "1,2", "--test-n", "500", "--max-iter", "100", "--csv"],
        dir.path(),
    );
    ok(&out);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
}

#[test]
fn errors_are_single_line() {
    let dir = TempDir::new().unwrap();
    fails_with(&crsvm(&["train", "--data", "missing.csv", "--model-out", "m.json"], dir.path()), "io");
    fails_with(&crsvm(&["train", "--no-such-flag"], dir.path()), "usage");
    datagen(dir.path(), "d.csv", 50, 1);
    fails_with(
        &crsvm(&["train", "--data", "d.csv", "--model-out", "m.json", "--nu", "1.5"], dir.path()),
        "config",
    );
    fails_with(
        &crsvm(&["train", "--data", "d.csv", "--model-out", "m.json", "--K", "1,2"], dir.path()),
        "invalid-argument",
    );
}
