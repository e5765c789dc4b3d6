//! End-to-end runs of the `fracsob` binary: exit codes, outputs, config precedence.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

use fracsob::{io, shapes};

fn fracsob(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracsob"))
        .current_dir(dir)
        .env_remove("FRACSOB_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())))
        .unwrap()
}

fn write_curve(dir: &Path, name: &str, m: &nalgebra::DMatrix<f64>) -> String {
    let p = dir.join(name);
    io::write_curve(&p, m).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn missing_order_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("run.json"), r#"{"metric": {"family": "bessel_fractional", "alphas": [1.0]}}"#)
        .unwrap();
    let out = fracsob(dir.path(), &["check", "--config", "run.json", "--no-dynamics"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("metric") && err.contains("`r`"), "{err}");
}

#[test]
fn unknown_flag_and_bad_grid_are_config_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&fracsob(dir.path(), &["check", "--bogus"])), 1);
    assert_eq!(code(&fracsob(dir.path(), &["check", "--n", "7", "--no-dynamics"])), 1);
    assert_eq!(code(&fracsob(dir.path(), &["--help"])), 0);
}

#[test]
fn exp_conserves_energy_and_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let curve = write_curve(dir.path(), "c0.json", &shapes::ellipse(64, 1.0, 0.6));
    let velocity = write_curve(dir.path(), "h0.json", &shapes::random_field(&mut rng, 64, 2, 4, 0.2, true));
    let out = fracsob(
        dir.path(),
        &["exp", "--curve", &curve, "--velocity", &velocity, "--steps", "40", "--out", "run", "--formats", "csv,json,svg"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(dir.path().join("run/conservation.json"));
    assert!(report["max_relative_drift"].as_f64().unwrap() <= 1e-6, "{report}");
    for f in ["path.csv", "path.json", "path.svg"] {
        assert!(dir.path().join("run").join(f).exists(), "{f}");
    }
}

#[test]
fn match_identical_curves_needs_no_iterations() {
    let dir = TempDir::new().unwrap();
    let c = write_curve(dir.path(), "c.json", &shapes::ellipse(32, 1.0, 0.5));
    let out = fracsob(dir.path(), &["match", "--source", &c, "--target", &c, "--family", "constant_coefficient", "--alphas", "1,1", "--out", "m"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(dir.path().join("m/shooting.json"));
    assert_eq!(report["residual"].as_f64(), Some(0.0));
}

#[test]
fn match_circle_to_rotated_scaled_circle_converges() {
    let dir = TempDir::new().unwrap();
    let c0 = shapes::circle(32, 1.0);
    let source = write_curve(dir.path(), "c0.json", &c0);
    let target = write_curve(dir.path(), "c1.json", &shapes::rotate_scale(&c0, 0.4, 1.2));
    let out = fracsob(
        dir.path(),
        &["match", "--source", &source, "--target", &target, "--family", "constant_coefficient", "--alphas", "1,1", "--out", "m"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let report = read_json(dir.path().join("m/shooting.json"));
    // exit 0 already means the relative endpoint tolerance was met; |c1| is O(1) here
    assert!(report["residual"].as_f64().unwrap() < 1e-6, "{report}");
    assert!(report["iterations"].as_u64().unwrap() >= 1);
}

#[test]
fn degenerate_symbol_fails_the_check() {
    let dir = TempDir::new().unwrap();
    let out = fracsob(
        dir.path(),
        &["check", "--family", "two_term_fractional", "--r", "1.25", "--alphas", "0,1", "--no-dynamics", "--out", "ck"],
    );
    assert_eq!(code(&out), 3);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("[FAIL]") && l.contains("elliptic")), "{stdout}");
}

#[test]
fn integer_family_check_runs_the_closed_form_oracle() {
    let dir = TempDir::new().unwrap();
    let out = fracsob(dir.path(), &["check", "--family", "constant_coefficient", "--alphas", "1,1", "--no-dynamics", "--out", "ck"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("[pass]") && l.contains("integer oracle")), "{stdout}");
}

#[test]
fn default_check_passes_and_records_seed_from_environment() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fracsob"))
        .current_dir(dir.path())
        .env("FRACSOB_SEED", "77")
        .args(["check", "--out", "ck"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(read_json(dir.path().join("ck/check.json"))["seed"].as_u64(), Some(77));

    // the flag beats the environment
    let out = Command::new(env!("CARGO_BIN_EXE_fracsob"))
        .current_dir(dir.path())
        .env("FRACSOB_SEED", "77")
        .args(["check", "--seed", "5", "--no-dynamics", "--out", "ck"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(read_json(dir.path().join("ck/check.json"))["seed"].as_u64(), Some(5));
}

#[test]
fn symbols_writes_tables() {
    let dir = TempDir::new().unwrap();
    let out = fracsob(dir.path(), &["symbols", "--r", "0.8", "--lambdas", "1,6.5", "--max-mode", "16", "--out", "s"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let tables = read_json(dir.path().join("s/symbols.json"));
    assert_eq!(tables["tables"].as_array().unwrap().len(), 2);
    assert_eq!(tables["tables"][0]["entries"].as_array().unwrap().len(), 17);
    let csv = std::fs::read_to_string(dir.path().join("s/symbols.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 17);
}

#[test]
fn flags_override_the_config_file() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"metric": {"family": "bessel_fractional", "r": 1.5, "alphas": [1.0]}, "io": {"out_dir": "from-config"}, "seed": 9}"#,
    )
    .unwrap();
    let out = fracsob(dir.path(), &["check", "--config", "run.json", "--r", "0.8", "--no-dynamics"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let report = read_json(dir.path().join("from-config/check.json"));
    assert_eq!(report["order"].as_f64(), Some(0.8));
    assert_eq!(report["seed"].as_u64(), Some(9));
}
