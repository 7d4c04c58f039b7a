use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fluxlim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxlim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn gamma_prints_window() {
    let out = fluxlim(&["gamma", "--n", "3", "--alpha", "0.2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("(0.266667, 0.444444)"), "{text}");
    assert!(text.contains("ODI exponents"), "{text}");
}

#[test]
fn gamma_reports_empty_window() {
    let out = fluxlim(&["gamma", "--n", "3", "--alpha", "0.3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("empty (alpha ≥ critical 0.25)"));
}

#[test]
fn negative_alpha_is_accepted() {
    let out = fluxlim(&["gamma", "--n", "4", "--alpha", "-0.5"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let out = fluxlim(&["gamma", "--n", "3", "--alpha", "0.2", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(fluxlim(&[]).status.code(), Some(1));
    assert_eq!(
        fluxlim(&["gamma", "--n", "1", "--alpha", "0.2"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        fluxlim(&["validate", "--suite", "nope"]).status.code(),
        Some(1)
    );
}

#[test]
fn help_and_version_exit_zero() {
    let out = fluxlim(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("simulate"));
    let out = fluxlim(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn validate_window_suite_passes() {
    let out = fluxlim(&["validate", "--suite", "window"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("violations=0"));
}

#[test]
fn crosscheck_reduces_discrepancy() {
    let out = fluxlim(&["crosscheck", "--cells", "32,64,128"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("reduction per refinement"));
}

const UNIFORM_RUN: &str = r#"
label = "uniform"
[model]
n = 3
alpha = 0.2
[grid]
cells = 128
[profile]
kind = "uniform"
[controls]
t_end = 0.1
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn simulate_writes_reproducible_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.toml", UNIFORM_RUN);
    let mut dirs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = tmp.path().join(name);
        let out = fluxlim(&[
            "simulate",
            "--config",
            &cfg,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
        assert!(stdout(&out).contains("completed_horizon"));
        dirs.push(out_dir);
    }
    let series = fs::read_to_string(dirs[0].join("series.csv")).unwrap();
    assert!(series.starts_with("t,sup_u,mass,min_z,dt,phi,psi\n"));
    let snap = fs::read_to_string(dirs[0].join("snapshots/snap_0000.csv")).unwrap();
    assert!(snap.starts_with("s,w,z,u\n"));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dirs[0].join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["label"], "uniform");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["version"].as_str().unwrap().starts_with('v'));
    for file in manifest["files"].as_array().unwrap() {
        let name = file.as_str().unwrap();
        let a = fs::read(dirs[0].join(name)).unwrap();
        let b = fs::read(dirs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    assert_eq!(
        fs::read(dirs[0].join("manifest.json")).unwrap(),
        fs::read(dirs[1].join("manifest.json")).unwrap()
    );
}

#[test]
fn output_root_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.toml", UNIFORM_RUN);
    let out = Command::new(env!("CARGO_BIN_EXE_fluxlim"))
        .args(["simulate", "--config", &cfg])
        .env("FLUXLIM_OUT", tmp.path().join("root"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("root/uniform/manifest.json").exists());
}

#[test]
fn bad_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[model]\nn = 3\nbogus = 1\n");
    let out = fluxlim(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let missing = tmp.path().join("missing.toml");
    let out = fluxlim(&["simulate", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));
}

#[test]
fn sweep_over_uniform_data_is_bounded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "sweep.toml",
        r#"
label = "flat"
grids = [64, 128]
[model]
n = 3
[alphas]
mode = "list"
values = [0.1, 0.45]
[profile]
kind = "uniform"
[controls]
t_end = 0.05
"#,
    );
    let out_dir = tmp.path().join("sweep");
    let out = fluxlim(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert_eq!(text.matches("bounded").count(), 2, "{text}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 2);
    assert!(out_dir.join("manifest.json").exists());
}
