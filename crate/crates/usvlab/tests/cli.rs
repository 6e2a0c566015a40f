//! End-to-end tests of the `usvlab` binary: subcommand flows, byte-stable
//! outputs, flag/env seed precedence, validation errors and exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_usvlab"))
}

fn bundled_config() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/configs/paper_nominal.json")
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("usvlab_cli_{name}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

/// A two-vessel scenario that starts exactly on the formation manifold.
const EXACT_FORMATION: &str = r#"{
  "reference": { "profile": { "tau_x0": 2.0, "amp": 0.3, "freq": 0.3 } },
  "agents": [
    {
      "parent": 0,
      "offset": { "dx": 1.0, "dy": -1.0 },
      "gains": { "kx": 0.2, "ktheta": 0.2, "kdx": 10.0, "komega": 10.0 },
      "initial_pose": { "x": 1.0, "y": -1.0, "theta": 0.0 }
    },
    {
      "parent": 1,
      "offset": { "dx": -2.0, "dy": 0.5 },
      "gains": { "kx": 0.2, "ktheta": 0.2, "kdx": 10.0, "komega": 10.0 },
      "initial_pose": { "x": -1.0, "y": -0.5, "theta": 0.0 }
    }
  ],
  "sim": { "dt": 0.001, "t_end": 5.0, "record_stride": 10 }
}"#;

#[test]
fn simulate_writes_reproducible_outputs() {
    let dir = temp_dir("simulate");
    let out1 = dir.join("a");
    let out2 = dir.join("b");
    for out in [&out1, &out2] {
        let status = bin()
            .args([
                "simulate",
                "--config",
                bundled_config(),
                "--out",
                out.to_str().unwrap(),
                "--t-end",
                "2",
                "--seed",
                "7",
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["trajectory.csv", "paths.dat", "config.json", "manifest.json"] {
        assert!(out1.join(name).exists(), "{name} missing");
    }
    for name in ["trajectory.csv", "paths.dat", "config.json"] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} not byte-identical across identical runs");
    }
    let header = std::fs::read_to_string(out1.join("trajectory.csv"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(
        header,
        "t,agent,x,y,theta,vx,vy,omega,ex,ey,etheta,vbar_y,vtilde_norm,tau_x,tau_omega"
    );

    // The manifest digest matches the stored config copy.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("manifest.json")).unwrap())
            .unwrap();
    let config_copy = std::fs::read_to_string(out1.join("config.json")).unwrap();
    assert_eq!(
        manifest["config_digest"].as_str().unwrap(),
        usvlab::output::digest_hex(&config_copy)
    );
    assert_eq!(manifest["master_seed"].as_u64().unwrap(), 7);
}

#[test]
fn simulate_exact_formation_keeps_error_columns_tiny() {
    let dir = temp_dir("exact");
    let cfg = write_config(&dir, "exact.json", EXACT_FORMATION);
    let out = dir.join("out");
    let status = bin()
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        for idx in [8, 9, 10] {
            let v: f64 = fields[idx].parse().unwrap();
            assert!(
                v.abs() <= 1e-6,
                "error column {idx} = {v} on exact-formation run"
            );
        }
    }
}

#[test]
fn montecarlo_is_reproducible_and_reports_outcomes() {
    let dir = temp_dir("mc");
    // Short horizon keeps the study quick; the noise block comes from the
    // monte_carlo section.
    let cfg_text = EXACT_FORMATION.replace(
        "\"sim\": { \"dt\": 0.001, \"t_end\": 5.0, \"record_stride\": 10 }",
        "\"sim\": { \"dt\": 0.001, \"t_end\": 5.0, \"record_stride\": 10 },\n  \"monte_carlo\": { \"runs\": 4, \"master_seed\": 7, \"noise\": { \"power\": 0.1, \"sample_time\": 0.01 } }",
    );
    let cfg = write_config(&dir, "mc.json", &cfg_text);
    let out1 = dir.join("a");
    let out2 = dir.join("b");
    for out in [&out1, &out2] {
        let status = bin()
            .args([
                "montecarlo",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--runs",
                "4",
                "--seed",
                "7",
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(out1.join("envelopes.csv")).unwrap();
    let b = std::fs::read(out2.join("envelopes.csv")).unwrap();
    assert_eq!(a, b, "envelopes.csv not byte-identical");
    assert!(out1.join("runs.json").exists());
    let runs: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("runs.json")).unwrap()).unwrap();
    assert_eq!(runs.as_array().unwrap().len(), 4);
    let header = std::fs::read_to_string(out1.join("envelopes.csv"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header, "t,agent,emin,emedian,emax");
}

#[test]
fn seed_resolution_precedence() {
    let dir = temp_dir("seed");
    let cfg = write_config(&dir, "exact.json", EXACT_FORMATION);

    // Environment seed applies when no flag is given.
    let out_env = dir.join("env");
    let status = bin()
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_env.to_str().unwrap(),
            "--t-end",
            "1",
        ])
        .env("USVLAB_SEED", "123")
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_env.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["master_seed"].as_u64().unwrap(), 123);

    // The flag beats the environment.
    let out_flag = dir.join("flag");
    let status = bin()
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_flag.to_str().unwrap(),
            "--t-end",
            "1",
            "--seed",
            "9",
        ])
        .env("USVLAB_SEED", "123")
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_flag.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["master_seed"].as_u64().unwrap(), 9);
}

#[test]
fn invalid_topology_exits_one_with_field() {
    let dir = temp_dir("badtopo");
    let bad = EXACT_FORMATION.replace("\"parent\": 1", "\"parent\": 2");
    let cfg = write_config(&dir, "bad.json", &bad);
    let output = bin()
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("parent"), "stderr was: {stderr}");
}

#[test]
fn usage_error_names_the_flag() {
    let output = bin()
        .args(["simulate", "--config", bundled_config(), "--bogus", "1"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("--bogus"), "stderr was: {stderr}");
}

#[test]
fn divergence_exits_two() {
    let dir = temp_dir("diverge");
    // An absurd damping injection makes the explicit integrator unstable;
    // the run must report divergence, not crash.
    let stiff = EXACT_FORMATION.replace("\"kdx\": 10.0", "\"kdx\": 1e12");
    let cfg = write_config(&dir, "stiff.json", &stiff);
    let output = bin()
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("diverged"), "stderr was: {stderr}");
}

#[test]
fn check_gains_reports_bundled_scenario() {
    let dir = temp_dir("gains");
    let out = dir.join("report");
    let output = bin()
        .args([
            "check-gains",
            "--config",
            bundled_config(),
            "--kx-grid",
            "0.01:0.2:5",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let report_path = out.join("stability_report.json");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["verdicts"]["bound_ok"], true);
    assert_eq!(report["verdicts"]["pe_ok"], true);
    assert_eq!(report["verdicts"]["kdx_ok"], true);
    assert_eq!(report["kx_grid"].as_array().unwrap().len(), 5);
    let wb = report["pe"]["omega_bar_d"].as_f64().unwrap();
    assert!((wb - 0.355).abs() < 0.05 * 0.355);
    // The expression values are reported on the grid, smallest kx first.
    let first = &report["kx_grid"][0];
    assert!(first["product"].as_f64().unwrap() < 1.0);
}

#[test]
fn analyze_replays_a_stored_run() {
    let dir = temp_dir("analyze");
    let out = dir.join("run");
    let status = bin()
        .args([
            "simulate",
            "--config",
            bundled_config(),
            "--out",
            out.to_str().unwrap(),
            "--t-end",
            "50",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let output = bin()
        .args([
            "analyze",
            "--trajectory",
            out.join("trajectory.csv").to_str().unwrap(),
            "--config",
            bundled_config(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("pe: mu ="), "stdout was: {stdout}");
    assert!(stdout.contains("W1 sandwich violations = 0"), "stdout was: {stdout}");
}
