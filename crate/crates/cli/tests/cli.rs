//! End-to-end checks of the command-line surface: exit-code taxonomy,
//! fail-fast validation, determinism of emitted data files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn spme() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spme"))
}

fn run(args: &[&str]) -> Output {
    spme().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spme-cli-test-{}-{}", tag, std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn sim_config(out: &Path, extra_solver: &str, noise: &str) -> String {
    format!(
        r#"
[grid]
a = 0.0
b = 1.0
cells = 64

[potential]
builtin = "psi1"

[solver]
eps = 0.1
dt = 0.01
t_end = 0.1
paths = 6
{extra_solver}

[noise]
modes = 4
seed = 7
weight_law = {{ kind = "inverse", scale = 0.25 }}
{noise}

[initial]
kind = "sine"
amplitude = 0.5
mode = 1

[output]
dir = "{out}"
"#,
        extra_solver = extra_solver,
        noise = noise,
        out = out.display()
    )
}

#[test]
fn convex_point_evaluation_matches_closed_form() {
    let out = run(&[
        "convex",
        "--potential",
        "psi1",
        "--op",
        "yosida",
        "--eps",
        "0.5",
        "--at",
        "1.25",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("1.25,0.5"), "got: {}", text);
}

#[test]
fn convex_conjugate_table_marks_infinity() {
    let out = run(&[
        "convex",
        "--potential",
        "psi1",
        "--op",
        "conjugate",
        "--grid",
        "-2:2:0.5",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("-2,inf"));
    assert!(text.contains("2,inf"));
    assert!(text.contains("0,0"));
}

#[test]
fn missing_arguments_exit_2() {
    let out = run(&["convex", "--op", "psi"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["convex", "--potential", "psi1", "--op", "psi"]);
    assert_eq!(out.status.code(), Some(2), "needs --grid or --at");
}

#[test]
fn malformed_config_exits_2() {
    let dir = temp_dir("badcfg");
    let cfg = write_config(&dir, "bad.toml", "this is not toml [");
    let out = run(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stability_violation_exits_3_with_diagnostics() {
    let dir = temp_dir("stab");
    let out_dir = dir.join("run");
    let body = sim_config(
        &out_dir,
        "scheme = \"semi_implicit\"",
        "multiplier = { kind = \"additive\" }",
    );
    let cfg = write_config(&dir, "cfg.toml", &body);
    let out = run(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let diag = std::fs::read_to_string(out_dir.join("diagnostics.txt")).unwrap();
    assert!(diag.contains("StabilityViolation"), "diag: {}", diag);
}

#[test]
fn simulate_is_byte_identical_across_reruns() {
    let dir = temp_dir("repro");
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let body = sim_config(out, "", "multiplier = { kind = \"additive\" }");
        let cfg = write_config(&dir, "cfg.toml", &body);
        let res = run(&["simulate", cfg.to_str().unwrap()]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for name in ["stats.csv", "summary.csv", "snapshots.csv"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{} differs between reruns", name);
    }
}

#[test]
fn zero_noise_zero_ic_gives_zero_outputs() {
    let dir = temp_dir("zeros");
    let out_dir = dir.join("run");
    let body = sim_config(&out_dir, "", "multiplier = { kind = \"additive\" }")
        .replace("kind = \"sine\"\namplitude = 0.5\nmode = 1", "kind = \"zero\"")
        .replace("scale = 0.25", "scale = 0.0");
    let cfg = write_config(&dir, "cfg.toml", &body);
    let res = run(&["simulate", cfg.to_str().unwrap()]);
    assert!(res.status.success());
    let stats = std::fs::read_to_string(out_dir.join("stats.csv")).unwrap();
    for line in stats.lines().skip(1) {
        let mean: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(mean, 0.0);
    }
}

#[test]
fn simulate_heat_fixture_matches_eigen_decay() {
    // inside (-1,1) the sign-type drift vanishes; the configured run is an
    // implicit heat evolution and E||X_t||^2 follows the eigen decay exactly
    let dir = temp_dir("heat");
    let out_dir = dir.join("run");
    let body = sim_config(&out_dir, "", "multiplier = { kind = \"additive\" }")
        .replace("eps = 0.1", "eps = 1.0")
        .replace("dt = 0.01", "dt = 0.001")
        .replace("cells = 64", "cells = 256")
        .replace("paths = 6", "paths = 1")
        .replace("scale = 0.25", "scale = 0.0");
    let cfg = write_config(&dir, "cfg.toml", &body);
    let res = run(&["simulate", cfg.to_str().unwrap()]);
    assert!(res.status.success());
    let stats = std::fs::read_to_string(out_dir.join("stats.csv")).unwrap();
    let lambda = {
        let h: f64 = 1.0 / 256.0;
        2.0 / (h * h) * (1.0 - (std::f64::consts::PI * h).cos())
    };
    for line in stats.lines().skip(1) {
        let mut cells = line.split(',');
        let t: f64 = cells.next().unwrap().parse().unwrap();
        let mean: f64 = cells.next().unwrap().parse().unwrap();
        let k = (t / 0.001).round();
        let factor = (1.0f64 / (1.0 + lambda * 0.001)).powf(k);
        let expect = 0.5 * 0.5 * 0.5 * factor * factor; // amplitude^2 * ||sin||^2
        assert!(
            (mean - expect).abs() < 1e-6,
            "at t = {}: {} vs {}",
            t,
            mean,
            expect
        );
    }
}

#[test]
fn verify_svi_trivial_candidate_passes() {
    let dir = temp_dir("svi-ok");
    let out_dir = dir.join("run");
    let body = format!(
        "{}\n[svi]\nc = 2.0\n\n[[test_process]]\nkind = \"regularized_solution\"\ninner_eps = 0.1\n",
        sim_config(&out_dir, "", "multiplier = { kind = \"additive\" }")
    );
    // candidate eps equals the test process's: X and Z coincide path by path
    let cfg = write_config(&dir, "cfg.toml", &body);
    let res = run(&["verify-svi", cfg.to_str().unwrap()]);
    assert!(
        res.status.success(),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&res.stdout),
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(out_dir.join("svi_report_0.csv").exists());
    assert!(out_dir.join("verdict.csv").exists());
}

#[test]
fn verify_svi_sabotaged_fixture_exits_4() {
    let dir = temp_dir("svi-bad");
    let out_dir = dir.join("run");
    let body = format!(
        "{}\n[svi]\nc = 0.0\n\n[[test_process]]\nkind = \"zero\"\n",
        sim_config(
            &out_dir,
            "",
            "multiplier = { kind = \"lipschitz_diagonal\", gain = 4.0, clip = 1.0 }"
        )
        .replace("eps = 0.1", "eps = 0.01")
        .replace("t_end = 0.1", "t_end = 0.3")
        .replace("paths = 6", "paths = 32")
    );
    let cfg = write_config(&dir, "cfg.toml", &body);
    let res = run(&["verify-svi", cfg.to_str().unwrap()]);
    assert_eq!(
        res.status.code(),
        Some(4),
        "stdout: {}",
        String::from_utf8_lossy(&res.stdout)
    );
}

#[test]
fn approx_demo_zero_measure_gives_zero_rows() {
    let dir = temp_dir("demo");
    let out_dir = dir.join("run");
    let res = run(&[
        "approx-demo",
        "--measure",
        "zero",
        "--n-max",
        "16",
        "--cells",
        "512",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let table = std::fs::read_to_string(out_dir.join("approx.csv")).unwrap();
    for line in table.lines().skip(1) {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells[1], 0.0);
        assert_eq!(cells[3], 0.0);
    }
}

#[test]
fn soc_stats_deterministic_and_well_formed() {
    let dir = temp_dir("soc");
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let body = format!(
            "{}\n[soc]\nthreshold = 0.4\n",
            sim_config(out, "", "multiplier = { kind = \"additive\" }")
                .replace("scale = 0.25", "scale = 1.0")
                .replace("paths = 6", "paths = 4")
        );
        let cfg = write_config(&dir, "cfg.toml", &body);
        let res = run(&["soc-stats", cfg.to_str().unwrap()]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let ev_a = std::fs::read(out_a.join("events.csv")).unwrap();
    let ev_b = std::fs::read(out_b.join("events.csv")).unwrap();
    assert_eq!(ev_a, ev_b, "event logs differ across identical reruns");
    // nonempty histogram with monotone cumulative counts
    let hist = std::fs::read_to_string(out_a.join("histogram.csv")).unwrap();
    let mut prev = 0u64;
    let mut rows = 0;
    for line in hist.lines().skip(1) {
        let cum: u64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(cum >= prev);
        prev = cum;
        rows += 1;
    }
    assert!(rows > 0, "expected a nonempty histogram");
}

#[test]
fn soc_stats_requires_psi1_and_additive_noise() {
    let dir = temp_dir("soc-pre");
    let out_dir = dir.join("run");
    let body = format!(
        "{}\n[soc]\nthreshold = 1.0\n",
        sim_config(
            &out_dir,
            "",
            "multiplier = { kind = \"lipschitz_diagonal\", gain = 1.0, clip = 1.0 }"
        )
    );
    let cfg = write_config(&dir, "cfg.toml", &body);
    let res = run(&["soc-stats", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn zero_noise_zero_ic_soc_event_log_is_empty() {
    let dir = temp_dir("soc-empty");
    let out_dir = dir.join("run");
    let body = format!(
        "{}\n[soc]\nthreshold = 1.0\n",
        sim_config(&out_dir, "", "multiplier = { kind = \"additive\" }")
            .replace("kind = \"sine\"\namplitude = 0.5\nmode = 1", "kind = \"zero\"")
            .replace("scale = 0.25", "scale = 0.0")
    );
    let cfg = write_config(&dir, "cfg.toml", &body);
    let res = run(&["soc-stats", cfg.to_str().unwrap()]);
    assert!(res.status.success());
    let events = std::fs::read_to_string(out_dir.join("events.csv")).unwrap();
    assert_eq!(events.lines().count(), 1, "only the header expected");
}

#[test]
fn output_root_override_is_honored() {
    let dir = temp_dir("envroot");
    let root = dir.join("root");
    let body = sim_config(Path::new("runs/leafname"), "", "multiplier = { kind = \"additive\" }");
    let cfg = write_config(&dir, "cfg.toml", &body);
    let res = spme()
        .args(["simulate", cfg.to_str().unwrap()])
        .env("SPME_OUT", &root)
        .output()
        .unwrap();
    assert!(res.status.success());
    assert!(root.join("leafname").join("manifest.toml").exists());
}
