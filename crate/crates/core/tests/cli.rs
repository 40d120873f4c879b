use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strain-tc"))
        .args(args)
        .env_remove("STRAIN_TC_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn pre_rows(path: &Path) -> Vec<(String, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            (cols[0].to_string(), cols[1].parse().unwrap())
        })
        .collect()
}

#[test]
fn synth_then_fit_round_trip_has_zero_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path();
    run_ok(&["--out-dir", s(out), "synth", "--preset", "A", "--width", "24", "--height", "24"]);
    for f in ["incremental.stack", "cumulative.stack", "tau_truth.csv", "tau_truth.pgm", "phantom.cfg", "manifest.txt"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let fit_dir = TempDir::new().unwrap();
    let cumulative = out.join("cumulative.stack");
    run_ok(&[
        "--out-dir",
        s(fit_dir.path()),
        "fit",
        "--input",
        s(&cumulative),
        "--preset",
        "A",
        "--width",
        "24",
        "--height",
        "24",
    ]);
    let rows = pre_rows(&fit_dir.path().join("pre.csv"));
    assert_eq!(rows.len(), 3);
    for (region, pre) in rows {
        assert!(pre.abs() < 1e-4, "{region}: PRE {pre}");
    }
    assert!(fit_dir.path().join("tc_map.pgm").is_file());
    assert!(fit_dir.path().join("converged.csv").is_file());
}

#[test]
fn degrade_reconstruct_fit_pipeline() {
    let dir = TempDir::new().unwrap();
    let out = dir.path();
    run_ok(&["--out-dir", s(out), "synth", "--preset", "B", "--width", "16", "--height", "16"]);
    run_ok(&[
        "--out-dir",
        s(out),
        "degrade",
        "--input",
        s(&out.join("incremental.stack")),
        "--snr-db",
        "60",
        "--good-fraction",
        "0.75",
        "--seed",
        "5",
    ]);
    let mask = fs::read_to_string(out.join("mask.csv")).unwrap();
    assert_eq!(mask.lines().filter(|l| l.contains(",bad,")).count(), 75);

    // The spline method needs to know which frames are bad.
    let no_mask = run(&["--out-dir", s(out), "reconstruct", "--input", s(&out.join("degraded.stack"))]);
    assert_eq!(no_mask.status.code(), Some(1));

    for method in ["spline", "kalman"] {
        run_ok(&[
            "--out-dir",
            s(out),
            "reconstruct",
            "--input",
            s(&out.join("degraded.stack")),
            "--mask",
            s(&out.join("mask.csv")),
            "--method",
            method,
        ]);
        assert!(out.join(format!("{method}_cumulative.stack")).is_file());
    }
    let fit_dir = TempDir::new().unwrap();
    run_ok(&[
        "--out-dir",
        s(fit_dir.path()),
        "fit",
        "--input",
        s(&out.join("spline.stack")),
        "--preset",
        "B",
        "--width",
        "16",
        "--height",
        "16",
    ]);
    let rows = pre_rows(&fit_dir.path().join("pre.csv"));
    let inclusion = rows.iter().find(|(r, _)| r == "inclusion").unwrap().1;
    assert!(inclusion.abs() < 10.0, "inclusion PRE {inclusion}");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path();
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["synth"]).status.code(), Some(1), "missing out dir");
    assert_eq!(run(&["--out-dir", "/nonexistent/strain-tc", "synth"]).status.code(), Some(1));
    assert_eq!(run(&["--out-dir", s(out), "synth", "--preset", "Z"]).status.code(), Some(1));
    assert_eq!(run(&["--out-dir", s(out), "fit", "--input", s(&out.join("nope.stack"))]).status.code(), Some(1));

    run_ok(&["--out-dir", s(out), "synth", "--width", "8", "--height", "8"]);
    let starved = run(&[
        "--out-dir",
        s(out),
        "degrade",
        "--input",
        s(&out.join("incremental.stack")),
        "--good-fraction",
        "0.005",
    ]);
    assert_eq!(starved.status.code(), Some(2), "{}", String::from_utf8_lossy(&starved.stderr));
}

#[test]
fn out_dir_from_environment() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_strain-tc"))
        .args(["synth", "--width", "8", "--height", "8"])
        .env("STRAIN_TC_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("cumulative.stack").is_file());
}

#[test]
fn demo_writes_curves() {
    let dir = TempDir::new().unwrap();
    run_ok(&["--out-dir", s(dir.path()), "demo", "--width", "16", "--height", "16"]);
    let curves = fs::read_to_string(dir.path().join("demo_curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 301);
    assert!(curves.starts_with("time_s,label,clean,clean_fit,noisy,noisy_fit,kalman,kalman_fit,spline,spline_fit"));
    let fits = fs::read_to_string(dir.path().join("demo_fits.csv")).unwrap();
    let clean: Vec<&str> = fits.lines().nth(1).unwrap().split(',').collect();
    let (tau, truth): (f64, f64) = (clean[3].parse().unwrap(), clean[4].parse().unwrap());
    assert!((tau - truth).abs() / truth < 1e-4, "clean tau {tau} vs {truth}");
}

#[test]
fn grid_manifest_rerun_is_byte_identical() {
    let first = TempDir::new().unwrap();
    run_ok(&[
        "--out-dir",
        s(first.path()),
        "grid",
        "--sample",
        "C",
        "--snr-db",
        "40",
        "--good-fraction",
        "0.5",
        "--trials",
        "2",
        "--size",
        "12",
        "--emit-maps",
    ]);
    let second = TempDir::new().unwrap();
    run_ok(&["--manifest", s(&first.path().join("manifest.txt")), "--out-dir", s(second.path())]);
    for f in ["grid.csv", "grid_table.txt", "maps/C_spline_snr40_pgf50_tau.csv"] {
        let a = fs::read(first.path().join(f)).unwrap();
        let b = fs::read(second.path().join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}
