use std::path::Path;
use std::process::{Command, Output};

use avsfe::analysis::export::{read_line_csv, read_records_csv};

fn avsfe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_avsfe"))
        .args(args)
        .env_remove("AVSFE_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("study.cfg");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = "[scenario]\nname = checkerboard\npe = 100\nmask = LR,UL\n\n[mesh]\nkind = graded\nnx = 4\nny = 4\nratio = 0.5\n\n[discretization]\np = 2\nrefinements = 1\n\n[output]\nline_samples = 50\n";

#[test]
fn list_scenarios_names_every_scenario() {
    let out = avsfe(&["list-scenarios"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["manufactured (§3.1)", "homogeneous (§3.2)", "checkerboard (§3.3)", "variable_convection (§3.4)"] {
        assert!(text.contains(name), "{name} missing from:\n{text}");
    }
}

#[test]
fn misspelled_key_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[scenario]\nname = manufactured\npeclet_numbr = 10\n");
    let out = avsfe(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("unknown key 'peclet_numbr'"), "{err}");
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = avsfe(&["run", "--config", "/nonexistent/study.cfg"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_thread_env_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_avsfe"))
        .args(["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()])
        .env("AVSFE_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = avsfe(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let records = read_records_csv(&out_dir.join("records.csv")).unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0].dofs, 243);
    assert_eq!(records[1].dofs, 867);
    assert!(records.iter().all(|r| r.err_l2_u.is_nan() && r.eta.is_finite() && r.eta > 0.0));
    // No exact solution, so no flux comparison.
    assert!(!out_dir.join("flux_comparison.csv").exists());

    let line = read_line_csv(&out_dir.join("line_level1.csv")).unwrap();
    assert_eq!(line.len(), 51);
    assert_eq!(line.points[0], [0.0, 0.0]);
    assert_eq!(line.points[50], [1.0, 1.0]);
    assert!(line.u[0].abs() < 1e-12 && line.u[50].abs() < 1e-12);

    let vtk = std::fs::read_to_string(out_dir.join("solution_level0.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"));
    assert!(vtk.contains("POINTS 81 double"));
    assert!(vtk.contains("CELLS 64 320"));
    let log = std::fs::read_to_string(out_dir.join("run.log")).unwrap();
    assert!(log.contains("threads=2"), "{log}");
}

#[test]
fn deterministic_reruns_are_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut csvs = Vec::new();
    for (run, threads) in [("a", "1"), ("b", "4")] {
        let out_dir = dir.path().join(run);
        let out = avsfe(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--deterministic", "--threads", threads]);
        assert!(out.status.success());
        csvs.push((
            std::fs::read(out_dir.join("records.csv")).unwrap(),
            std::fs::read(out_dir.join("line_level1.csv")).unwrap(),
            std::fs::read(out_dir.join("solution_level1.vtk")).unwrap(),
        ));
    }
    assert!(csvs[0] == csvs[1]);
}

#[test]
fn max_refine_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = avsfe(&["paper-suite", "--max-refine", "0", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for label in ["convergence_p1", "convergence_p4", "homo_pe1e6", "unstructured_pe400", "checkerboard_pe1e4", "shock_pe1e9"] {
        let records = read_records_csv(&dir.path().join(label).join("records.csv")).unwrap();
        assert_eq!(records.len(), 1, "{label}");
    }
    let unstructured = read_records_csv(&dir.path().join("unstructured_pe400/records.csv")).unwrap();
    assert_eq!(unstructured[0].dofs, 27);
}
