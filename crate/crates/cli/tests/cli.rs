use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn plap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exponents_table() {
    let o = plap(&["exponents", "--p", "3", "--q", "2", "--N", "1"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("q_star     2.500000000000"));
    assert!(s.contains("CriticalAbsorption"));

    let s = stdout(&plap(&["exponents", "--p", "3", "--q", "2.25"]));
    assert!(s.contains("A          0.166666666667"));
    assert!(s.contains("B          0.333333333333"));
}

#[test]
fn exponents_rejects_p_two() {
    let o = plap(&["exponents", "--p", "2", "--q", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("p > 2"));
}

const SHORT_RUN: &str = "q = 2\neps = 1e-3\nprofile = bump:R0=1,H=1,m=2\nh = 0.02\nt_end = 4\n";

#[test]
fn run_writes_series_that_fit_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, format!("p = 3\n{SHORT_RUN}")).unwrap();
    let out = dir.path().join("out");
    let o = plap(&["run", "--config", path(&cfg), "--out", path(&out)]);
    assert!(matches!(o.status.code(), Some(0 | 4)), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(report["regime"], "CriticalAbsorption");
    assert!(report["mass_residual"].as_f64().unwrap() <= 1e-3);
    assert!(out.join("series.csv").exists());
    assert!(out.join("report.json").exists());

    let o = plap(&["fit", "--config", path(&cfg), "--series", path(&out.join("series.csv"))]);
    assert!(matches!(o.status.code(), Some(0 | 4)), "{}", stderr(&o));
    for line in stdout(&o).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["quantity"].is_string());
    }
}

#[test]
fn pure_diffusion_run_conserves_mass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "p = 3\nq = 2\nprofile = barenblatt:t0=1\nabsorption = off\nh = 0.02\nt_end = 2\n",
    )
    .unwrap();
    let o = plap(&["run", "--config", path(&cfg), "--out", path(dir.path())]);
    let report: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(report["mass_residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn overflow_exits_numerical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, format!("p = 3\n{SHORT_RUN}L = 1.1\n")).unwrap();
    let o = plap(&["run", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("support"));
}

#[test]
fn bad_config_exits_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "p = 3\nq = 2\ncolour = red\n").unwrap();
    let o = plap(&["run", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

fn sweep_summary(workers: &str, dir: &Path) -> String {
    let cfg = dir.join("sweep.cfg");
    fs::write(&cfg, format!("cells = 3:2.25, 3:2, 3.2:2\n{SHORT_RUN}").replace("q = 2\n", "")).unwrap();
    let out = dir.join(format!("out{workers}"));
    let o = plap(&["sweep", "--config", path(&cfg), "--workers", workers, "--out", path(&out)]);
    assert!(matches!(o.status.code(), Some(0 | 4)), "{}", stderr(&o));
    for stem in ["cell_p3_q2", "cell_p3_q2.25", "cell_p3.2_q2"] {
        assert!(out.join(format!("{stem}.json")).exists(), "{stem}");
        assert!(out.join(format!("{stem}.csv")).exists(), "{stem}");
    }
    fs::read_to_string(out.join("summary.csv")).unwrap()
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let one = sweep_summary("1", dir.path());
    let four = sweep_summary("4", dir.path());
    assert_eq!(one, four);
    let rows: Vec<&str> = one.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("3,2,"));
    assert!(rows[1].starts_with("3,2.25,Intermediate"));
}

#[test]
fn sweep_rejects_duplicate_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    fs::write(&cfg, "cells = 3:2, 3:2\nprofile = bump:R0=1,H=1,m=2\nt_end = 4\n").unwrap();
    let o = plap(&["sweep", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("duplicate cell"));
}

#[test]
fn verify_filters_by_name() {
    let o = plap(&["verify", "--only", "bernstein"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let s = stdout(&o);
    assert!(s.contains("criterion 12 bernstein"));
    assert!(s.contains("1 of 1 criteria passed"));

    let o = plap(&["verify", "--only", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bernstein_check_emits_json_lines() {
    let o = plap(&["bernstein-check"]);
    assert!(o.status.success());
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.len() > 20);
    assert!(lines.iter().any(|v| v["name"] == "b22 q=4"));
}
