//! End-to-end tests of the command-line interface: exit codes, file outputs,
//! and byte-level reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reithom"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("reithom_cli_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not json ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn nfcheck_reports_doubling_failure_for_exp() {
    let dir = tmp_dir("nfcheck");
    let out = bin()
        .args(["nfcheck", "--nf", "exp", "--out", "expcheck"])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = stdout_json(&out);
    assert_eq!(summary["delta2"]["holds"], serde_json::json!(false));
    // the written report agrees with the summary
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("expcheck.json")).unwrap()).unwrap();
    assert_eq!(report["delta2"]["holds"], serde_json::json!(false));
    assert_eq!(report["label"], serde_json::json!("exp"));
}

#[test]
fn cell_inner_solves_harmonic_mean() {
    let dir = tmp_dir("inner");
    let out = bin()
        .args([
            "cell",
            "inner",
            "--integrand",
            "p_laminate",
            "--p",
            "2",
            "--xi",
            "1",
            "--res",
            "128",
        ])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = stdout_json(&out);
    let energy = summary["energy"].as_f64().unwrap();
    assert!((energy - 0.5).abs() < 1e-4, "energy {energy}");
    assert_eq!(summary["converged"], serde_json::json!(true));
}

#[test]
fn gamma_study_writes_csv_with_small_residuals() {
    let dir = tmp_dir("gamma");
    let out = bin()
        .args([
            "gamma",
            "study",
            "--integrand",
            "quadratic_laminate",
            "--xi0",
            "1",
            "--eps",
            "2^-2..2^-3",
            "--res-per-period",
            "8",
            "--cell-res",
            "64",
            "--exact-oracle",
            "--out",
            "study",
        ])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.join("study.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epsilon,grid_points,F_eps_min,oracle_min,hom_value,residual,iterations"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        // F_eps_min within a relative 1e-6 of the grid-exact oracle
        assert!((row[2] - row[3]).abs() <= 1e-6 * row[3]);
        // residual against the homogenized value stays small
        assert!(row[5] < 0.005, "residual {}", row[5]);
    }
}

#[test]
fn config_run_is_byte_identical_across_invocations() {
    let dir = tmp_dir("repro");
    let cfg = serde_json::json!({
        "kind": "twoscale",
        "seq": "cos_fast",
        "test": "cos_z",
        "eps": "2^-2..2^-4",
        "res_per_period": 8,
        "out": "pairing"
    });
    let cfg_path = dir.join("cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let run = |out_dir: &Path| {
        let out = bin()
            .args(["run", "--config"])
            .arg(&cfg_path)
            .args(["--seed", "7"])
            .arg("--out-dir")
            .arg(out_dir)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read(out_dir.join("pairing.csv")).unwrap()
    };
    let first = run(&dir.join("a"));
    let second = run(&dir.join("b"));
    assert_eq!(
        first, second,
        "identical config + seed must give identical bytes"
    );
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("epsilon,pairing,target,residual\n"));
}

#[test]
fn malformed_config_gives_machine_readable_error() {
    let dir = tmp_dir("badcfg");
    let cfg_path = dir.join("bad.json");
    std::fs::write(&cfg_path, "{\"kind\": \"gamma-study\", \"surprise\": true}").unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(4), "config errors exit with code 4");
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], serde_json::json!("config"));
}

#[test]
fn incommensurate_epsilon_exits_with_distinct_code() {
    let dir = tmp_dir("incomm");
    let out = bin()
        .args([
            "twoscale", "pair", "--seq", "cos_fast", "--test", "cos_z", "--eps", "0.3",
        ])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert_eq!(
        out.status.code(),
        Some(6),
        "incommensurate epsilon exits with code 6"
    );
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], serde_json::json!("incommensurate"));
}

#[test]
fn table_roundtrips_through_outer_solve() {
    let dir = tmp_dir("table");
    let out = bin()
        .args([
            "table",
            "--integrand",
            "quadratic_laminate",
            "--xi-min=-2",
            "--xi-max=2",
            "--xi-count=41",
            "--y-samples=64",
            "--res=64",
            "--out=inner_table",
        ])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table_prefix = dir.join("inner_table");
    let out = bin()
        .args([
            "cell",
            "outer",
            "--integrand",
            "quadratic_laminate",
            "--xi",
            "1",
            "--res",
            "64",
        ])
        .arg("--table")
        .arg(&table_prefix)
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = stdout_json(&out);
    let energy = summary["energy"].as_f64().unwrap();
    assert!((energy - 0.25).abs() < 2e-3, "outer energy {energy}");
}

#[test]
fn corrector_recovery_energies_upper_bound_direct_minima() {
    let dir = tmp_dir("corrector");
    let out = bin()
        .args([
            "corrector",
            "--integrand",
            "quadratic_laminate",
            "--xi0",
            "1",
            "--eps",
            "2^-3..2^-5",
            "--res-per-period",
            "8",
            "--cell-res",
            "128",
            "--out",
            "recovery",
        ])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.join("recovery.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    let mut excesses = Vec::new();
    for row in &rows {
        let (recovery, direct, target) = (row[1], row[2], row[3]);
        // recovery competitors can never beat the direct minimum
        assert!(recovery >= direct - 1e-10);
        // and they approach the homogenized target from above as eps shrinks
        assert!((target - 0.25).abs() < 2e-3);
        excesses.push(recovery - target);
    }
    assert!(
        excesses.last().unwrap().abs() < 0.02 * 0.25,
        "final recovery energy {excesses:?} not within 2% of the target"
    );
}
