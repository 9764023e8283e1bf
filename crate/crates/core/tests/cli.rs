use std::path::Path;
use std::process::Command;

use freebound::cli::{run_from, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_freebound"))
}

fn header(path: &Path) -> Vec<String> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    rd.headers().unwrap().iter().map(String::from).collect()
}

fn records(path: &Path) -> Vec<csv::StringRecord> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    rd.records().map(Result::unwrap).collect()
}

#[test]
fn solve_writes_one_file_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = run_from(["freebound", "solve", "--n-list", "2,4,8", "--out", out]).unwrap();
    assert_eq!(res.files.len(), 3);
    let path = dir.path().join("solution_N8.csv");
    assert_eq!(
        header(&path),
        ["n", "xi", "x", "S", "u", "v", "P", "dPdS", "u_exact", "v_exact"]
    );
    let rows = records(&path);
    assert_eq!(rows.len(), 9);
    assert_eq!(&rows[8][2], "inf");
    assert_eq!(&rows[8][3], "inf");
    let x0: f64 = rows[0][2].parse().unwrap();
    assert_eq!(x0, 1.0);
    let r = res.free_boundaries[2].1;
    let s0: f64 = rows[0][3].parse().unwrap();
    assert_eq!(s0, r);
}

#[test]
fn no_oracle_drops_exact_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_from([
        "freebound",
        "solve",
        "--n-list",
        "2,4",
        "--no-oracle",
        "--out",
        out,
    ])
    .unwrap();
    assert_eq!(header(&dir.path().join("solution_N4.csv")).len(), 8);
    run_from([
        "freebound",
        "estimate",
        "--n-list",
        "2",
        "--n",
        "4",
        "--no-oracle",
        "--out",
        out,
    ])
    .unwrap();
    assert_eq!(
        header(&dir.path().join("estimate_N4.csv")),
        ["S", "Esafe1", "Esafe2", "Eest1", "Eest2"]
    );
}

#[test]
fn estimate_columns_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = run_from(["freebound", "estimate", "--n", "16", "--out", out]).unwrap();
    let path = dir.path().join("estimate_N16.csv");
    assert_eq!(
        header(&path),
        ["S", "E1", "E2", "Esafe1", "Esafe2", "Eest1", "Eest2"]
    );
    let rows = records(&path);
    assert_eq!(rows.len(), 16);
    let r32 = res.free_boundaries[1].1;
    let s0: f64 = rows[0][0].parse().unwrap();
    assert_eq!(s0, r32);
    for row in &rows {
        let esafe: f64 = row[3].parse().unwrap();
        let eest: f64 = row[5].parse().unwrap();
        assert!((eest * 3.0 - esafe).abs() <= 1e-15 + 1e-12 * esafe.abs());
    }
}

#[test]
fn ladder_prints_table_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bin()
        .args(["ladder", "--n-list", "2,4,8,16", "--out", out])
        .output()
        .unwrap();
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("4.657286"));
    assert!(stdout.contains("4.925466"));
    let path = dir.path().join("ladder.csv");
    assert_eq!(
        header(&path),
        ["N", "R_0", "R_1", "R_2", "R_3", "observed_order", "status"]
    );
    assert!(records(&path).iter().all(|r| &r[6] == "ok"));
}

#[test]
fn failed_solve_exits_nonzero_with_partial_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bin()
        .args([
            "ladder",
            "--n-list",
            "2,4,8",
            "--max-iterations",
            "1",
            "--out",
            out,
        ])
        .output()
        .unwrap();
    assert!(!o.status.success());
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert!(stderr.contains("solve failed at N = 2"), "{stderr}");
    let rows = records(&dir.path().join("ladder.csv"));
    assert_eq!(rows.len(), 3);
    let status = |r: &csv::StringRecord| r.iter().next_back().unwrap().to_string();
    assert!(status(&rows[0]).starts_with("failed"));
    assert_eq!(status(&rows[2]), "not run");
}

#[test]
fn bad_arguments_exit_nonzero() {
    for args in [
        &["solve", "--n-list", "2,4,6"][..],
        &["solve", "--map", "spline"],
        &["ladder", "--rate", "0"],
        &["ladder", "--n-list", "8"],
        &["frobnicate"],
    ] {
        let o = bin().args(args).output().unwrap();
        assert!(!o.status.success(), "{args:?}");
    }
}

#[test]
fn saved_config_round_trips_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_from([
        "freebound",
        "solve",
        "--map",
        "alg",
        "--c",
        "7.5",
        "--n-list",
        "4,8",
        "--out",
        a.to_str().unwrap(),
        "--save-config",
        cfg.to_str().unwrap(),
    ])
    .unwrap();
    let loaded = RunConfig::load(&cfg).unwrap();
    assert_eq!(loaded.c, Some(7.5));
    assert_eq!(loaded.n_list, vec![4, 8]);
    run_from([
        "freebound",
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ])
    .unwrap();
    for n in [4, 8] {
        let name = format!("solution_N{n}.csv");
        assert_eq!(
            std::fs::read(a.join(&name)).unwrap(),
            std::fs::read(b.join(&name)).unwrap()
        );
    }
}
