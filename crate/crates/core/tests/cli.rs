use std::path::Path;
use std::process::{Command, Output};

fn gfsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("GFSIM_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn kappa_prints_closed_form_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = gfsim(&["kappa", "--theta", "1.5", "--q", "2.5"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let last = out.lines().last().unwrap();
    let v: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!((v + 0.282_094_791_773_878).abs() < 1e-9, "{out}");
    assert!(out.starts_with("# schema: gfsim-csv/1"));
}

#[test]
fn list_names_every_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&gfsim(&["list"], dir.path()));
    for id in ["exp_cumulant_suite", "exp_martingale", "exp_stationarity", "exp_log_bounds"] {
        assert!(out.contains(id), "{id} missing from {out}");
    }
}

#[test]
fn verify_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = gfsim(&["verify", "exp_calibration", "--out", "res", "--format", "json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("exp_calibration: PASS"));
    let table: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("res/exp_calibration.json")).unwrap()).unwrap();
    assert_eq!(table["passed"], true);
    assert!(table["manifest"]["wall_time_s"].is_null());
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("res/manifest.json")).unwrap()).unwrap();
    assert!(m["manifest"]["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn failed_experiment_exits_with_one() {
    // the upper-envelope hypothesis does not hold below 3/2
    let dir = tempfile::tempdir().unwrap();
    let o = gfsim(&["verify", "exp_exponents", "--out", "res"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("exp_exponents: FAIL"));
}

#[test]
fn config_errors_name_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "seed = 3\n[cellsystem]\nx_min = 0.01\nx_mni = 0.02\n").unwrap();
    let o = gfsim(&["--config", cfg.to_str().unwrap(), "list"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 4") && e.contains("cellsystem.x_mni"), "{e}");

    std::fs::write(&cfg, "[spine]\n\nx0_floor = -1\n").unwrap();
    let o = gfsim(&["--config", cfg.to_str().unwrap(), "list"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 3") && e.contains("spine.x0_floor"), "{e}");
}

#[test]
fn unknown_experiment_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gfsim(&["verify", "exp_nope"], dir.path()).status.code(), Some(2));
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.conf");
    std::fs::write(&cfg, "[run]\nseed = 11\n").unwrap();
    let c = cfg.to_str().unwrap();
    let seed_of = |o: Output| {
        let out = stdout(&o);
        out.lines().find_map(|l| l.strip_prefix("# master_seed: ").map(str::to_string)).unwrap()
    };
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_gfsim"));
        cmd.args(["--config", c, "kappa", "--q", "2.5"]).args(extra).env_remove("GFSIM_SEED");
        if let Some(v) = env {
            cmd.env("GFSIM_SEED", v);
        }
        cmd.output().unwrap()
    };
    assert_eq!(seed_of(run(None, &[])), "11");
    assert_eq!(seed_of(run(Some("12"), &[])), "12");
    assert_eq!(seed_of(run(Some("12"), &["--seed", "13"])), "13");
    let bad = run(Some("abc"), &[]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("GFSIM_SEED"));
}

#[test]
fn data_commands_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["sample-path", "--horizon", "5"][..],
        &["spine", "--sign", "plus", "--x", "0"][..],
        &["grow-tree", "--x-min", "0.05", "--max-generation", "2"][..],
        &["area", "--x-min", "0.05"][..],
        &["exfunc", "--replicas", "500"][..],
    ] {
        let a = gfsim(&[args, &["--seed", "4"]].concat(), dir.path());
        let b = gfsim(&[args, &["--seed", "4"]].concat(), dir.path());
        assert_eq!(a.status.code(), Some(0), "{args:?}: {}", stderr(&a));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert!(!a.stdout.is_empty());
    }
}

#[test]
fn grow_tree_output_parses() {
    let dir = tempfile::tempdir().unwrap();
    let o = gfsim(&["grow-tree", "--x-min", "0.05", "--max-generation", "3", "--seed", "9"], dir.path());
    let tree = gfsim_core::cellsystem::parse_tree_text(&stdout(&o)).unwrap();
    assert!(tree.is_closed_under_parent());
}
