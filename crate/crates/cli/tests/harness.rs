use std::fs;
use std::process::Command;

use kgwave_cli::output::{read_observables, RunManifest, RunStatus, MANIFEST_FILE, OBSERVABLES_FILE};
use kgwave_cli::{
    convergence, load_config, oracle_check, retrend, simulate, sweep, HarnessError, PotentialConfig, Refinement,
    RunConfig,
};

fn config_in(dir: &std::path::Path) -> RunConfig {
    RunConfig {
        output_dir: dir.to_path_buf(),
        snapshot_times: vec![0.0, 2.5],
        ..RunConfig::default()
    }
}

#[test]
fn default_run_writes_one_row_per_record_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = simulate(&config_in(&tmp.path().join("a")), false).unwrap();
    let b = simulate(&config_in(&tmp.path().join("b")), false).unwrap();

    let text = fs::read_to_string(a.dir.join(OBSERVABLES_FILE)).unwrap();
    assert_eq!(text.lines().count(), 1 + 1 + 1500 / 10);
    assert!(text.starts_with("t,l2_sq,mean,variance,sigma,energy\n"));
    for name in [OBSERVABLES_FILE, "snapshot_t0.csv", "snapshot_t2.5.csv"] {
        assert_eq!(
            fs::read(a.dir.join(name)).unwrap(),
            fs::read(b.dir.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
    let snap = fs::read_to_string(a.dir.join("snapshot_t2.5.csv")).unwrap();
    assert_eq!(snap.lines().next(), Some("x,u"));
    assert_eq!(snap.lines().count(), 1 + 2401);
}

#[test]
fn manifest_lists_every_file_and_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = simulate(&config_in(&tmp.path().join("first")), true).unwrap();
    let manifest = RunManifest::load(&first.dir.join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.status, RunStatus::Complete);
    let names: Vec<&str> = manifest.files.iter().map(|f| f.name.as_str()).collect();
    for expected in [
        OBSERVABLES_FILE,
        "snapshot_t0.csv",
        "snapshot_t2.5.csv",
        "trend.json",
        "plot_observables.py",
    ] {
        assert!(names.contains(&expected), "{expected} missing from {names:?}");
    }
    assert!(manifest.verify(&first.dir).unwrap().is_empty());

    let mut replay = load_config(&first.dir.join(MANIFEST_FILE)).unwrap();
    assert_eq!(replay, manifest.config);
    replay.output_dir = tmp.path().join("replay");
    let second = simulate(&replay, false).unwrap();
    assert_eq!(
        fs::read(first.dir.join(OBSERVABLES_FILE)).unwrap(),
        fs::read(second.dir.join(OBSERVABLES_FILE)).unwrap()
    );
}

#[test]
fn solver_failure_keeps_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config_in(tmp.path());
    cfg.solver.rel_tolerance = 1e-14;
    cfg.solver.max_iterations = Some(2);
    let err = simulate(&cfg, false).unwrap_err();
    assert!(matches!(err, HarnessError::Solver(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
    let manifest = RunManifest::load(&tmp.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.status, RunStatus::Partial);
    assert!(manifest.failure.unwrap().contains("time step"));
    let series = read_observables(&tmp.path().join(OBSERVABLES_FILE)).unwrap();
    assert!(!series.records.is_empty());
    assert!(series.records.len() < 151);
}

#[test]
fn trend_reanalysis_matches_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let art = simulate(&config_in(tmp.path()), false).unwrap();
    let again = retrend(&tmp.path().join(OBSERVABLES_FILE), &art.manifest.config.trend).unwrap();
    assert_eq!(Some(again), art.trend);
}

#[test]
fn sweep_rows_are_independent_and_failures_isolated() {
    let tmp = tempfile::tempdir().unwrap();
    let base = RunConfig {
        output_dir: tmp.path().to_path_buf(),
        ..RunConfig::default()
    };
    let rows = sweep(&base, &[150.0, -1.0, 2.0], true).unwrap();
    assert!(rows[1].report.is_none() && rows[1].error.is_some());

    let r150 = rows[0].report.as_ref().unwrap();
    assert!((r150.mean_fit.slope + 1.0).abs() <= 0.02);
    assert!(r150.mean_fit.r <= -0.999);
    let r2 = rows[2].report.as_ref().unwrap();
    assert!(
        (r2.sigma_fit.slope - 0.3266).abs() <= 0.2 * 0.3266,
        "A1 = {}",
        r2.sigma_fit.slope
    );

    let alone = sweep(&base, &[2.0], false).unwrap();
    assert_eq!(alone[0].report.as_ref(), Some(r2));

    let table = fs::read_to_string(tmp.path().join("table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].starts_with("a2,status,A,B,r,A1,B1,r1,t0,sigma_min"));
    assert!(lines[2].starts_with("-1,failed"));
    assert!(tmp.path().join("a2_2").join(MANIFEST_FILE).exists());
}

#[test]
fn spatial_order_is_two() {
    let base = RunConfig {
        potential: PotentialConfig::Constant { value: 0.0 },
        dt: 0.001,
        t_end: 5.0,
        ..RunConfig::default()
    };
    let rep = convergence(&base, Refinement::Space, &[0.1, 0.05, 0.025, 0.0125]).unwrap();
    assert!(
        (1.8..=2.2).contains(&rep.observed_order),
        "observed order {}",
        rep.observed_order
    );
}

#[test]
fn convergence_needs_three_levels_and_a_constant_potential() {
    let base = RunConfig {
        potential: PotentialConfig::Constant { value: 9.0 },
        ..RunConfig::default()
    };
    assert_eq!(
        convergence(&base, Refinement::Time, &[0.02, 0.01])
            .unwrap_err()
            .exit_code(),
        2
    );
    let step = RunConfig::default();
    let err = convergence(&step, Refinement::Time, &[0.04, 0.02, 0.01]).unwrap_err();
    assert!(err.to_string().contains("no oracle for step potential"));
}

#[test]
fn oracle_check_refuses_step_potential() {
    let err = oracle_check(&RunConfig::default(), 1e-2).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("no oracle for step potential"));
}

fn kgwave() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kgwave"))
}

#[test]
fn binary_reports_config_errors_with_line_and_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("run.toml");
    fs::write(&path, "c = 1.0\n\n[packet]\nwidht = 2.0\n").unwrap();
    let out = kgwave().args(["simulate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("widht") && stderr.contains("line 4"), "{stderr}");

    fs::write(&path, "dt = 0.01\nt_end = 15.005\n").unwrap();
    let out = kgwave().args(["simulate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.toml:2"));
}

#[test]
fn binary_oracle_check_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kgwave()
        .args(["oracle-check", "--a2", "5", "-o"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let run = |threshold: &str| {
        kgwave()
            .args([
                "oracle-check",
                "--constant",
                "9",
                "--t-end",
                "1",
                "--threshold",
                threshold,
                "-o",
            ])
            .arg(tmp.path())
            .output()
            .unwrap()
    };
    assert_eq!(run("1e-2").status.code(), Some(0));
    assert_eq!(run("1e-12").status.code(), Some(4));
    assert!(tmp.path().join("oracle_check.csv").exists());
}

#[test]
fn reference_schema_lists_every_config_key() {
    let schema: serde_json::Value = serde_json::from_str(include_str!("../../../docs/run-config.schema.json")).unwrap();
    let config = serde_json::to_value(RunConfig::default()).unwrap();
    let keys = |v: &serde_json::Value| -> Vec<String> {
        let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
        k.sort();
        k
    };
    assert_eq!(keys(&schema["properties"]), keys(&config));
    for (def, key) in [("solver", "solver"), ("packet", "packet"), ("trend", "trend")] {
        assert_eq!(keys(&schema["$defs"][def]["properties"]), keys(&config[key]), "{def}");
    }
}

#[test]
fn shipped_reference_config_is_valid() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/reference-run.toml");
    let cfg = load_config(&path).unwrap();
    assert_eq!(cfg.n_steps(), 1500);
}
