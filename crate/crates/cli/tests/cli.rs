use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use chemostat_dde::{load_config, run, CliError, Command, Config, Scenario, Value};
use chemostat_dde_core::scenarios::{monod_equilibrium, standard_suite};
use chemostat_dde_core::threshold_periodic;

fn scenario_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.scn"))
}

fn config(name: &str, out: &Path, overrides: &[&str]) -> Config {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    let mut c = load_config(Some(&scenario_file(name)), &overrides).unwrap();
    c.set("output.dir", Value::text(out.display().to_string()));
    c
}

fn report(path: &Path) -> Config {
    Config::parse(&fs::read_to_string(path).unwrap(), "report").unwrap()
}

fn number(c: &Config, key: &str) -> f64 {
    match c.get(key) {
        Some(Value::Number(x)) => *x,
        other => panic!("{key}: {other:?}"),
    }
}

fn binary() -> Process {
    Process::new(env!("CARGO_BIN_EXE_chemostat-dde"))
}

#[test]
fn shipped_files_reproduce_the_core_suite() {
    let dir = tempfile::tempdir().unwrap();
    for sc in standard_suite() {
        let cfg = config(sc.name, dir.path(), &[]);
        let typed = Scenario::from_config(&cfg).unwrap();
        assert_eq!(typed.name.as_deref(), Some(sc.name));
        let ours = threshold_periodic(&typed.model().unwrap()).unwrap();
        let theirs = threshold_periodic(&sc.model).unwrap();
        assert_eq!(ours.classification, sc.expected, "{}", sc.name);
        assert!((ours.lambda - theirs.lambda).abs() < 1e-12, "{}", sc.name);
    }
}

#[test]
fn simulate_constant_persistent_ends_on_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    run(Command::Simulate, &config("constant-persistent", dir.path(), &[])).unwrap();
    let csv = fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,s,x,y,E,psi"));
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    assert_eq!(last.len(), 6);
    // psi needs x(t+τ), so it is undefined on the final delay
    assert_eq!(last[5], "");
    let (s, x, y) = monod_equilibrium(2.0, 1.0, 0.5, 1.0, 0.5).unwrap();
    let got: Vec<f64> = last[..4].iter().map(|v| v.parse().unwrap()).collect();
    assert!((got[2] - x).abs() < 1e-6, "x = {} vs {x}", got[2]);
    assert!((got[1] - s).abs() < 1e-6);
    assert!((got[3] - y).abs() < 1e-6);
}

#[test]
fn threshold_without_delay_is_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(Command::Threshold, &config("constant-undelayed", dir.path(), &[])).unwrap();
    assert_eq!(out.exit_code(), 0);
    let r = report(&dir.path().join("threshold.report"));
    // p(1) − 0.5 with p(s) = 2s/(1+s)
    assert_eq!(number(&r, "threshold.lambda"), 0.5);
    assert_eq!(r.get("threshold.classification"), Some(&Value::text("persistent")));
}

#[test]
fn verify_lemmas_passes_on_every_shipped_scenario() {
    for sc in standard_suite() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(Command::VerifyLemmas, &config(sc.name, dir.path(), &[]));
        assert!(out.is_ok(), "{}: {:?}", sc.name, out.err());
        let r = report(&dir.path().join("verify.report"));
        assert_eq!(number(&r, "verify.failed"), 0.0);
    }
}

#[test]
fn verify_lemmas_reports_breaches_by_name() {
    let dir = tempfile::tempdir().unwrap();
    // a single step per delay is far too coarse for the identities
    let cfg = config("fourier-long-delay", dir.path(), &["run.n=1", "run.max_step=2"]);
    match run(Command::VerifyLemmas, &cfg) {
        Err(CliError::ToleranceBreach(list)) => {
            assert!(list.iter().any(|b| b.check == "conservation"), "{list:?}");
        }
        other => panic!("{other:?}"),
    }
    let r = report(&dir.path().join("verify.report"));
    assert_eq!(r.get("verify.conservation.status"), Some(&Value::text("fail")));
}

#[test]
fn every_command_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("piecewise-persistent", dir.path(), &[]);
    let expected = [
        (Command::Simulate, "simulate.csv"),
        (Command::Washout, "washout.csv"),
        (Command::Phi, "phi.csv"),
        (Command::Threshold, "threshold.report"),
        (Command::Probe, "probe.csv"),
        (Command::WindowCheck, "window.report"),
        (Command::Orbit, "orbit.csv"),
        (Command::VerifyLemmas, "verify.report"),
    ];
    for (cmd, file) in expected {
        let out = run(cmd, &cfg).unwrap_or_else(|e| panic!("{}: {e}", cmd.name()));
        assert!(out.artifacts.iter().any(|p| p.ends_with(file)), "{}", cmd.name());
    }
    let header = |f: &str| fs::read_to_string(dir.path().join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header("phi.csv"), "t,z,c_normalized,phi");
    assert_eq!(header("orbit.csv"), "t,s,x,y,psi");
    let orbit = report(&dir.path().join("orbit.report"));
    assert!(number(&orbit, "orbit.residual") < 1e-8);
    assert!(number(&orbit, "orbit.attraction_rate") < 0.0);
    let window = report(&dir.path().join("window.report"));
    assert_eq!(window.get("window.passed"), Some(&Value::text("true")));
    // the orbit floor and the probe floor measure the same positive lower bound
    let probe = report(&dir.path().join("probe.report"));
    assert!(number(&orbit, "orbit.min_x") >= number(&probe, "probe.empirical_delta") - 1e-6);
}

#[test]
fn orbit_refuses_extinct_models() {
    let dir = tempfile::tempdir().unwrap();
    let err = run(Command::Orbit, &config("constant-extinct", dir.path(), &[])).unwrap_err();
    assert!(err.to_string().contains("not classified persistent"), "{err}");
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let cfg = config("fourier-persistent", dir.path(), &["run.horizon=12"]);
        run(Command::Simulate, &cfg).unwrap();
        run(Command::Phi, &cfg).unwrap();
    }
    for f in ["simulate.csv", "simulate.report", "phi.csv", "phi.report"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn sweep_output_is_independent_of_worker_count() {
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(
            "constant-persistent",
            dir.path(),
            &["sweep.param=d.value", "sweep.from=0.3", "sweep.to=1.1", "sweep.steps=5", &format!("run.workers={workers}")],
        );
        let out = run(Command::Sweep, &cfg).unwrap();
        assert_eq!(out.exit_code(), 0);
        outputs.push(fs::read_to_string(dir.path().join("sweep.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let rows: Vec<Vec<&str>> = outputs[0].lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(outputs[0].lines().next(), Some("param,lambda,classification,empirical_delta"));
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][2], "persistent");
    assert!(!rows[0][3].is_empty());
    assert_eq!(rows[4][2], "extinct");
    assert_eq!(rows[4][3], "");
    // λ decreases with the dilution rate
    let lambdas: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(lambdas.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn sweep_rejects_unknown_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "constant-persistent",
        dir.path(),
        &["sweep.param=d.mean", "sweep.from=0.3", "sweep.to=1.1"],
    );
    match run(Command::Sweep, &cfg) {
        Err(CliError::UnknownKey { key, .. }) => assert_eq!(key, "d.mean"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_keys_are_hard_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("constant-persistent", dir.path(), &["model.tua=1"]);
    match run(Command::Threshold, &cfg) {
        Err(CliError::UnknownKey { key, origin, .. }) => {
            assert_eq!(key, "model.tua");
            assert_eq!(origin, "--set");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn shipped_files_round_trip_through_the_text_format() {
    for sc in standard_suite() {
        let text = fs::read_to_string(scenario_file(sc.name)).unwrap();
        let cfg = Config::parse(&text, sc.name).unwrap();
        assert_eq!(Config::parse(&cfg.to_text(), "again").unwrap(), cfg);
        let typed = Scenario::from_config(&cfg).unwrap();
        let back = Scenario::from_config(&typed.to_config()).unwrap();
        assert_eq!(back, typed);
    }
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let ok = binary()
        .args(["threshold", "--scenario"])
        .arg(scenario_file("fourier-persistent"))
        .args(["--out", out])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("persistent"));

    // τ = 0 with p(v) = d puts λ exactly on the boundary
    let boundary = binary()
        .args(["threshold", "--scenario"])
        .arg(scenario_file("constant-undelayed"))
        .args(["--set", "d.value=1", "--out", out])
        .output()
        .unwrap();
    assert_eq!(boundary.status.code(), Some(2));

    let bad = dir.path().join("bad.scn");
    fs::write(&bad, "model.tau = 0.5\nD.kind = \"constant\"\n").unwrap();
    let parse = binary().args(["threshold", "--scenario"]).arg(&bad).output().unwrap();
    assert_eq!(parse.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&parse.stderr);
    assert!(msg.contains("bad.scn:2:1"), "{msg}");

    let assumption = binary()
        .args(["threshold", "--scenario"])
        .arg(scenario_file("constant-persistent"))
        .args(["--set", "d.value=0", "--out", out])
        .output()
        .unwrap();
    assert_eq!(assumption.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&assumption.stderr).contains("A2"));
}

#[test]
fn binary_flags_map_to_keys() {
    let dir = tempfile::tempdir().unwrap();
    let status = binary()
        .args(["sweep", "--scenario"])
        .arg(scenario_file("constant-persistent"))
        .args(["--param", "model.tau", "--from", "0", "--to", "1", "--steps", "3", "--workers", "2"])
        .args(["--set", "sweep.probe=false", "--out"])
        .arg(dir.path())
        .env("CHEMOSTAT_DDE_WORKERS", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let r = report(&dir.path().join("sweep.report"));
    assert_eq!(number(&r, "sweep.workers"), 2.0);
    assert_eq!(number(&r, "sweep.points"), 3.0);
    assert_eq!(r.get("sweep.param"), Some(&Value::text("model.tau")));
}

#[test]
fn worker_count_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = binary()
        .args(["sweep", "--scenario"])
        .arg(scenario_file("constant-persistent"))
        .args(["--param", "d.value", "--from", "0.4", "--to", "0.5", "--steps", "2"])
        .args(["--set", "sweep.probe=false", "--out"])
        .arg(dir.path())
        .env("CHEMOSTAT_DDE_WORKERS", "3")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    assert_eq!(number(&report(&dir.path().join("sweep.report")), "sweep.workers"), 3.0);

    let bad = binary()
        .args(["sweep", "--scenario"])
        .arg(scenario_file("constant-persistent"))
        .args(["--param", "d.value", "--from", "0.4", "--to", "0.5", "--steps", "2", "--out"])
        .arg(dir.path())
        .env("CHEMOSTAT_DDE_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("CHEMOSTAT_DDE_WORKERS"));
}
