//! Command dispatch. Every command reads a [`Config`], writes its artifacts
//! into `output.dir`, and returns an [`Outcome`].

use std::path::PathBuf;
use std::str::FromStr;

use chemostat_dde_core::orbit::{attraction_rate, find_periodic_orbit, measure_orbit, OrbitOptions};
use chemostat_dde_core::persistence::{threshold_periodic_with, uniform_persistence_probe, window_condition_general};
use chemostat_dde_core::quad::logspace;
use chemostat_dde_core::washout::WashoutKind;
use chemostat_dde_core::{
    compute_phi_periodic_with, compute_psi, compute_washout_general, compute_washout_periodic,
    conservation_residual, integrate, ChemostatModel, Classification, HistorySegment, PersistenceReport,
    PhiOptions, ProbeReport, WashoutSolution,
};
use rayon::prelude::*;

use crate::config::{Config, Value};
use crate::error::{Breach, CliError, Result};
use crate::harness;
use crate::output::{Artifacts, Csv, Report};
use crate::scenario::Scenario;

/// Environment variable holding the default worker count for `sweep`.
pub const WORKERS_ENV: &str = "CHEMOSTAT_DDE_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Washout,
    Phi,
    Threshold,
    Probe,
    WindowCheck,
    Orbit,
    VerifyLemmas,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Simulate,
        Command::Washout,
        Command::Phi,
        Command::Threshold,
        Command::Probe,
        Command::WindowCheck,
        Command::Orbit,
        Command::VerifyLemmas,
        Command::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Washout => "washout",
            Command::Phi => "phi",
            Command::Threshold => "threshold",
            Command::Probe => "probe",
            Command::WindowCheck => "window-check",
            Command::Orbit => "orbit",
            Command::VerifyLemmas => "verify-lemmas",
            Command::Sweep => "sweep",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// What a successful command produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    /// Some classification came out indeterminate (exit code 2).
    pub indeterminate: bool,
    pub artifacts: Vec<PathBuf>,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.indeterminate {
            2
        } else {
            0
        }
    }
}

/// Runs `command` on a fully assembled config (file plus overrides).
pub fn run(command: Command, config: &Config) -> Result<Outcome> {
    if command == Command::Sweep {
        return sweep(config);
    }
    let sc = Scenario::from_config(config)?;
    let model = sc.model()?;
    let mut out = Artifacts::new(&sc.output_dir);
    let mut summary = Vec::new();
    let mut indeterminate = false;
    match command {
        Command::Simulate => simulate(&sc, &model, &mut out, &mut summary)?,
        Command::Washout => washout(&sc, &model, &mut out, &mut summary)?,
        Command::Phi => phi(&sc, &model, &mut out, &mut summary)?,
        Command::Threshold => {
            let r = threshold(&sc, &model)?;
            let mut rep = Report::new("threshold");
            threshold_fields(&mut rep, &r);
            out.report("threshold.report", &rep)?;
            summary.push(format!("lambda = {:e} ({})", r.lambda, r.classification));
            indeterminate = r.classification == Classification::Indeterminate;
        }
        Command::Probe => probe(&sc, &model, &mut out, &mut summary)?,
        Command::WindowCheck => window_check(&sc, &model, &mut out, &mut summary)?,
        Command::Orbit => orbit(&sc, &model, &mut out, &mut summary)?,
        Command::VerifyLemmas => harness::verify(&sc, &model, &mut out, &mut summary)?,
        Command::Sweep => unreachable!(),
    }
    Ok(Outcome {
        indeterminate,
        artifacts: out.into_paths(),
        summary,
    })
}

fn phi_options(sc: &Scenario) -> PhiOptions {
    PhiOptions {
        tol: sc.run.phi_tol,
        max_periods: sc.run.phi_max_periods,
        ..PhiOptions::default()
    }
}

pub(crate) fn threshold(sc: &Scenario, model: &ChemostatModel) -> Result<PersistenceReport> {
    Ok(threshold_periodic_with(model, &phi_options(sc))?)
}

/// Washout for periodic models, or the burnt-in general solution otherwise.
pub(crate) fn washout_for(sc: &Scenario, model: &ChemostatModel) -> Result<WashoutSolution> {
    if model.period().is_some() {
        Ok(compute_washout_periodic(model)?)
    } else {
        Ok(compute_washout_general(model, sc.horizon(model))?)
    }
}

fn simulate(sc: &Scenario, model: &ChemostatModel, out: &mut Artifacts, summary: &mut Vec<String>) -> Result<()> {
    let h = sc.step(model);
    let horizon = sc.horizon(model);
    let traj = integrate(model, &sc.initial_segment()?, horizon, h)?;
    let psi = compute_psi(model, &traj).ok();
    let mut csv = Csv::new(&["t", "s", "x", "y", "E", "psi"]);
    for (t, v) in traj.nodes() {
        let psi_t = psi
            .as_ref()
            .filter(|p| t >= p.start() - 1e-9 * h && t <= p.end() + 1e-9 * h)
            .map(|p| p.eval(t));
        csv.row(&[Some(t), Some(v[0]), Some(v[1]), Some(v[3]), Some(v[2]), psi_t]);
    }
    out.csv("simulate.csv", &csv)?;

    let end = traj.t_end();
    let mut rep = Report::new("simulate");
    rep.num("t_end", end)
        .num("step", h)
        .num("final_s", traj.s(end))
        .num("final_x", traj.x(end))
        .num("final_y", traj.y_channel(end))
        .count("clamp_count", traj.clamp_count())
        .flag("extinct_numerically", traj.extinct_numerically())
        .flag("discontinuous_dilution", model.has_discontinuous_dilution());
    if model.period().is_some() {
        let w = compute_washout_periodic(model)?;
        rep.num("conservation_residual", conservation_residual(&traj, &w));
    }
    if let Some(p) = &psi {
        rep.num("psi_identity_residual", p.identity_residual());
    }
    out.report("simulate.report", &rep)?;
    summary.push(format!("t = {end}: s = {:e}, x = {:e}", traj.s(end), traj.x(end)));
    Ok(())
}

fn washout(sc: &Scenario, model: &ChemostatModel, out: &mut Artifacts, summary: &mut Vec<String>) -> Result<()> {
    let w = washout_for(sc, model)?;
    let mut csv = Csv::new(&["t", "z"]);
    for (t, z) in w.samples() {
        csv.row(&[Some(t), Some(z)]);
    }
    out.csv("washout.csv", &csv)?;
    let mut rep = Report::new("washout");
    match w.kind() {
        WashoutKind::Periodic { period } => rep.text("kind", "periodic").num("period", period),
        WashoutKind::Asymptotic { burn_in } => rep.text("kind", "asymptotic").num("burn_in", burn_in),
    };
    rep.num("step", w.step())
        .num("periodicity_residual", w.periodicity_residual())
        .num("equation_residual", w.equation_residual())
        .num("min", w.min())
        .num("max", w.max());
    out.report("washout.report", &rep)?;
    summary.push(format!("z* in [{:e}, {:e}]", w.min(), w.max()));
    Ok(())
}

fn phi(sc: &Scenario, model: &ChemostatModel, out: &mut Artifacts, summary: &mut Vec<String>) -> Result<()> {
    let w = compute_washout_periodic(model)?;
    let phi = compute_phi_periodic_with(model, &w, &phi_options(sc), &|_| 1.0)?;
    let mut csv = Csv::new(&["t", "z", "c_normalized", "phi"]);
    for (t, f, c) in phi.samples() {
        csv.row(&[Some(t), Some(w.eval(t)), Some(c), Some(f)]);
    }
    out.csv("phi.csv", &csv)?;
    let mut rep = Report::new("phi");
    rep.num("period", phi.period())
        .count("grid", phi.grid_len())
        .count("periods", phi.periods())
        .num("identity_residual", phi.identity_residual())
        .num("periodicity_residual", phi.periodicity_residual())
        .num("last_ratio", phi.last_ratio())
        .num("c_growth_exponent", phi.c_growth_exponent())
        .num("min", phi.min())
        .num("max", phi.max())
        .num("washout_periodicity_residual", w.periodicity_residual());
    out.report("phi.report", &rep)?;
    summary.push(format!("phi in [{:e}, {:e}] after {} periods", phi.min(), phi.max(), phi.periods()));
    Ok(())
}

pub(crate) fn threshold_fields(rep: &mut Report, r: &PersistenceReport) {
    rep.num("lambda", r.lambda)
        .num("mean_uptake", r.mean_uptake)
        .num("mean_dilution", r.mean_dilution)
        .text("classification", r.classification.as_str())
        .num("tolerance_band", r.tolerance_band)
        .num("washout_periodicity_residual", r.washout_periodicity_residual)
        .num("washout_equation_residual", r.washout_equation_residual)
        .num("phi_identity_residual", r.phi_identity_residual)
        .num("phi_periodicity_residual", r.phi_periodicity_residual)
        .num("c_growth_rate", r.c_growth_rate)
        .count("samples_per_period", r.samples_per_period)
        .count("phi_periods", r.phi_periods)
        .flag("discontinuous_dilution", r.discontinuous_dilution);
}

/// Constant histories with `x(0)` log-spaced and `s(0)` linearly spaced.
fn probe_histories(sc: &Scenario) -> Result<Vec<HistorySegment>> {
    let p = &sc.probe;
    if !(p.x_min > 0.0 && p.x_max >= p.x_min) {
        return Err(CliError::invalid("probe.x_min", "need 0 < probe.x_min <= probe.x_max"));
    }
    let n = p.members;
    logspace(p.x_min, p.x_max, n)
        .into_iter()
        .enumerate()
        .map(|(i, x0)| {
            let k = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            let s0 = p.s_min + (p.s_max - p.s_min) * k;
            Ok(HistorySegment::constant(sc.tau, 0.0, s0, x0)?)
        })
        .collect()
}

pub(crate) fn run_probe(sc: &Scenario, model: &ChemostatModel) -> Result<(Vec<HistorySegment>, ProbeReport)> {
    let histories = probe_histories(sc)?;
    let horizon = sc.probe.horizon.unwrap_or(100.0 * Scenario::reference_period(model));
    let report = uniform_persistence_probe(model, &histories, horizon, sc.step(model))?;
    Ok((histories, report))
}

fn probe(sc: &Scenario, model: &ChemostatModel, out: &mut Artifacts, summary: &mut Vec<String>) -> Result<()> {
    let (histories, r) = run_probe(sc, model)?;
    let mut csv = Csv::new(&["member", "s0", "x0", "floor", "floor_doubled", "clamp_count"]);
    for (i, (h, m)) in histories.iter().zip(&r.members).enumerate() {
        let (s0, x0) = h.head();
        csv.row(&[
            Some(i as f64),
            Some(s0),
            Some(x0),
            Some(m.floor),
            Some(m.floor_doubled),
            Some(m.clamp_count as f64),
        ]);
    }
    out.csv("probe.csv", &csv)?;
    let mut rep = Report::new("probe");
    rep.num("empirical_delta", r.empirical_delta)
        .num("delta_doubled", r.delta_doubled)
        .num("spread", r.spread)
        .num("doubling_change", r.doubling_change)
        .count("members", r.members.len())
        .flag("passed", r.passed());
    out.report("probe.report", &rep)?;
    summary.push(format!("empirical delta = {:e}, spread = {:e}", r.empirical_delta, r.spread));
    if !r.passed() {
        return Err(CliError::ToleranceBreach(vec![Breach {
            check: "common persistence floor",
            residual: r.spread.max(r.doubling_change),
            limit: 0.05,
        }]));
    }
    Ok(())
}

fn window_check(sc: &Scenario, model: &ChemostatModel, out: &mut Artifacts, summary: &mut Vec<String>) -> Result<()> {
    let omega = Scenario::reference_period(model);
    let eta = match sc.window.eta {
        Some(eta) => eta,
        None if model.period().is_some() => {
            let lambda = threshold(sc, model)?.lambda;
            if lambda.is_nan() || lambda <= 0.0 {
                return Err(CliError::invalid(
                    "window.eta",
                    format!("no default for lambda = {lambda:e} <= 0; set window.eta"),
                ));
            }
            lambda / 2.0
        }
        None => return Err(CliError::MissingKey("window.eta".into())),
    };
    let length = sc.window.length.unwrap_or(2.0 * omega);
    let horizon = sc.window.horizon.unwrap_or(60.0 * omega);
    let r = window_condition_general(model, eta, length, horizon)?;
    let mut rep = Report::new("window");
    rep.num("eta", r.eta)
        .num("length", r.window)
        .num("horizon", r.horizon)
        .num("admissible_from", r.admissible_from)
        .count("windows", r.windows)
        .num("worst_margin", r.worst_margin)
        .list("worst_window", vec![r.worst_window.0, r.worst_window.1])
        .num("worst_margin_rate", r.worst_margin_rate)
        .flag("passed", r.passed);
    out.report("window.report", &rep)?;
    summary.push(format!(
        "window condition {} (worst margin {:e} on {} windows)",
        if r.passed { "holds" } else { "fails" },
        r.worst_margin,
        r.windows
    ));
    Ok(())
}

fn orbit(sc: &Scenario, model: &ChemostatModel, out: &mut Artifacts, summary: &mut Vec<String>) -> Result<()> {
    let omega = model.period().ok_or(chemostat_dde_core::Error::NotPeriodic)?;
    let opts = OrbitOptions {
        h: sc.step(model),
        tol: sc.orbit.tol,
        max_periods: sc.orbit.max_periods,
        accelerate: sc.orbit.accelerate,
    };
    let orbit = find_periodic_orbit(model, &sc.initial_segment()?, &opts)?;
    let v = measure_orbit(model, &orbit)?;

    let a = orbit.segment.anchor();
    let traj = integrate(model, &orbit.segment, a + omega + 2.0 * sc.tau + opts.h, opts.h)?;
    let psi = compute_psi(model, &traj)?;
    let mut csv = Csv::new(&["t", "s", "x", "y", "psi"]);
    for (t, st) in traj.nodes().filter(|(t, _)| *t <= a + omega + 1e-9 * opts.h) {
        csv.row(&[Some(t), Some(st[0]), Some(st[1]), Some(st[3]), Some(psi.eval(t))]);
    }
    out.csv("orbit.csv", &csv)?;

    let mut rep = Report::new("orbit");
    rep.num("residual", orbit.residual)
        .num("identity_residual", v.identity_residual)
        .num("mean_exponent", v.mean_exponent)
        .num("psi_identity_residual", v.psi_identity_residual)
        .num("min_x", orbit.min_x)
        .count("iterations", orbit.iterations)
        .num("lambda", orbit.lambda)
        .num("step", orbit.h);
    if let Some(r) = v.y_relation_residual {
        rep.num("y_relation_residual", r);
    }
    if let Some(rate) = orbit.attraction_rate {
        rep.num("iteration_rate", rate);
    }
    if sc.orbit.attraction_periods > 0 && !sc.orbit.perturbations.is_empty() {
        let k = std::f64::consts::FRAC_1_SQRT_2;
        let perts: Vec<HistorySegment> = sc
            .orbit
            .perturbations
            .iter()
            .map(|&e| orbit.segment.perturbed(e * k, e * k))
            .collect();
        let att = attraction_rate(model, &orbit, &perts, sc.orbit.attraction_periods)?;
        let slopes: Vec<f64> = att.members.iter().map(|m| m.slope).collect();
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        rep.num("attraction_rate", mean)
            .list("attraction_slopes", slopes)
            .list("attraction_r_squared", att.members.iter().map(|m| m.r_squared).collect())
            .num("attraction_slope_spread", att.slope_spread);
        if let Some(eps) = att.envelope_epsilon {
            rep.num("envelope_epsilon", eps);
        }
        summary.push(format!("attraction rate {mean:e} per period"));
    }
    out.report("orbit.report", &rep)?;
    summary.push(format!(
        "orbit after {} periods, residual {:e}, min x {:e}",
        orbit.iterations, orbit.residual, orbit.min_x
    ));
    Ok(())
}

/// Worker count: `run.workers`, then the environment, then the core count.
pub fn worker_count(sc: &Scenario) -> Result<usize> {
    if let Some(w) = sc.run.workers {
        return Ok(w);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::invalid(WORKERS_ENV, format!("`{v}` is not a positive integer"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

struct SweepPoint {
    value: f64,
    outcome: Result<(PersistenceReport, Option<f64>)>,
}

fn sweep_point(config: &Config, param: &str, value: f64) -> Result<(PersistenceReport, Option<f64>)> {
    let mut cfg = config.clone();
    cfg.set(param, Value::Number(value));
    let sc = Scenario::from_config(&cfg)?;
    let model = sc.model()?;
    let r = threshold(&sc, &model)?;
    let delta = if sc.sweep.probe && r.classification == Classification::Persistent {
        // a floor that is still drifting is not a persistence constant
        run_probe(&sc, &model)
            .ok()
            .filter(|(_, p)| p.passed())
            .map(|(_, p)| p.empirical_delta)
    } else {
        None
    };
    Ok((r, delta))
}

fn sweep(config: &Config) -> Result<Outcome> {
    let sc = Scenario::from_config(config)?;
    let param = sc.sweep.param.clone().ok_or_else(|| CliError::MissingKey("sweep.param".into()))?;
    let from = sc.sweep.from.ok_or_else(|| CliError::MissingKey("sweep.from".into()))?;
    let to = sc.sweep.to.ok_or_else(|| CliError::MissingKey("sweep.to".into()))?;
    let steps = sc.sweep.steps;
    if steps == 0 {
        return Err(CliError::invalid("sweep.steps", "must be at least 1"));
    }
    if param.starts_with("sweep.") || param.starts_with("output.") || param.starts_with("run.workers") {
        return Err(CliError::invalid("sweep.param", format!("`{param}` is not a model parameter")));
    }
    match config.get(&param) {
        Some(Value::Number(_)) | None => {}
        Some(_) => return Err(CliError::invalid("sweep.param", format!("`{param}` is not a single number"))),
    }
    // an unknown key fails here once instead of at every point
    let mut probe_cfg = config.clone();
    probe_cfg.set(&param, Value::Number(from));
    Scenario::from_config(&probe_cfg)?;

    let values: Vec<f64> = (0..steps)
        .map(|k| if steps == 1 { from } else { from + (to - from) * k as f64 / (steps - 1) as f64 })
        .collect();
    let workers = worker_count(&sc)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::invalid("run.workers", e.to_string()))?;
    let points: Vec<SweepPoint> = pool.install(|| {
        values
            .par_iter()
            .map(|&value| SweepPoint {
                value,
                outcome: sweep_point(config, &param, value),
            })
            .collect()
    });

    let mut csv = Csv::new(&["param", "lambda", "classification", "empirical_delta"]);
    let fmt = crate::config::format_number;
    let (mut persistent, mut extinct, mut indeterminate, mut failed) = (0, 0, 0, Vec::new());
    for p in &points {
        match &p.outcome {
            Ok((r, delta)) => {
                match r.classification {
                    Classification::Persistent => persistent += 1,
                    Classification::Extinct => extinct += 1,
                    Classification::Indeterminate => indeterminate += 1,
                }
                csv.raw_row(&[
                    fmt(p.value),
                    fmt(r.lambda),
                    r.classification.as_str().to_string(),
                    delta.map(fmt).unwrap_or_default(),
                ]);
            }
            Err(e) => {
                csv.raw_row(&[fmt(p.value), String::new(), "error".into(), String::new()]);
                failed.push(format!("{param} = {}: {e}", p.value));
            }
        }
    }
    let mut out = Artifacts::new(&sc.output_dir);
    out.csv("sweep.csv", &csv)?;
    let mut rep = Report::new("sweep");
    rep.text("param", &param)
        .count("points", points.len())
        .count("persistent", persistent)
        .count("extinct", extinct)
        .count("indeterminate", indeterminate)
        .count("errors", failed.len())
        .count("workers", workers);
    out.report("sweep.report", &rep)?;
    if let Some(first) = failed.first() {
        return Err(CliError::invalid(
            "sweep.param",
            format!("{} of {} points failed; first: {first}", failed.len(), points.len()),
        ));
    }
    Ok(Outcome {
        indeterminate: indeterminate > 0,
        artifacts: out.into_paths(),
        summary: vec![format!(
            "{} points: {persistent} persistent, {extinct} extinct, {indeterminate} indeterminate",
            points.len()
        )],
    })
}
