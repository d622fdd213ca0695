//! Acceptance suite: one line per criterion, `PASS`/`FAIL`, with timing.
//!
//! Tolerances and runtime budgets are fixed; a failing criterion exits
//! non-zero after all criteria have been reported.

use std::time::{Duration, Instant};

use chemostat_dde_core::integrator::{compute_psi, conservation_residual, integrate};
use chemostat_dde_core::orbit::{attraction_rate, find_periodic_orbit, verify_orbit, OrbitOptions};
use chemostat_dde_core::persistence::{decay_fit, probe_member, summarize_probe, threshold_periodic};
use chemostat_dde_core::phi::{compute_phi_periodic, compute_phi_periodic_with, lemma_contraction_check, PhiOptions};
use chemostat_dde_core::quad::{bisect, fit_line, logspace};
use chemostat_dde_core::scenarios::{monod_equilibrium, scenario, standard_suite, Scenario, OMEGA};
use chemostat_dde_core::washout::compute_washout_periodic;
use chemostat_dde_core::{make_model, Classification, EnvironmentSignal, HistorySegment, UptakeFunction};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

/// Conservation identity on the standard suite, with its step-halving ratio.
fn conservation() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_ratio = f64::INFINITY;
    for sc in standard_suite() {
        let w = compute_washout_periodic(&sc.model).map_err(err)?;
        let residual = |h: f64| -> Result<f64, String> {
            let traj = integrate(&sc.model, &sc.history(), 10.0 * OMEGA, h).map_err(err)?;
            Ok(conservation_residual(&traj, &w))
        };
        let (r1, r2) = (residual(sc.step())?, residual(sc.step() / 2.0)?);
        check(r1 < 1e-6, format!("{}: residual {r1:.3e}", sc.name))?;
        worst = worst.max(r1);
        // below ~1e−11 the residual is rounding, not truncation
        if r1 > 1e-11 {
            let ratio = r1 / r2;
            check(ratio > 10.0, format!("{}: halving ratio {ratio:.1}", sc.name))?;
            worst_ratio = worst_ratio.min(ratio);
        }
    }
    Ok(format!("max residual {worst:.2e}, smallest halving ratio {worst_ratio:.1}"))
}

/// φ and ψ fixed-point identities over one period.
fn identities() -> Outcome {
    let (mut phi_worst, mut psi_worst) = (0.0_f64, 0.0_f64);
    for sc in standard_suite() {
        let w = compute_washout_periodic(&sc.model).map_err(err)?;
        let phi = compute_phi_periodic(&sc.model, &w).map_err(err)?;
        let tau = sc.model.tau();
        let traj = integrate(&sc.model, &sc.history(), 6.0 * OMEGA + 3.0 * tau, sc.step()).map_err(err)?;
        let psi = compute_psi(&sc.model, &traj).map_err(err)?;
        let from = 5.0 * OMEGA;
        let r_psi = psi.identity_residual_on(&sc.model, &traj, from, from + OMEGA);
        check(phi.identity_residual() < 1e-6, format!("{}: phi {:.2e}", sc.name, phi.identity_residual()))?;
        check(r_psi < 1e-6, format!("{}: psi {r_psi:.2e}", sc.name))?;
        phi_worst = phi_worst.max(phi.identity_residual());
        psi_worst = psi_worst.max(r_psi);
    }
    Ok(format!("phi {phi_worst:.2e}, psi {psi_worst:.2e}"))
}

/// Sign of λ against the simulated fate.
fn threshold_vs_fate() -> Outcome {
    let suite = standard_suite();
    check(suite.len() >= 10, "suite too small".into())?;
    let (mut extinct, mut persistent) = (0, 0);
    for sc in &suite {
        let r = threshold_periodic(&sc.model).map_err(err)?;
        check(r.classification == sc.expected, format!("{}: classified {}", sc.name, r.classification))?;
        let horizon = 50.0 * OMEGA;
        match r.classification {
            Classification::Extinct => {
                let traj = integrate(&sc.model, &sc.history(), horizon, sc.step()).map_err(err)?;
                let x_end = traj.x(horizon);
                check(x_end < 1e-10, format!("{}: x({horizon}) = {x_end:.2e}", sc.name))?;
                let fit = decay_fit(&traj, OMEGA, 0.5 * horizon, horizon).ok_or("no decay fit")?;
                check(
                    fit.slope <= r.lambda + 1e-3,
                    format!("{}: slope {:.5} vs lambda {:.5}", sc.name, fit.slope, r.lambda),
                )?;
                extinct += 1;
            }
            Classification::Persistent => {
                let m = probe_member(&sc.model, &sc.history(), horizon, sc.step()).map_err(err)?;
                let change = (m.floor_doubled - m.floor).abs() / m.floor_doubled;
                check(m.floor > 0.0 && change < 0.05, format!("{}: floors {:.3e} {:.3e}", sc.name, m.floor, m.floor_doubled))?;
                persistent += 1;
            }
            Classification::Indeterminate => return Err(format!("{}: indeterminate", sc.name)),
        }
    }
    check(extinct > 0 && persistent > 0, "both signs required".into())?;
    Ok(format!("{} scenarios ({persistent} persistent, {extinct} extinct)", suite.len()))
}

/// Constant environments: `sign(p(v)φ̄ − d) = sign(p(v)e^{−dτ} − d)` on a 5×5 grid.
fn autonomous_equivalence() -> Outcome {
    let v = 1.0;
    let pv = 2.0 * v / (1.0 + v);
    let mut worst: f64 = 0.0;
    for &d in &[0.2, 0.4, 0.6, 0.8, 1.0] {
        for &tau in &[0.25, 0.5, 1.0, 2.0, 3.0] {
            let model = make_model(
                tau,
                UptakeFunction::monod(2.0, 1.0).unwrap(),
                EnvironmentSignal::constant(d).unwrap(),
                EnvironmentSignal::constant(v).unwrap(),
                None,
            )
            .map_err(err)?;
            let w = compute_washout_periodic(&model).map_err(err)?;
            let opts = PhiOptions { tol: 1e-12, ..PhiOptions::default() };
            let phi = compute_phi_periodic_with(&model, &w, &opts, &|_| 1.0).map_err(err)?;
            let oracle = bisect(|u| u - (-tau * u * pv).exp(), 0.0, 1.0, 1e-15).ok_or("no root")?;
            let dev = (phi.eval(0.3) - oracle).abs().max((phi.eval(0.0) - oracle).abs());
            check(dev < 1e-10, format!("d={d} tau={tau}: phi off by {dev:.2e}"))?;
            worst = worst.max(dev);
            let lhs = pv * phi.eval(0.0) - d;
            let rhs = pv * (-d * tau).exp() - d;
            check(lhs.signum() == rhs.signum(), format!("d={d} tau={tau}: {lhs:.3e} vs {rhs:.3e}"))?;
        }
    }
    Ok(format!("25 cells agree, phi vs bisection {worst:.1e}"))
}

/// Initial segments of different shapes for one scenario.
fn initial_segments(sc: &Scenario) -> Vec<HistorySegment> {
    let tau = sc.model.tau();
    vec![
        HistorySegment::constant(tau, 0.0, 0.5, 0.2).unwrap(),
        HistorySegment::constant(tau, 0.0, 1.4, 1e-3).unwrap(),
        HistorySegment::from_fn(tau, 0.0, 32, |t| (0.1 + 0.05 * (3.0 * t).sin().abs(), 0.8 + 0.1 * t)).unwrap(),
    ]
}

/// Periodic orbit: convergence, uniqueness, identities, closed form.
fn periodic_orbit() -> Outcome {
    let names = [
        "constant-persistent",
        "piecewise-undelayed",
        "piecewise-persistent",
        "fourier-persistent",
        "fourier-long-delay",
        "fourier-incommensurate",
    ];
    let mut worst_identity: f64 = 0.0;
    let mut worst_spread: f64 = 0.0;
    for name in names {
        let sc = scenario(name).ok_or("missing scenario")?;
        let opts = OrbitOptions::for_model(&sc.model);
        let orbits = initial_segments(&sc)
            .iter()
            .map(|seg| find_periodic_orbit(&sc.model, seg, &opts))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        for o in &orbits {
            check(o.residual < 1e-8, format!("{name}: residual {:.2e}", o.residual))?;
            check(o.min_x > 0.0, format!("{name}: min x {:.2e}", o.min_x))?;
            check(o.orbit_identity_residual < 1e-6, format!("{name}: identity {:.2e}", o.orbit_identity_residual))?;
            worst_identity = worst_identity.max(o.orbit_identity_residual);
        }
        for o in &orbits[1..] {
            let d = orbits[0].segment.distance(&o.segment);
            check(d < 1e-7, format!("{name}: initializations differ by {d:.2e}"))?;
            worst_spread = worst_spread.max(d);
        }
        verify_orbit(&sc.model, &orbits[0]).map_err(err)?;
        if name == "constant-persistent" {
            let (s, x, y) = monod_equilibrium(2.0, 1.0, 0.5, 1.0, sc.model.tau()).ok_or("no equilibrium")?;
            let eq = HistorySegment::constant(sc.model.tau(), 0.0, s, x).unwrap();
            let d = orbits[0].segment.distance(&eq);
            check(d < 1e-7, format!("equilibrium off by {d:.2e}"))?;
            let traj = integrate(&sc.model, &orbits[0].segment, 2.0, sc.step()).map_err(err)?;
            let dy = (traj.y_channel(1.0) - y).abs();
            check(dy < 1e-7, format!("y* off by {dy:.2e}"))?;
        }
    }
    Ok(format!("6 scenarios, identity {worst_identity:.2e}, uniqueness {worst_spread:.2e}"))
}

/// Geometric decay of perturbations at two amplitudes.
fn attraction() -> Outcome {
    let mut summary = Vec::new();
    for name in ["constant-persistent", "fourier-persistent"] {
        let sc = scenario(name).ok_or("missing scenario")?;
        let opts = OrbitOptions { tol: 1e-12, ..OrbitOptions::for_model(&sc.model) };
        let orbit = find_periodic_orbit(&sc.model, &sc.history(), &opts).map_err(err)?;
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let perts = [orbit.segment.perturbed(1e-3 * a, 1e-3 * a), orbit.segment.perturbed(1e-5 * a, 1e-5 * a)];
        let report = attraction_rate(&sc.model, &orbit, &perts, 400).map_err(err)?;
        for m in &report.members {
            check(m.slope < 0.0 && m.r_squared > 0.99, format!("{name}: slope {:.4} R² {:.4}", m.slope, m.r_squared))?;
        }
        check(report.slope_spread < 0.1, format!("{name}: slopes disagree by {:.1}%", 100.0 * report.slope_spread))?;
        summary.push(format!("{name} {:.4}", report.members[0].slope));
    }
    Ok(summary.join(", "))
}

/// Explicit contraction bound over 20 periods on three scenarios.
fn contraction() -> Outcome {
    let mut worst: f64 = 0.0;
    for name in ["piecewise-persistent", "fourier-persistent", "fourier-long-delay"] {
        let sc = scenario(name).ok_or("missing scenario")?;
        let tau = sc.model.tau();
        let w = compute_washout_periodic(&sc.model).map_err(err)?;
        let r = lemma_contraction_check(&sc.model, &w, &|_| 1.0, &|h| 1.0 + h + tau, tau + 20.0 * OMEGA)
            .map_err(err)?;
        worst = worst.max(r.max_ratio);
    }
    Ok(format!("largest |φ₁−φ₂|/bound {worst:.3e} (t > t₀)"))
}

/// Ensembles of 16 histories with biomass over six decades.
fn uniform_persistence() -> Outcome {
    let mut summary = Vec::new();
    for name in ["constant-persistent", "fourier-persistent", "piecewise-persistent"] {
        let sc = scenario(name).ok_or("missing scenario")?;
        let tau = sc.model.tau();
        let xs = logspace(1e-6, 1.0, 16);
        let members = xs
            .iter()
            .enumerate()
            .map(|(i, &x0)| {
                let s0 = 0.1 + 1.3 * i as f64 / 15.0;
                let seg = HistorySegment::constant(tau, 0.0, s0, x0).unwrap();
                probe_member(&sc.model, &seg, 100.0 * OMEGA, sc.step())
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let report = summarize_probe(members).map_err(err)?;
        check(
            report.passed(),
            format!("{name}: delta {:.4e}, spread {:.2e}, doubling {:.2e}", report.empirical_delta, report.spread, report.doubling_change),
        )?;
        summary.push(format!("{name} δ={:.4}", report.empirical_delta));
    }
    Ok(summary.join(", "))
}

/// Order of the integrator against a fine-step reference.
fn order() -> Outcome {
    let tau = 1.0;
    let model = make_model(
        tau,
        UptakeFunction::monod(4.0, 1.0).unwrap(),
        EnvironmentSignal::fourier(1.0, vec![0.3], vec![0.1], 2.0).unwrap(),
        EnvironmentSignal::fourier(1.0, vec![0.2], vec![], 2.0).unwrap(),
        None,
    )
    .map_err(err)?;
    let hist = HistorySegment::constant(tau, 0.0, 0.5, 0.3).unwrap();
    let t_end = 10.0;
    let reference = integrate(&model, &hist, t_end, tau / 2048.0).map_err(err)?;
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for n in [8.0, 16.0, 32.0, 64.0, 128.0] {
        let traj = integrate(&model, &hist, t_end, tau / n).map_err(err)?;
        let e = (0..=40)
            .map(|k| {
                let t = t_end * k as f64 / 40.0;
                (traj.s(t) - reference.s(t)).abs().max((traj.x(t) - reference.x(t)).abs())
            })
            .fold(0.0, f64::max);
        hs.push((tau / n).ln());
        errs.push(e.ln());
    }
    let fit = fit_line(&hs, &errs).ok_or("fit failed")?;
    check(fit.slope >= 3.7, format!("slope {:.3}", fit.slope))?;
    Ok(format!("slope {:.3} (R² {:.4})", fit.slope, fit.r_squared))
}

/// Name, check, and the wall-clock budget in seconds.
type Criterion = (&'static str, fn() -> Outcome, u64);

fn main() {
    let criteria: [Criterion; 9] = [
        ("conservation identity", conservation, 10),
        ("phi and psi identities", identities, 5),
        ("threshold matches simulated fate", threshold_vs_fate, 60),
        ("autonomous equivalence", autonomous_equivalence, 5),
        ("periodic orbit", periodic_orbit, 120),
        ("exponential attraction", attraction, 60),
        ("contraction bound", contraction, 20),
        ("uniform persistence probe", uniform_persistence, 60),
        ("integrator order", order, 30),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(*budget);
        let (status, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {budget} s budget")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {} [{status}] {name}: {detail} ({:.2} s)",
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
