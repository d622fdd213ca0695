//! Invariant harness behind `verify-lemmas`: every identity the theory
//! guarantees, measured on one scenario and compared with a fixed limit.

use chemostat_dde_core::orbit::{find_periodic_orbit, measure_orbit, OrbitOptions, IDENTITY_TOL, MEAN_EXPONENT_TOL};
use chemostat_dde_core::{
    compute_phi_periodic_with, compute_psi, compute_washout_periodic, conservation_residual, integrate,
    lemma_contraction_check, ChemostatModel, Classification, Error as ModelError, PhiOptions,
};

use crate::commands::threshold;
use crate::error::{Breach, CliError, Result};
use crate::output::{Artifacts, Report};
use crate::scenario::Scenario;

pub const CONSERVATION_TOL: f64 = 1e-6;
pub const WASHOUT_PERIODICITY_TOL: f64 = 1e-9;
pub const WASHOUT_EQUATION_TOL: f64 = 1e-8;
pub const PHI_IDENTITY_TOL: f64 = 1e-6;
pub const PHI_PERIODICITY_TOL: f64 = 1e-8;
pub const PSI_IDENTITY_TOL: f64 = 1e-6;
pub const EXPONENTIAL_FORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Pass,
    Fail,
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub residual: f64,
    pub limit: f64,
    pub status: Status,
}

impl Check {
    fn measured(name: &'static str, residual: f64, limit: f64) -> Self {
        let status = if residual < limit { Status::Pass } else { Status::Fail };
        Self {
            name,
            residual,
            limit,
            status,
        }
    }

    fn skipped(name: &'static str, limit: f64, reason: impl Into<String>) -> Self {
        Self {
            name,
            residual: f64::NAN,
            limit,
            status: Status::Skipped(reason.into()),
        }
    }
}

/// Measures all checks; model errors that make a check meaningless skip it.
pub fn run_checks(sc: &Scenario, model: &ChemostatModel) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let h = sc.step(model);
    let horizon = sc.horizon(model);
    let traj = integrate(model, &sc.initial_segment()?, horizon, h)?;
    let periodic = model.period().is_some();
    let not_periodic = "inputs are not periodic";

    let washout = if periodic { Some(compute_washout_periodic(model)?) } else { None };
    match &washout {
        Some(w) => {
            checks.push(Check::measured("conservation", conservation_residual(&traj, w), CONSERVATION_TOL));
            checks.push(Check::measured(
                "washout_periodicity",
                w.periodicity_residual(),
                WASHOUT_PERIODICITY_TOL,
            ));
            checks.push(Check::measured("washout_equation", w.equation_residual(), WASHOUT_EQUATION_TOL));
        }
        None => {
            checks.push(Check::skipped("conservation", CONSERVATION_TOL, not_periodic));
            checks.push(Check::skipped("washout_periodicity", WASHOUT_PERIODICITY_TOL, not_periodic));
            checks.push(Check::skipped("washout_equation", WASHOUT_EQUATION_TOL, not_periodic));
        }
    }

    match &washout {
        Some(w) => {
            let opts = PhiOptions {
                tol: sc.run.phi_tol,
                max_periods: sc.run.phi_max_periods,
                ..PhiOptions::default()
            };
            let phi = compute_phi_periodic_with(model, w, &opts, &|_| 1.0)?;
            checks.push(Check::measured("phi_identity", phi.identity_residual(), PHI_IDENTITY_TOL));
            checks.push(Check::measured("phi_periodicity", phi.periodicity_residual(), PHI_PERIODICITY_TOL));
            // φ maps into (0, 1]: report how far outside it strays
            let excess = (phi.max() - 1.0).max(0.0) + if phi.min() > 0.0 { 0.0 } else { 1.0 };
            checks.push(Check::measured("phi_range", excess, 1e-12));
        }
        None => {
            checks.push(Check::skipped("phi_identity", PHI_IDENTITY_TOL, not_periodic));
            checks.push(Check::skipped("phi_periodicity", PHI_PERIODICITY_TOL, not_periodic));
            checks.push(Check::skipped("phi_range", 1e-12, not_periodic));
        }
    }

    match (&washout, model.period()) {
        (Some(w), Some(omega)) if sc.tau > 0.0 => {
            let tau = sc.tau;
            let end = tau + sc.verify_periods as f64 * omega;
            match lemma_contraction_check(model, w, &|_| 1.0, &|s| 1.0 + s + tau, end) {
                Ok(r) => checks.push(Check::measured("phi_contraction", r.max_ratio, 1.0)),
                Err(ModelError::BoundViolated { lhs, rhs, .. }) => {
                    checks.push(Check::measured("phi_contraction", lhs / rhs, 1.0))
                }
                Err(e) => return Err(e.into()),
            }
        }
        (Some(_), _) => checks.push(Check::skipped("phi_contraction", 1.0, "no delay")),
        _ => checks.push(Check::skipped("phi_contraction", 1.0, not_periodic)),
    }

    match compute_psi(model, &traj) {
        Ok(psi) => {
            checks.push(Check::measured("psi_identity", psi.identity_residual(), PSI_IDENTITY_TOL));
            let t0 = psi.start() + sc.tau;
            let r = psi.exponential_form_residual(model, &traj, t0, traj.t_end())?;
            checks.push(Check::measured("exponential_form", r, EXPONENTIAL_FORM_TOL));
        }
        Err(ModelError::ZeroBiomass { .. }) => {
            checks.push(Check::skipped("psi_identity", PSI_IDENTITY_TOL, "biomass vanished"));
            checks.push(Check::skipped("exponential_form", EXPONENTIAL_FORM_TOL, "biomass vanished"));
        }
        Err(e) => return Err(e.into()),
    }

    let orbit_names = ["orbit_identity", "orbit_mean_exponent", "orbit_psi_identity"];
    let orbit_limits = [IDENTITY_TOL, MEAN_EXPONENT_TOL, IDENTITY_TOL];
    let classification = if periodic { Some(threshold(sc, model)?.classification) } else { None };
    match classification {
        Some(Classification::Persistent) => {
            let opts = OrbitOptions {
                h,
                tol: sc.orbit.tol,
                max_periods: sc.orbit.max_periods,
                accelerate: sc.orbit.accelerate,
            };
            let orbit = find_periodic_orbit(model, &sc.initial_segment()?, &opts)?;
            let v = measure_orbit(model, &orbit)?;
            let values = [v.identity_residual, v.mean_exponent.abs(), v.psi_identity_residual];
            for ((name, limit), value) in orbit_names.into_iter().zip(orbit_limits).zip(values) {
                checks.push(Check::measured(name, value, limit));
            }
            match v.y_relation_residual {
                Some(r) => checks.push(Check::measured("orbit_y_relation", r, IDENTITY_TOL)),
                None => checks.push(Check::skipped("orbit_y_relation", IDENTITY_TOL, "environment not constant")),
            }
        }
        other => {
            let reason = match other {
                None => not_periodic.to_string(),
                Some(c) => format!("classification is {c}"),
            };
            for (name, limit) in orbit_names.into_iter().zip(orbit_limits) {
                checks.push(Check::skipped(name, limit, reason.clone()));
            }
            checks.push(Check::skipped("orbit_y_relation", IDENTITY_TOL, reason));
        }
    }
    Ok(checks)
}

pub(crate) fn verify(
    sc: &Scenario,
    model: &ChemostatModel,
    out: &mut Artifacts,
    summary: &mut Vec<String>,
) -> Result<()> {
    let checks = run_checks(sc, model)?;
    let mut rep = Report::new("verify");
    let mut breaches = Vec::new();
    let mut passed = 0;
    for c in &checks {
        let key = |k: &str| format!("{}.{k}", c.name);
        rep.num(&key("limit"), c.limit);
        match &c.status {
            Status::Pass => {
                passed += 1;
                rep.num(&key("residual"), c.residual).text(&key("status"), "pass");
            }
            Status::Fail => {
                rep.num(&key("residual"), c.residual).text(&key("status"), "fail");
                breaches.push(Breach {
                    check: c.name,
                    residual: c.residual,
                    limit: c.limit,
                });
            }
            Status::Skipped(reason) => {
                rep.text(&key("status"), "skipped").text(&key("reason"), reason);
            }
        }
    }
    rep.count("passed", passed).count("failed", breaches.len());
    out.report("verify.report", &rep)?;
    summary.push(format!(
        "{passed} checks passed, {} failed, {} skipped",
        breaches.len(),
        checks.len() - passed - breaches.len()
    ));
    if breaches.is_empty() {
        Ok(())
    } else {
        Err(CliError::ToleranceBreach(breaches))
    }
}
