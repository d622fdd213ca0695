//! Persistence versus extinction of the biomass.
//!
//! For periodic models the fate is decided by the sign of
//! `λ = ⟨p(z*)φ⟩ − ⟨D⟩`. For general models the window condition
//! `∫_{t₁}^{t₂} p(z*(t−τ))φ(t−τ) dt > ∫_{t₁}^{t₂} (D + η)` is checked on a
//! lattice of windows, and persistence is probed empirically by running an
//! ensemble of initial histories.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::history::HistorySegment;
use crate::integrator::{integrate, Trajectory};
use crate::math;
use crate::model::ChemostatModel;
use crate::phi::{self, compute_phi_periodic_with, CStepper, PhiFunction, PhiOptions};
use crate::quad::{self, LineFit};
use crate::washout::{compute_washout_general, compute_washout_periodic, WashoutSolution};

/// Floor of the indeterminate band around `λ = 0`.
pub const BASE_BAND: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Persistent,
    Extinct,
    Indeterminate,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Persistent => "persistent",
            Classification::Extinct => "extinct",
            Classification::Indeterminate => "indeterminate",
        }
    }

    pub fn of(lambda: f64, band: f64) -> Self {
        if lambda > band {
            Classification::Persistent
        } else if lambda < -band {
            Classification::Extinct
        } else {
            Classification::Indeterminate
        }
    }
}

impl core::fmt::Display for Classification {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceReport {
    /// `⟨p(z*)φ⟩ − ⟨D⟩`.
    pub lambda: f64,
    pub mean_uptake: f64,
    pub mean_dilution: f64,
    pub classification: Classification,
    pub tolerance_band: f64,
    pub washout_periodicity_residual: f64,
    pub washout_equation_residual: f64,
    pub phi_identity_residual: f64,
    pub phi_periodicity_residual: f64,
    /// Per-unit-time growth of the un-normalized `c`; tends to `λ`.
    pub c_growth_rate: f64,
    pub samples_per_period: usize,
    pub phi_periods: usize,
    /// Set when `D` jumps; the classical theory assumes continuous `D`.
    pub discontinuous_dilution: bool,
    pub empirical_delta: Option<f64>,
    pub window_check: Option<WindowReport>,
}

/// Threshold with default options.
pub fn threshold_periodic(model: &ChemostatModel) -> Result<PersistenceReport> {
    threshold_periodic_with(model, &PhiOptions::default())
}

pub fn threshold_periodic_with(model: &ChemostatModel, opts: &PhiOptions) -> Result<PersistenceReport> {
    let washout = compute_washout_periodic(model)?;
    let phi = compute_phi_periodic_with(model, &washout, opts, &|_| 1.0)?;
    Ok(report_from(model, &washout, &phi))
}

/// `⟨p(z*)φ⟩` by Gauss–Legendre on the `φ` grid, split at kinks.
pub fn mean_uptake(model: &ChemostatModel, washout: &WashoutSolution, phi: &PhiFunction) -> f64 {
    let omega = phi.period();
    let dt = omega / phi.grid_len() as f64;
    let breaks = phi::kinks(model, 0.0, omega);
    let f = |t: f64| model.uptake().eval(washout.eval(t)) * phi.eval(t);
    quad::integrate_on_grid(&f, 0.0, omega, 0.0, dt, &breaks) / omega
}

pub fn report_from(model: &ChemostatModel, washout: &WashoutSolution, phi: &PhiFunction) -> PersistenceReport {
    let omega = phi.period();
    let mean_dilution = model.dilution_mean().unwrap_or(f64::NAN);
    let uptake = mean_uptake(model, washout, phi);
    let lambda = uptake - mean_dilution;
    let band = BASE_BAND
        + washout.periodicity_residual()
        + phi.identity_residual()
        + phi.periodicity_residual();
    PersistenceReport {
        lambda,
        mean_uptake: uptake,
        mean_dilution,
        classification: Classification::of(lambda, band),
        tolerance_band: band,
        washout_periodicity_residual: washout.periodicity_residual(),
        washout_equation_residual: washout.equation_residual(),
        phi_identity_residual: phi.identity_residual(),
        phi_periodicity_residual: phi.periodicity_residual(),
        c_growth_rate: phi.c_growth_exponent() / omega,
        samples_per_period: phi.grid_len(),
        phi_periods: phi.periods(),
        discontinuous_dilution: model.has_discontinuous_dilution(),
        empirical_delta: None,
        window_check: None,
    }
}

/// Outcome of the window condition on a lattice of windows.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    pub eta: f64,
    pub window: f64,
    pub horizon: f64,
    /// First admissible `t₁`: after the washout burn-in, once `φ` from two
    /// different `c` histories agrees to `1e−8` (measured, one delay later).
    pub admissible_from: f64,
    pub windows: usize,
    /// Smallest `∫ [p(z*(t−τ))φ(t−τ) − D − η]` over the lattice.
    pub worst_margin: f64,
    pub worst_window: (f64, f64),
    /// Smallest margin divided by its window length.
    pub worst_margin_rate: f64,
    pub passed: bool,
}

/// Checks the window condition with `t₁ = T + kT/4` (`k ≥ 1`) and lengths
/// `T, 2T, 4T, …`, skipping windows before the certified start.
pub fn window_condition_general(
    model: &ChemostatModel,
    eta: f64,
    window: f64,
    horizon: f64,
) -> Result<WindowReport> {
    if !(window > 0.0) || !(eta >= 0.0) {
        return Err(Error::InvalidSpec("window length must be positive and eta non-negative"));
    }
    let washout = compute_washout_general(model, horizon)?;
    let tau = model.tau();
    let burn_in = washout.valid_from();
    let anchor = burn_in + tau;
    let origin = anchor + tau;
    let reference = model.period().unwrap_or(1.0);
    let opts = PhiOptions::default();
    let (step, cumulative, settled) = if tau > 0.0 {
        let n = phi::c_steps(model, reference, &opts);
        let h = tau / n as f64;
        let (g, settled) = cumulative_margin(model, &washout, eta, anchor, origin, horizon, n, h)?;
        (h, g, settled)
    } else {
        let h = reference / crate::washout::period_grid(reference, 0.0) as f64;
        let f = |s: f64| model.uptake().eval(washout.eval(s)) - model.dilution().eval(s) - eta;
        (h, accumulate(model, &f, origin, horizon, h), origin)
    };
    let start = settled.max(origin);
    let (values, rates) = cumulative;
    // the antiderivative between nodes: Hermite on (G, G' = integrand)
    let at = |t: f64| -> f64 {
        let k = math::floor((t - origin) / step + 1e-9).max(0.0) as usize;
        let k = k.min(values.len() - 2);
        let a = origin + k as f64 * step;
        quad::hermite(a, a + step, values[k], values[k + 1], rates[k], rates[k + 1], t)
    };
    let mut report = WindowReport {
        eta,
        window,
        horizon,
        admissible_from: start,
        windows: 0,
        worst_margin: f64::INFINITY,
        worst_window: (f64::NAN, f64::NAN),
        worst_margin_rate: f64::INFINITY,
        passed: false,
    };
    let mut k = 1usize;
    loop {
        let t1 = window + k as f64 * window / 4.0;
        if t1 + window > horizon + 1e-9 {
            break;
        }
        k += 1;
        if t1 < start {
            continue;
        }
        let mut len = window;
        while t1 + len <= horizon + 1e-9 {
            let t2 = t1 + len;
            let margin = at(t2) - at(t1);
            report.windows += 1;
            if margin < report.worst_margin {
                report.worst_margin = margin;
                report.worst_window = (t1, t2);
            }
            report.worst_margin_rate = report.worst_margin_rate.min(margin / len);
            len *= 2.0;
        }
    }
    if report.windows == 0 {
        return Err(Error::HorizonTooShort {
            needed: start.max(window * 1.25) + window,
            horizon,
        });
    }
    report.passed = report.worst_margin > 0.0;
    Ok(report)
}

/// `p(z*(s−τ))φ(s−τ) − D(s) − η`; `φ` read from the stepper when given.
fn integrand(
    model: &ChemostatModel,
    washout: &WashoutSolution,
    stepper: Option<&CStepper<'_>>,
    eta: f64,
    s: f64,
) -> f64 {
    let tau = model.tau();
    let phi = match stepper {
        Some(st) => st.phi(s - tau).map(|v| v.0).unwrap_or(f64::NAN),
        None => 1.0,
    };
    model.uptake().eval(washout.eval(s - tau)) * phi - model.dilution().eval(s) - eta
}

/// Cumulative integral of `f` and `f` itself on the grid `start + k·h` up to `end`.
fn accumulate<F: Fn(f64) -> f64>(
    model: &ChemostatModel,
    f: &F,
    start: f64,
    end: f64,
    h: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = math::floor((end - start) / h + 1e-9).max(1.0) as usize;
    let breaks = model.dilution().discontinuities(start, end);
    let mut values = Vec::with_capacity(n + 1);
    let mut rates = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    values.push(0.0);
    rates.push(f(start));
    for k in 0..n {
        let a = start + k as f64 * h;
        acc += quad::integrate_on_grid(f, a, a + h, start, h, &breaks);
        values.push(acc);
        rates.push(f(a + h));
    }
    (values, rates)
}

/// Cumulative margin `(times, values)` on the lattice grid, paired with the
/// time from which `φ` no longer depends on the `c` history.
type MarginRun = ((Vec<f64>, Vec<f64>), f64);

/// Runs `c` from `anchor` and accumulates the window integrand on
/// `[start, horizon]`, renormalizing and trimming one reference unit at a time.
///
/// A second `c` from a different history runs alongside; the returned time
/// is one delay after the last node where the two `φ` differ by `1e−8` or more.
#[allow(clippy::too_many_arguments)]
fn cumulative_margin(
    model: &ChemostatModel,
    washout: &WashoutSolution,
    eta: f64,
    anchor: f64,
    start: f64,
    horizon: f64,
    n: usize,
    h: f64,
) -> Result<MarginRun> {
    let tau = model.tau();
    let mut stepper = CStepper::new(model, washout, anchor, n, &|_| 1.0);
    let mut shadow = CStepper::new(model, washout, anchor, n, &|t| 1.0 + (t - anchor + tau) / tau);
    let mut unsettled = start;
    let total = math::floor((horizon - start) / h + 1e-9).max(1.0) as usize;
    let mut values = Vec::with_capacity(total + 1);
    let mut rates = Vec::with_capacity(total + 1);
    values.push(0.0);
    let mut acc = 0.0;
    let d = model.dilution();
    let chunk = n.max(64);
    // the integrand kinks where D jumps at s and at s − τ (through φ and z*)
    let mut breaks = d.discontinuities(start, horizon);
    breaks.extend(d.discontinuities(start - tau, horizon - tau).into_iter().map(|t| t + tau));
    breaks.extend(d.discontinuities(start - 2.0 * tau, horizon - 2.0 * tau).into_iter().map(|t| t + 2.0 * tau));
    breaks.sort_by(f64::total_cmp);
    let mut k = 0usize;
    while k < total {
        let upto = (k + chunk).min(total);
        let t_hi = start + upto as f64 * h;
        stepper.advance_past(t_hi)?;
        shadow.advance_past(t_hi)?;
        for j in k..=upto {
            let q = start + j as f64 * h - tau;
            let gap = stepper.phi(q)?.0 - shadow.phi(q)?.0;
            if !(gap.abs() < 1e-8) {
                unsettled = q + tau;
            }
        }
        let f = |s: f64| integrand(model, washout, Some(&stepper), eta, s);
        if k == 0 {
            rates.push(f(start));
        }
        for j in k..upto {
            let a = start + j as f64 * h;
            acc += quad::integrate_on_grid(&f, a, a + h, start, h, &breaks);
            values.push(acc);
            rates.push(f(a + h));
        }
        if !acc.is_finite() {
            return Err(Error::ZeroBiomass { t: t_hi });
        }
        stepper.rescale_from(t_hi - 2.0 * tau - 2.0 * h);
        shadow.rescale_from(t_hi - 2.0 * tau - 2.0 * h);
        k = upto;
    }
    Ok(((values, rates), unsettled + tau))
}

/// Floors of one ensemble member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeMember {
    /// `min x` over the final quarter of `[a, a + H]`.
    pub floor: f64,
    /// `min x` over the final quarter of `[a, a + 2H]`.
    pub floor_doubled: f64,
    pub clamp_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    /// Smallest floor over members at horizon `H`.
    pub empirical_delta: f64,
    /// Same at horizon `2H`.
    pub delta_doubled: f64,
    /// `(max − min)/max` of the members' floors at `2H`.
    pub spread: f64,
    /// `|δ(2H) − δ(H)| / δ(2H)`.
    pub doubling_change: f64,
    pub members: Vec<ProbeMember>,
}

impl ProbeReport {
    /// Common floor (spread below 5%) that is stable under doubling (below 5%).
    pub fn passed(&self) -> bool {
        self.empirical_delta > 0.0 && self.spread < 0.05 && self.doubling_change < 0.05
    }
}

/// Integrates one not-null history to twice the horizon and records its floors.
pub fn probe_member(
    model: &ChemostatModel,
    history: &HistorySegment,
    horizon: f64,
    h: f64,
) -> Result<ProbeMember> {
    if !history.is_not_null() {
        return Err(Error::InvalidSpec("probe histories must be not null"));
    }
    let a = history.anchor();
    let traj = integrate(model, history, a + 2.0 * horizon, h)?;
    Ok(ProbeMember {
        floor: traj.min_x_on(a + 0.75 * horizon, a + horizon),
        floor_doubled: traj.min_x_on(a + 1.5 * horizon, a + 2.0 * horizon),
        clamp_count: traj.clamp_count(),
    })
}

/// Reduces member floors to the ensemble report.
pub fn summarize_probe(members: Vec<ProbeMember>) -> Result<ProbeReport> {
    if members.is_empty() {
        return Err(Error::DegenerateInput);
    }
    for (i, m) in members.iter().enumerate() {
        if !(m.floor > 0.0) || !(m.floor_doubled > 0.0) {
            return Err(Error::ProbeFailed {
                member: i,
                floor: m.floor.min(m.floor_doubled),
            });
        }
    }
    let delta = members.iter().map(|m| m.floor).fold(f64::INFINITY, f64::min);
    let doubled = members.iter().map(|m| m.floor_doubled).fold(f64::INFINITY, f64::min);
    let top = members.iter().map(|m| m.floor_doubled).fold(0.0, f64::max);
    Ok(ProbeReport {
        empirical_delta: delta,
        delta_doubled: doubled,
        spread: (top - doubled) / top,
        doubling_change: (doubled - delta).abs() / doubled,
        members,
    })
}

/// Ensemble probe of uniform persistence; refuses models not classified persistent.
pub fn uniform_persistence_probe(
    model: &ChemostatModel,
    histories: &[HistorySegment],
    horizon: f64,
    h: f64,
) -> Result<ProbeReport> {
    let report = threshold_periodic(model)?;
    if report.classification != Classification::Persistent {
        return Err(Error::NotPersistent { lambda: report.lambda });
    }
    let members = histories
        .iter()
        .map(|hist| probe_member(model, hist, horizon, h))
        .collect::<Result<Vec<_>>>()?;
    summarize_probe(members)
}

/// Constants of the persistence proof.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProofConstants {
    /// `M = max{p(2s̄), 1/(4τ+1)}`.
    pub m_bound: f64,
    /// `L = max p'` on `[0, 2s̄]`.
    pub lipschitz: f64,
}

pub fn proof_constants(model: &ChemostatModel) -> ProofConstants {
    let top = 2.0 * model.feed_upper();
    let p = model.uptake();
    let n = 10_000;
    let lipschitz = (0..=n)
        .map(|i| p.deriv(top * i as f64 / n as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    ProofConstants {
        m_bound: phi::proof_m(model),
        lipschitz,
    }
}

/// Least-squares slope of `ln x` at the period marks `a + kω` in `[a, b]`
/// (sampling once per period removes the periodic modulation).
pub fn decay_fit(traj: &Trajectory, omega: f64, a: f64, b: f64) -> Option<LineFit> {
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    let mut t = a;
    while t <= b + 1e-9 * omega {
        let x = traj.x(t);
        if x > 0.0 {
            ts.push(t);
            ys.push(math::ln(x));
        }
        t += omega;
    }
    quad::fit_line(&ts, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_model;
    use crate::signal::EnvironmentSignal;
    use crate::uptake::UptakeFunction;
    use alloc::vec;

    fn constant_model(tau: f64, d: f64, v: f64) -> ChemostatModel {
        make_model(
            tau,
            UptakeFunction::monod(2.0, 1.0).unwrap(),
            EnvironmentSignal::constant(d).unwrap(),
            EnvironmentSignal::constant(v).unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn undelayed_constant_threshold_is_explicit() {
        let r = threshold_periodic(&constant_model(0.0, 0.5, 1.0)).unwrap();
        assert!((r.lambda - (1.0 - 0.5)).abs() < 1e-12);
        assert_eq!(r.classification, Classification::Persistent);
    }

    #[test]
    fn delayed_constant_threshold_sign() {
        for &(tau, d) in &[(0.5, 0.5), (2.0, 0.5), (1.0, 0.2), (3.0, 0.3)] {
            let r = threshold_periodic(&constant_model(tau, d, 1.0)).unwrap();
            let oracle = 1.0 * math::exp(-d * tau) - d;
            assert_eq!(r.lambda > 0.0, oracle > 0.0, "tau={tau} d={d}");
            assert!((r.c_growth_rate - r.lambda).abs() < 1e-6);
        }
    }

    #[test]
    fn band_and_classification() {
        assert_eq!(Classification::of(1e-8, 1e-7), Classification::Indeterminate);
        assert_eq!(Classification::of(-1e-6, 1e-7), Classification::Extinct);
    }

    #[test]
    fn proof_constants_of_monod_and_linear() {
        let c = proof_constants(&constant_model(0.5, 0.5, 1.0));
        assert!((c.lipschitz - 2.0).abs() < 1e-12);
        assert!((c.m_bound - (4.0 / 3.0f64).max(1.0 / 3.0)).abs() < 1e-12);
        let lin = make_model(
            0.0,
            UptakeFunction::linear(0.2).unwrap(),
            EnvironmentSignal::constant(0.5).unwrap(),
            EnvironmentSignal::constant(1.0).unwrap(),
            None,
        )
        .unwrap();
        let c = proof_constants(&lin);
        assert!((c.lipschitz - 0.2).abs() < 1e-12);
        assert_eq!(c.m_bound, 1.0);
    }

    #[test]
    fn probe_refuses_extinct_model() {
        let m = constant_model(2.0, 0.5, 1.0);
        let h = HistorySegment::constant(2.0, 0.0, 0.5, 0.5).unwrap();
        assert!(matches!(
            uniform_persistence_probe(&m, &[h], 20.0, 0.125),
            Err(Error::NotPersistent { .. })
        ));
    }

    #[test]
    fn constant_window_margin_is_linear_in_length() {
        let (tau, d) = (0.5, 0.5);
        let m = constant_model(tau, d, 1.0);
        let lambda = threshold_periodic(&m).unwrap().lambda;
        let eta = lambda / 2.0;
        let r = window_condition_general(&m, eta, 4.0, 160.0).unwrap();
        assert!(r.passed);
        let (t1, t2) = r.worst_window;
        assert!((r.worst_margin - (lambda - eta) * (t2 - t1)).abs() < 1e-6, "{r:?}");
        let fail = window_condition_general(&constant_model(2.0, 0.5, 1.0), 1e-3, 4.0, 160.0).unwrap();
        assert!(!fail.passed);
        let _ = vec![0];
    }
}
