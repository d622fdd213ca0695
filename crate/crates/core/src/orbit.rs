//! The positive periodic orbit of a persistent periodic model, found as the
//! fixed point of the period map on history segments.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::history::HistorySegment;
use crate::integrator::{compute_psi, integrate, Trajectory, E, S, X, Y};
use crate::math;
use crate::model::ChemostatModel;
use crate::persistence::{threshold_periodic, Classification};
use crate::quad;
use crate::washout::WashoutSolution;

/// Knobs of the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitOptions {
    /// Integration step; must divide `τ` when `τ > 0`.
    pub h: f64,
    /// Sup distance between consecutive iterates that ends the iteration.
    pub tol: f64,
    pub max_periods: usize,
    /// Geometric extrapolation of the iterates every third period.
    pub accelerate: bool,
}

impl OrbitOptions {
    /// `h = τ/16`, or `ω/256` without delay.
    pub fn for_model(model: &ChemostatModel) -> Self {
        let tau = model.tau();
        let omega = model.period().unwrap_or(1.0);
        Self {
            h: if tau > 0.0 { tau / 16.0 } else { omega / 256.0 },
            tol: 1e-8,
            max_periods: 2000,
            accelerate: false,
        }
    }
}

/// One application of the period map: integrate `ω` from the segment and
/// return the trailing window, moved back to the original anchor.
pub fn poincare_map(model: &ChemostatModel, segment: &HistorySegment, h: f64) -> Result<HistorySegment> {
    let omega = model.period().ok_or(Error::NotPeriodic)?;
    let a = segment.anchor();
    let traj = integrate(model, segment, a + omega, h)?;
    Ok(traj.segment_at(a + omega)?.reanchored(a))
}

#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub segment: HistorySegment,
    /// Distance between the segment and its image, re-measured after convergence.
    pub residual: f64,
    pub orbit_identity_residual: f64,
    pub min_x: f64,
    /// Fitted per-period slope of `ln d_k` during the iteration.
    pub attraction_rate: Option<f64>,
    pub iterations: usize,
    pub h: f64,
    pub lambda: f64,
}

/// Iterates the period map from `initial` until consecutive iterates agree to `opts.tol`.
pub fn find_periodic_orbit(
    model: &ChemostatModel,
    initial: &HistorySegment,
    opts: &OrbitOptions,
) -> Result<PeriodicOrbit> {
    let omega = model.period().ok_or(Error::NotPeriodic)?;
    let threshold = threshold_periodic(model)?;
    if threshold.classification != Classification::Persistent {
        return Err(Error::NotPersistent { lambda: threshold.lambda });
    }
    if !initial.is_not_null() {
        return Err(Error::InvalidSpec("initial segment must be not null"));
    }
    // slow dynamics near the threshold
    let scaled = math::ceil(50.0 / (threshold.lambda * omega)) as usize;
    let max_periods = opts.max_periods.max(scaled);
    let mut current = initial.clone();
    let mut distances = Vec::new();
    let mut previous: Option<HistorySegment> = None;
    let mut last_ratio = f64::NAN;
    for k in 0..max_periods {
        let next = poincare_map(model, &current, opts.h)?;
        let d = current.distance(&next);
        if let Some(&prev) = distances.last() {
            last_ratio = d / prev;
        }
        distances.push(d);
        if d < opts.tol {
            return finish(model, next, &distances, opts.h, threshold.lambda, k + 1);
        }
        let accelerated = opts.accelerate && k % 3 == 2 && last_ratio > 0.0 && last_ratio < 0.95;
        previous = Some(if accelerated {
            // x_∞ ≈ x_k + r/(1−r)·(x_{k+1} − x_k)
            let jump = current.lerp(&next, 1.0 / (1.0 - last_ratio));
            current = clamp_nonnegative(jump);
            next
        } else {
            core::mem::replace(&mut current, next)
        });
    }
    let _ = previous;
    Err(Error::NoConvergence {
        iterations: max_periods,
        last_ratio,
    })
}

fn clamp_nonnegative(seg: HistorySegment) -> HistorySegment {
    let samples: Vec<(f64, f64, f64)> = seg.samples().collect();
    if samples.iter().all(|&(_, s, x)| s >= 0.0 && x >= 0.0) {
        return seg;
    }
    let s = samples.iter().map(|v| v.1.max(0.0)).collect();
    let x = samples.iter().map(|v| v.2.max(0.0)).collect();
    HistorySegment::from_samples(seg.tau(), seg.anchor(), s, x).unwrap_or(seg)
}

fn finish(
    model: &ChemostatModel,
    segment: HistorySegment,
    distances: &[f64],
    h: f64,
    lambda: f64,
    iterations: usize,
) -> Result<PeriodicOrbit> {
    let image = poincare_map(model, &segment, h)?;
    let residual = segment.distance(&image);
    let omega = model.period().ok_or(Error::NotPeriodic)?;
    let a = segment.anchor();
    let traj = integrate(model, &segment, a + omega + 2.0 * model.tau(), h)?;
    let min_x = traj.min_x_on(a, a + omega).min(segment.min_x());
    let identity = lemma_identity_residual(&traj, a, omega);
    let tail: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .skip(distances.len() / 3)
        .filter(|(_, d)| **d > 1e-13)
        .map(|(k, d)| (k as f64, math::ln(*d)))
        .collect();
    let attraction_rate = if tail.len() >= 3 {
        let (ks, ls): (Vec<f64>, Vec<f64>) = tail.into_iter().unzip();
        quad::fit_line(&ks, &ls).map(|f| f.slope)
    } else {
        None
    };
    Ok(PeriodicOrbit {
        segment,
        residual,
        orbit_identity_residual: identity,
        min_x,
        attraction_rate,
        iterations,
        h,
        lambda,
    })
}

/// `max |x(t) − (x+y)(t−τ)·e^{E(t−τ)−E(t)}|` over nodes of `[a+τ, a+τ+ω]`.
fn lemma_identity_residual(traj: &Trajectory, a: f64, omega: f64) -> f64 {
    let tau = traj.tau();
    traj.nodes()
        .filter(|(t, _)| *t >= a + tau - 1e-9 && *t <= a + tau + omega + 1e-9)
        .map(|(t, v)| {
            let back = traj.state(t - tau);
            (v[X] - (back[X] + back[Y]) * math::exp(back[E] - v[E])).abs()
        })
        .fold(0.0, f64::max)
}

/// Residuals of the orbit identities, measured without thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitVerification {
    /// Delayed-biomass identity `x(t) = (x+y)(t−τ)e^{−∫_{t−τ}^t D}`.
    pub identity_residual: f64,
    /// `⟨p(s)ψ⟩ − ⟨D⟩` over one period of the orbit.
    pub mean_exponent: f64,
    /// Residual of the `ψ` fixed-point identity along the orbit.
    pub psi_identity_residual: f64,
    /// `max |y − x(e^{dτ} − 1)|` for constant environments.
    pub y_relation_residual: Option<f64>,
    pub min_x: f64,
}

/// Thresholds used by [`verify_orbit`].
pub const IDENTITY_TOL: f64 = 1e-6;
pub const MEAN_EXPONENT_TOL: f64 = 1e-7;

/// Measures the orbit identities over one period.
pub fn measure_orbit(model: &ChemostatModel, orbit: &PeriodicOrbit) -> Result<OrbitVerification> {
    let omega = model.period().ok_or(Error::NotPeriodic)?;
    let tau = model.tau();
    let a = orbit.segment.anchor();
    let traj = integrate(model, &orbit.segment, a + 2.0 * omega + 2.0 * tau, orbit.h)?;
    let psi = compute_psi(model, &traj)?;
    let p = model.uptake();
    let breaks = model.dilution().discontinuities(a, a + omega);
    let integrand = |t: f64| p.eval(traj.s(t)) * psi.eval(t);
    let uptake = quad::integrate_on_grid(&integrand, a, a + omega, a, orbit.h, &breaks) / omega;
    let mean_exponent = uptake - model.dilution_mean()?;
    let y_relation_residual = model.is_autonomous().then(|| {
        let d = model.dilution().eval(0.0);
        let k = math::exp(d * tau) - 1.0;
        traj.nodes()
            .filter(|(t, _)| *t <= a + omega + 1e-9)
            .map(|(_, v)| (v[Y] - v[X] * k).abs())
            .fold(0.0, f64::max)
    });
    Ok(OrbitVerification {
        identity_residual: lemma_identity_residual(&traj, a, omega),
        mean_exponent,
        psi_identity_residual: psi.identity_residual_on(model, &traj, a + 2.0 * tau, a + 2.0 * tau + omega),
        y_relation_residual,
        min_x: traj.min_x_on(a, a + omega),
    })
}

/// Measures the orbit identities and fails on any breach.
pub fn verify_orbit(model: &ChemostatModel, orbit: &PeriodicOrbit) -> Result<OrbitVerification> {
    let v = measure_orbit(model, orbit)?;
    if !(v.identity_residual < IDENTITY_TOL) {
        return Err(Error::IdentityViolated {
            identity: "delayed biomass",
            residual: v.identity_residual,
        });
    }
    if !(v.mean_exponent.abs() < MEAN_EXPONENT_TOL) {
        return Err(Error::IdentityViolated {
            identity: "zero mean growth exponent",
            residual: v.mean_exponent.abs(),
        });
    }
    if !(v.psi_identity_residual < IDENTITY_TOL) {
        return Err(Error::IdentityViolated {
            identity: "psi fixed point",
            residual: v.psi_identity_residual,
        });
    }
    if let Some(r) = v.y_relation_residual {
        if !(r < IDENTITY_TOL) {
            return Err(Error::IdentityViolated {
                identity: "constant-environment y relation",
                residual: r,
            });
        }
    }
    Ok(v)
}

/// Decay of one perturbation towards the orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationDecay {
    pub initial_distance: f64,
    pub distances: Vec<f64>,
    /// Least-squares slope of `ln d_k` per period over the geometric tail.
    pub slope: f64,
    pub r_squared: f64,
    /// `ln(d_{k+1}/d_k)` at the end of the tail.
    pub tail_log_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractionReport {
    pub members: Vec<PerturbationDecay>,
    /// Largest relative disagreement between member slopes.
    pub slope_spread: f64,
    /// Largest `ε < ⟨D⟩/2` with `J(ε) ≤ 0`, with `m` measured on the orbit.
    pub envelope_epsilon: Option<f64>,
}

/// Fixed point refined until its residual stops shrinking.
fn refine(model: &ChemostatModel, orbit: &PeriodicOrbit) -> Result<(HistorySegment, f64)> {
    let mut seg = orbit.segment.clone();
    let mut best = f64::INFINITY;
    for _ in 0..400 {
        let next = poincare_map(model, &seg, orbit.h)?;
        let d = seg.distance(&next);
        seg = next;
        if !(d < 0.9 * best) {
            best = best.min(d);
            break;
        }
        best = d;
    }
    Ok((seg, best))
}

/// Iterates each perturbed segment alongside the orbit and fits the
/// per-period decay of the distance.
pub fn attraction_rate(
    model: &ChemostatModel,
    orbit: &PeriodicOrbit,
    perturbations: &[HistorySegment],
    max_periods: usize,
) -> Result<AttractionReport> {
    let (reference, noise) = refine(model, orbit)?;
    let floor = (1e3 * noise).max(1e-13);
    let mut members = Vec::new();
    for pert in perturbations {
        let pert = pert.reanchored(reference.anchor());
        let d0 = pert.distance(&reference);
        if !(d0 > floor) {
            return Err(Error::DegenerateInput);
        }
        let mut seg = pert;
        let mut distances = alloc::vec![d0];
        for _ in 0..max_periods {
            seg = poincare_map(model, &seg, orbit.h)?;
            let d = seg.distance(&reference);
            distances.push(d);
            if d < floor {
                break;
            }
        }
        let usable: Vec<usize> = (0..distances.len()).filter(|&k| distances[k] > floor).collect();
        let skip = usable.len() / 5;
        let tail = &usable[skip..];
        if tail.len() < 5 {
            return Err(Error::FitFailed { r_squared: f64::NAN });
        }
        let ks: Vec<f64> = tail.iter().map(|&k| k as f64).collect();
        let ls: Vec<f64> = tail.iter().map(|&k| math::ln(distances[k])).collect();
        let fit = quad::fit_line(&ks, &ls).ok_or(Error::FitFailed { r_squared: f64::NAN })?;
        if !(fit.r_squared > 0.99) || !(fit.slope < 0.0) {
            return Err(Error::FitFailed { r_squared: fit.r_squared });
        }
        let last = tail[tail.len() - 1];
        let tail_log_ratio = math::ln(distances[last] / distances[last - 1]);
        members.push(PerturbationDecay {
            initial_distance: d0,
            distances,
            slope: fit.slope,
            r_squared: fit.r_squared,
            tail_log_ratio,
        });
    }
    if members.is_empty() {
        return Err(Error::DegenerateInput);
    }
    let mut spread = 0.0_f64;
    for a in &members {
        for b in &members {
            spread = spread.max((a.slope - b.slope).abs() / a.slope.abs().max(b.slope.abs()));
        }
    }
    Ok(AttractionReport {
        members,
        slope_spread: spread,
        envelope_epsilon: envelope_epsilon(model, &reference, orbit.h).ok().flatten(),
    })
}

/// Largest `ε ∈ (0, ⟨D⟩/2)` with
/// `J(ε) = −m + max(x p(s)/(x+y))·(e^{τε} − 1) + 3ε/2 ≤ 0`,
/// `m = min x p'(s)` on the orbit. `None` when `J(0) > 0`.
fn envelope_epsilon(model: &ChemostatModel, segment: &HistorySegment, h: f64) -> Result<Option<f64>> {
    let omega = model.period().ok_or(Error::NotPeriodic)?;
    let a = segment.anchor();
    let traj = integrate(model, segment, a + omega, h)?;
    let p = model.uptake();
    let (mut m, mut top) = (f64::INFINITY, 0.0_f64);
    for (_, v) in traj.nodes() {
        m = m.min(v[X] * p.deriv(v[S]));
        let pool = v[X] + v[Y];
        if pool > 0.0 {
            top = top.max(v[X] * p.eval(v[S]) / pool);
        }
    }
    let tau = model.tau();
    let j = |eps: f64| -m + top * (math::exp(tau * eps) - 1.0) + 1.5 * eps;
    let cap = 0.5 * model.dilution_mean()?;
    if !(j(0.0) < 0.0) {
        return Ok(None);
    }
    if j(cap) <= 0.0 {
        return Ok(Some(cap));
    }
    Ok(quad::bisect(j, 0.0, cap, 1e-12 * cap))
}

/// Radius `z*(0) + 6s̄ + 3s̄·p(3s̄)·τ + s̄` bounding all period-map iterates
/// of segments with norm at most `3s̄`.
pub fn containment_radius(model: &ChemostatModel, washout: &WashoutSolution) -> f64 {
    let sb = model.feed_upper();
    washout.eval(0.0) + 6.0 * sb + 3.0 * sb * model.uptake().eval(3.0 * sb) * model.tau() + sb
}
