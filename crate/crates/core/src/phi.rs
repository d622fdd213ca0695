//! The ratio function `φ(t) = c(t)/c(t+τ)·e^{−∫_t^{t+τ} D}` built from the
//! solution `c` of the delay equation linearized at the washout solution,
//!
//! ```text
//! c'(t) = −D(t)c(t) + c(t−τ)·p(z*(t−τ))·e^{−∫_{t−τ}^t D}.
//! ```
//!
//! Only ratios of `c` enter `φ`, so `c` is renormalized every period; the
//! periodic `φ` is reached by running `c` forward until `φ` repeats.

use alloc::vec::Vec;

use crate::dense::Dense;
use crate::error::{Error, Result};
use crate::math;
use crate::model::ChemostatModel;
use crate::quad;
use crate::signal::Side;
use crate::steps;
use crate::washout::{period_grid, WashoutSolution, BASE_GRID};

const C: usize = 0;
const E: usize = 1;

/// Knobs of the periodic `φ` iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiOptions {
    /// Sup distance between consecutive periods of `φ` that ends the iteration.
    pub tol: f64,
    pub max_periods: usize,
    /// Steps of the `c` integration per delay (default: [`BASE_GRID`] per
    /// delay or per period, whichever is finer).
    pub steps_per_delay: Option<usize>,
    /// Samples of `φ` per period (default: [`period_grid`]).
    pub samples_per_period: Option<usize>,
}

impl Default for PhiOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_periods: 5000,
            steps_per_delay: None,
            samples_per_period: None,
        }
    }
}

/// Method-of-steps RK4 for `(c, E)` with `E` the cumulative dilution.
pub(crate) struct CStepper<'a> {
    model: &'a ChemostatModel,
    washout: &'a WashoutSolution,
    tau: f64,
    h: f64,
    dense: Dense<2>,
}

impl<'a> CStepper<'a> {
    /// History `c = history(t)` on `[anchor − τ, anchor]`, `E(anchor) = 0`.
    pub(crate) fn new(
        model: &'a ChemostatModel,
        washout: &'a WashoutSolution,
        anchor: f64,
        n: usize,
        history: &dyn Fn(f64) -> f64,
    ) -> Self {
        let tau = model.tau();
        let h = tau / n as f64;
        let dil = model.dilution();
        let times: Vec<f64> = (0..=n).map(|k| anchor - tau + k as f64 * h).collect();
        let c: Vec<f64> = times.iter().map(|&t| history(t)).collect();
        let mut e = alloc::vec![0.0; n + 1];
        for k in (0..n).rev() {
            let (a, b) = (times[k], times[k + 1]);
            e[k] = e[k + 1] - h / 6.0 * (dil.eval(a) + 4.0 * dil.eval(0.5 * (a + b)) + dil.eval_left(b));
        }
        let mut dense = Dense::with_capacity(times[0], h, 4 * n);
        for k in 0..=n {
            let dc = if k == 0 {
                (c[1] - c[0]) / h
            } else if k == n {
                (c[n] - c[n - 1]) / h
            } else {
                (c[k + 1] - c[k - 1]) / (2.0 * h)
            };
            dense.push(
                [c[k], e[k]],
                [dc, dil.eval_left(times[k])],
                [dc, dil.eval(times[k])],
            );
        }
        Self {
            model,
            washout,
            tau,
            h,
            dense,
        }
    }

    fn field(&self, t: f64, side: Side, st: &[f64; 2], lag: &[f64; 2]) -> [f64; 2] {
        c_field(self.model, self.washout, t, side, st, lag)
    }

    /// Steps until the last node is at or beyond `t`.
    pub(crate) fn advance_past(&mut self, t: f64) -> Result<()> {
        let (model, washout, tau, h) = (self.model, self.washout, self.tau, self.h);
        let f = |t: f64, side: Side, st: &[f64; 2], lag: &[f64; 2]| c_field(model, washout, t, side, st, lag);
        let dense = &mut self.dense;
        while dense.end() < t - 1e-9 * h {
            let i = dense.len() - 1;
            let ti = dense.node_time(i);
            let y0 = *dense.node(i);
            let (next, k1) = steps::rk4_step(dense, tau, ti, h, &y0, &f);
            *dense.d_right_mut(i) = k1;
            if !next[C].is_finite() {
                return Err(Error::BlowUp { t: ti + h });
            }
            dense.push(next, next, next);
            let dl = steps::node_field(dense, tau, ti + h, Side::Left, &next, &f);
            *dense.d_left_mut(i + 1) = dl;
            *dense.d_right_mut(i + 1) = dl;
        }
        Ok(())
    }

    fn c(&self, t: f64) -> f64 {
        steps::read(&self.dense, t)[C]
    }

    /// Largest `|c|` on stored nodes at or after `t`.
    fn sup_from(&self, t: f64) -> f64 {
        self.dense
            .values()
            .filter(|(s, _)| *s >= t - 1e-9 * self.h)
            .map(|(_, v)| v[C].abs())
            .fold(0.0, f64::max)
    }

    /// Divides `c` by `k` and re-zeroes `E` at the first node.
    fn renormalize(&mut self, k: f64) {
        self.dense.scale_component(C, 1.0 / k);
        let e0 = self.dense.node(0)[E];
        self.dense.shift_component(E, -e0);
    }

    /// Renormalizes by the sup of `c` from `t` on and drops older nodes.
    pub(crate) fn rescale_from(&mut self, t: f64) {
        let scale = self.sup_from(t);
        if scale > 0.0 {
            self.renormalize(scale);
        }
        self.forget_before(t);
    }

    /// Drops nodes older than `t`.
    fn forget_before(&mut self, t: f64) {
        let n = math::floor((t - self.dense.start()) / self.h - 1e-9).max(0.0) as usize;
        self.dense.drop_front(n.saturating_sub(1));
    }

    /// `(φ(t), φ'(t⁻), φ'(t⁺))`; needs `c` on `[t − τ, t + τ]`.
    pub(crate) fn phi(&self, t: f64) -> Result<(f64, f64, f64)> {
        let (a, b) = (steps::read(&self.dense, t), steps::read(&self.dense, t + self.tau));
        if !(a[C] > 0.0 && b[C] > 0.0) {
            return Err(Error::ZeroBiomass { t });
        }
        let phi = a[C] / b[C] * math::exp(a[E] - b[E]);
        let f = |q: f64, side: Side, st: &[f64; 2], lag: &[f64; 2]| self.field(q, side, st, lag);
        let dil = self.model.dilution();
        let rate = |side: Side| {
            let da = steps::node_field(&self.dense, self.tau, t, side, &a, &f);
            let db = steps::node_field(&self.dense, self.tau, t + self.tau, side, &b, &f);
            phi * (da[C] / a[C] - db[C] / b[C] + dil.eval_side(t, side) - dil.eval_side(t + self.tau, side))
        };
        Ok((phi, rate(Side::Left), rate(Side::Right)))
    }
}

fn c_field(
    model: &ChemostatModel,
    washout: &WashoutSolution,
    t: f64,
    side: Side,
    st: &[f64; 2],
    lag: &[f64; 2],
) -> [f64; 2] {
    let d = model.dilution().eval_side(t, side);
    let f = model.uptake().eval(washout.eval(t - model.tau()));
    [-d * st[C] + lag[C] * f * math::exp(lag[E] - st[E]), d]
}

/// Periodic `φ` over one period, with the diagnostics of its computation.
#[derive(Debug, Clone)]
pub struct PhiFunction {
    period: f64,
    dense: Dense<1>,
    c_normalized: Vec<f64>,
    c_growth_exponent: f64,
    periodicity_residual: f64,
    identity_residual: f64,
    periods: usize,
    last_ratio: f64,
}

impl PhiFunction {
    /// `φ(t)`, extended periodically.
    pub fn eval(&self, t: f64) -> f64 {
        let u = math::rem_euclid(t, self.period);
        match self.dense.node_at(u) {
            Some(i) => self.dense.node(i)[0],
            None => self.dense.eval(u, 0),
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Samples `(t, φ, c/sup c)` on the period grid `[0, ω]`.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.dense
            .values()
            .zip(self.c_normalized.iter())
            .map(|((t, v), c)| (t, v[0], *c))
    }

    pub fn grid_len(&self) -> usize {
        self.dense.len() - 1
    }

    /// `ln(c(t+ω)/c(t))` of the un-normalized `c` in the last period; divided
    /// by `ω` it approaches the threshold `λ`.
    pub fn c_growth_exponent(&self) -> f64 {
        self.c_growth_exponent
    }

    /// `|φ(ω) − φ(0)|`.
    pub fn periodicity_residual(&self) -> f64 {
        self.periodicity_residual
    }

    /// `max |φ(t) − exp(−∫_{t−τ}^t φ·p(z*))|` over one period.
    pub fn identity_residual(&self) -> f64 {
        self.identity_residual
    }

    /// Periods integrated until convergence.
    pub fn periods(&self) -> usize {
        self.periods
    }

    /// Ratio of the last two period-to-period distances.
    pub fn last_ratio(&self) -> f64 {
        self.last_ratio
    }

    pub fn min(&self) -> f64 {
        self.dense.values().map(|(_, v)| v[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.dense.values().map(|(_, v)| v[0]).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Grid step of the `c` integration.
pub(crate) fn c_steps(model: &ChemostatModel, omega: f64, opts: &PhiOptions) -> usize {
    opts.steps_per_delay.unwrap_or_else(|| {
        let tau = model.tau();
        BASE_GRID * math::ceil(tau / omega - 1e-9).max(1.0) as usize
    })
}

/// Periodic `φ` from the history `c ≡ 1`.
pub fn compute_phi_periodic(model: &ChemostatModel, washout: &WashoutSolution) -> Result<PhiFunction> {
    compute_phi_periodic_with(model, washout, &PhiOptions::default(), &|_| 1.0)
}

/// Periodic `φ` from a given positive `c` history on `[−τ, 0]`.
pub fn compute_phi_periodic_with(
    model: &ChemostatModel,
    washout: &WashoutSolution,
    opts: &PhiOptions,
    history: &dyn Fn(f64) -> f64,
) -> Result<PhiFunction> {
    let omega = model.period().ok_or(Error::NotPeriodic)?;
    let tau = model.tau();
    let n_phi = opts.samples_per_period.unwrap_or_else(|| period_grid(omega, tau));
    let dt = omega / n_phi as f64;
    if tau == 0.0 {
        return Ok(undelayed_phi(model, washout, omega, n_phi));
    }
    if !(history(0.0) > 0.0) {
        return Err(Error::InvalidSpec("c history must be positive at the anchor"));
    }
    let mut stepper = CStepper::new(model, washout, 0.0, c_steps(model, omega, opts), history);
    let mut prev: Option<Vec<f64>> = None;
    let mut prev_diff = f64::NAN;
    let mut last_ratio = f64::NAN;
    for k in 0..opts.max_periods {
        let base = k as f64 * omega;
        stepper.advance_past(base + omega + tau)?;
        let mut dense = Dense::with_capacity(0.0, dt, n_phi + 1);
        for j in 0..=n_phi {
            let (v, dl, dr) = stepper.phi(base + j as f64 * dt)?;
            dense.push([v], [dl], [dr]);
        }
        let growth = math::ln(stepper.c(base + omega) / stepper.c(base));
        let current: Vec<f64> = dense.values().map(|(_, v)| v[0]).collect();
        let diff = match &prev {
            Some(p) => p.iter().zip(&current).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            None => f64::INFINITY,
        };
        if diff.is_finite() && prev_diff.is_finite() && prev_diff > 0.0 {
            last_ratio = diff / prev_diff;
        }
        if diff < opts.tol {
            let c_raw: Vec<f64> = (0..=n_phi).map(|j| stepper.c(base + j as f64 * dt)).collect();
            let sup = c_raw.iter().fold(0.0_f64, |m, v| m.max(*v));
            let mut phi = PhiFunction {
                period: omega,
                periodicity_residual: (current[n_phi] - current[0]).abs(),
                dense,
                c_normalized: c_raw.iter().map(|v| v / sup).collect(),
                c_growth_exponent: growth,
                identity_residual: 0.0,
                periods: k + 1,
                last_ratio,
            };
            phi.identity_residual = identity_residual(model, washout, &phi);
            return Ok(phi);
        }
        prev_diff = diff;
        prev = Some(current);
        let scale = stepper.sup_from(base + omega);
        stepper.renormalize(scale);
        stepper.forget_before(base + omega - tau);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_periods,
        last_ratio,
    })
}

/// `τ = 0`: `φ ≡ 1` and `c = exp ∫(p(z*) − D)`.
fn undelayed_phi(model: &ChemostatModel, washout: &WashoutSolution, omega: f64, n: usize) -> PhiFunction {
    let dt = omega / n as f64;
    let rate = |t: f64| model.uptake().eval(washout.eval(t)) - model.dilution().eval(t);
    let breaks = model.dilution().discontinuities(0.0, omega);
    let mut log_c = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    log_c.push(0.0);
    for j in 0..n {
        let (a, b) = (j as f64 * dt, (j + 1) as f64 * dt);
        acc += quad::integrate_on_grid(&rate, a, b, 0.0, dt, &breaks);
        log_c.push(acc);
    }
    let top = log_c.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let mut dense = Dense::with_capacity(0.0, dt, n + 1);
    for _ in 0..=n {
        dense.push([1.0], [0.0], [0.0]);
    }
    PhiFunction {
        period: omega,
        dense,
        c_normalized: log_c.iter().map(|v| math::exp(v - top)).collect(),
        c_growth_exponent: acc,
        periodicity_residual: 0.0,
        identity_residual: 0.0,
        periods: 0,
        last_ratio: 0.0,
    }
}

/// Kinks of `φ` and `z*`: jumps of `D` at `t` and at `t + τ`.
pub(crate) fn kinks(model: &ChemostatModel, a: f64, b: f64) -> Vec<f64> {
    let tau = model.tau();
    let d = model.dilution();
    let mut out = d.discontinuities(a, b);
    out.extend(d.discontinuities(a + tau, b + tau).into_iter().map(|t| t - tau));
    out.sort_by(f64::total_cmp);
    out.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    out
}

fn identity_residual(model: &ChemostatModel, washout: &WashoutSolution, phi: &PhiFunction) -> f64 {
    let tau = model.tau();
    let omega = phi.period;
    let dt = phi.dense.step();
    let breaks = kinks(model, -tau, omega);
    let integrand = |t: f64| phi.eval(t) * model.uptake().eval(washout.eval(t));
    phi.dense
        .values()
        .map(|(t, v)| {
            let integral = quad::integrate_on_grid(&integrand, t - tau, t, 0.0, dt, &breaks);
            (v[0] - math::exp(-integral)).abs()
        })
        .fold(0.0, f64::max)
}

/// Outcome of comparing two `φ`-like functions against the explicit
/// contraction bound `3M√((t−t₀)/inf f)·(1−e^{−Mτ})^{(t−t₀)/(2τ)−1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub m_bound: f64,
    pub inf_f: f64,
    pub t0: f64,
    /// Grid points checked (all strictly after `t0`).
    pub points: usize,
    /// Largest `|φ₁ − φ₂|` over the checked points.
    pub max_difference: f64,
    /// Largest `|φ₁ − φ₂| / bound` and where it occurs.
    pub max_ratio: f64,
    pub worst_t: f64,
    /// `|φ₁ − φ₂|` at `t0` itself, where the bound vanishes.
    pub difference_at_t0: f64,
}

/// The explicit contraction bound at `t ≥ t0`.
pub fn contraction_bound(m: f64, inf_f: f64, tau: f64, dt: f64) -> f64 {
    3.0 * m * math::sqrt(dt / inf_f) * math::powf(1.0 - math::exp(-m * tau), dt / (2.0 * tau) - 0.5)
}

/// Runs `c` from two histories on `[−τ, 0]` and checks the explicit bound
/// on `|φ₁ − φ₂|` at every grid point of `(τ, horizon]`.
///
/// Both functions satisfy the fixed-point identity for `t ≥ τ`, so `t₀ = τ`.
pub fn lemma_contraction_check(
    model: &ChemostatModel,
    washout: &WashoutSolution,
    history1: &dyn Fn(f64) -> f64,
    history2: &dyn Fn(f64) -> f64,
    horizon: f64,
) -> Result<ContractionReport> {
    let tau = model.tau();
    if !(tau > 0.0) {
        return Err(Error::InvalidSpec("the contraction bound needs a positive delay"));
    }
    let omega = model.period().ok_or(Error::NotPeriodic)?;
    let t0 = tau;
    if !(horizon > t0) {
        return Err(Error::HorizonTooShort { needed: t0, horizon });
    }
    let n = c_steps(model, omega, &PhiOptions::default());
    let h = tau / n as f64;
    let mut runs = [
        CStepper::new(model, washout, 0.0, n, history1),
        CStepper::new(model, washout, 0.0, n, history2),
    ];
    let constants = proof_m(model);
    let inf_f = washout.samples().map(|(_, z)| model.uptake().eval(z)).fold(f64::INFINITY, f64::min);
    for run in runs.iter_mut() {
        run.advance_past(t0 + tau)?;
    }
    let d0a = runs[0].phi(t0)?.0;
    let d0b = runs[1].phi(t0)?.0;
    let mut report = ContractionReport {
        m_bound: constants,
        inf_f,
        t0,
        points: 0,
        max_difference: 0.0,
        max_ratio: 0.0,
        worst_t: t0,
        difference_at_t0: (d0a - d0b).abs(),
    };
    // chunks of one period keep memory flat
    let mut k = 1usize;
    let mut chunk_start = t0;
    while chunk_start < horizon - 1e-9 * h {
        let chunk_end = (chunk_start + omega).min(horizon);
        for run in runs.iter_mut() {
            run.advance_past(chunk_end + tau)?;
        }
        loop {
            let t = t0 + k as f64 * h;
            if t > chunk_end + 1e-9 * h {
                break;
            }
            let lhs = (runs[0].phi(t)?.0 - runs[1].phi(t)?.0).abs();
            let rhs = contraction_bound(constants, inf_f, tau, t - t0);
            report.points += 1;
            report.max_difference = report.max_difference.max(lhs);
            let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.worst_t = t;
            }
            if !(lhs < rhs) && lhs > 0.0 {
                return Err(Error::BoundViolated { t, lhs, rhs });
            }
            k += 1;
        }
        for run in runs.iter_mut() {
            let scale = run.sup_from(chunk_end - tau);
            run.renormalize(scale);
            run.forget_before(chunk_end - tau);
        }
        chunk_start = chunk_end;
    }
    Ok(report)
}

/// `M = max{p(2s̄), 1/(4τ+1)}`.
pub(crate) fn proof_m(model: &ChemostatModel) -> f64 {
    let p = model.uptake().eval(2.0 * model.feed_upper());
    p.max(1.0 / (4.0 * model.tau() + 1.0))
}
