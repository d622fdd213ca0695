//! The washout solution `z*`: the bounded solution of `z' = D(s⁰ − z)`,
//! i.e. the substrate level of the reactor without biomass.

use crate::dense::Dense;
use crate::error::{Error, Result};
use crate::math;
use crate::model::ChemostatModel;
use crate::signal::Side;
use crate::steps;

/// Points per period (or per delay, whichever is finer) of the default grids.
pub const BASE_GRID: usize = 256;
/// Refinement of the washout grid over [`BASE_GRID`].
const WASHOUT_REFINE: usize = 8;
/// `e^{−∫D}` must fall below this before the general tail is trusted.
const BURN_IN_FACTOR: f64 = 1e-10;

/// Samples per period: [`BASE_GRID`] per period or per delay, whichever is finer.
pub fn period_grid(omega: f64, tau: f64) -> usize {
    let per_delay = if tau > 0.0 { math::ceil(omega / tau - 1e-9).max(1.0) as usize } else { 1 };
    BASE_GRID * per_delay
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WashoutKind {
    /// One period `[0, ω]`, extended periodically.
    Periodic { period: f64 },
    /// `z` from `z(0) = sup s⁰` on `[0, t_max]`; trustworthy after `burn_in`.
    Asymptotic { burn_in: f64 },
}

#[derive(Debug, Clone)]
pub struct WashoutSolution {
    kind: WashoutKind,
    dense: Dense<1>,
    periodicity_residual: f64,
    equation_residual: f64,
}

fn field(model: &ChemostatModel, t: f64, side: Side, z: f64) -> f64 {
    model.dilution().eval_side(t, side) * (model.input().eval_side(t, side) - z)
}

/// RK4 on `[t0, t0 + n·h]` from `z0`, with one-sided node derivatives.
fn solve(model: &ChemostatModel, t0: f64, z0: f64, h: f64, n: usize) -> Result<Dense<1>> {
    let f = |t: f64, side: Side, st: &[f64; 1], _: &[f64; 1]| [field(model, t, side, st[0])];
    let mut dense = Dense::with_capacity(t0, h, n + 1);
    dense.push([z0], [field(model, t0, Side::Left, z0)], [0.0]);
    for i in 0..n {
        let t = t0 + i as f64 * h;
        let y0 = *dense.node(i);
        let (next, k1) = steps::rk4_step(&dense, 0.0, t, h, &y0, &f);
        *dense.d_right_mut(i) = k1;
        if !next[0].is_finite() {
            return Err(Error::BlowUp { t: t + h });
        }
        let te = t + h;
        dense.push(next, [field(model, te, Side::Left, next[0])], [0.0]);
    }
    let last = dense.len() - 1;
    let t = dense.node_time(last);
    let z = dense.node(last)[0];
    dense.d_right_mut(last)[0] = field(model, t, Side::Right, z);
    Ok(dense)
}

/// `∫_a^b D` with the same RK4 weights as the state equations.
fn dilution_integral(model: &ChemostatModel, a: f64, h: f64, n: usize) -> f64 {
    let d = model.dilution();
    (0..n)
        .map(|i| {
            let t = a + i as f64 * h;
            h / 6.0 * (d.eval(t) + 4.0 * d.eval(t + 0.5 * h) + d.eval_left(t + h))
        })
        .sum()
}

/// Periodic washout: `z*(0)` from the one-period fixed-point formula, then
/// one period of `z' = D(s⁰ − z)`.
pub fn compute_washout_periodic(model: &ChemostatModel) -> Result<WashoutSolution> {
    let omega = model.period().ok_or(Error::NotPeriodic)?;
    let mean = model.dilution_mean()?;
    if !(mean > 0.0) {
        return Err(Error::DegenerateDilution { mean });
    }
    let n = WASHOUT_REFINE * period_grid(omega, model.tau());
    let h = omega / n as f64;
    // z(ω) from z(0) = 0 is the numerator of the formula; the flow is affine
    let from_zero = solve(model, 0.0, 0.0, h, n)?;
    let numerator = from_zero.node(n)[0];
    let decay = math::exp(-dilution_integral(model, 0.0, h, n));
    let z0 = numerator / (1.0 - decay);
    let dense = solve(model, 0.0, z0, h, n)?;
    let periodicity_residual = (dense.node(n)[0] - z0).abs();
    let equation_residual = equation_residual(model, &dense, 0.0);
    Ok(WashoutSolution {
        kind: WashoutKind::Periodic { period: omega },
        dense,
        periodicity_residual,
        equation_residual,
    })
}

/// Asymptotic washout for general signals: integrates from `z(0) = sup s⁰`
/// on `[0, t_max]` and certifies the tail after `e^{−∫₀^t D} < 1e−10`.
pub fn compute_washout_general(model: &ChemostatModel, t_max: f64) -> Result<WashoutSolution> {
    let reference = model.period().unwrap_or(1.0);
    let n_ref = WASHOUT_REFINE * period_grid(reference, model.tau());
    let h = reference / n_ref as f64;
    let n = math::ceil(t_max / h - 1e-9).max(1.0) as usize;
    let target = -math::ln(BURN_IN_FACTOR);
    let mut e = 0.0;
    let mut burn_in = None;
    let d = model.dilution();
    for i in 0..n {
        let t = i as f64 * h;
        e += h / 6.0 * (d.eval(t) + 4.0 * d.eval(t + 0.5 * h) + d.eval_left(t + h));
        if e >= target {
            burn_in = Some(t + h);
            break;
        }
    }
    let Some(burn_in) = burn_in else {
        let rate = e / (n as f64 * h);
        return Err(Error::HorizonTooShort {
            needed: if rate > 0.0 { target / rate } else { f64::INFINITY },
            horizon: t_max,
        });
    };
    let dense = solve(model, 0.0, model.input().upper(), h, n)?;
    let equation_residual = equation_residual(model, &dense, burn_in);
    let periodicity_residual = match model.period() {
        Some(w) if burn_in + w <= dense.end() => {
            let z = |t: f64| dense.eval(t, 0);
            (0..64)
                .map(|k| {
                    let t = burn_in + w * k as f64 / 64.0;
                    if t + w > dense.end() { 0.0 } else { (z(t + w) - z(t)).abs() }
                })
                .fold(0.0, f64::max)
        }
        _ => 0.0,
    };
    Ok(WashoutSolution {
        kind: WashoutKind::Asymptotic { burn_in },
        dense,
        periodicity_residual,
        equation_residual,
    })
}

/// `max |z'_interp − D(s⁰ − z)|` at piece midpoints from `from` on.
fn equation_residual(model: &ChemostatModel, dense: &Dense<1>, from: f64) -> f64 {
    let h = dense.step();
    (0..dense.len() - 1)
        .map(|i| dense.node_time(i) + 0.5 * h)
        .filter(|&t| t >= from)
        .map(|t| (dense.deriv(t, 0) - field(model, t, Side::Right, dense.eval(t, 0))).abs())
        .fold(0.0, f64::max)
}

impl WashoutSolution {
    pub fn kind(&self) -> WashoutKind {
        self.kind
    }

    /// `z*(t)`; periodic solutions wrap, asymptotic ones hold their end values.
    pub fn eval(&self, t: f64) -> f64 {
        let u = match self.kind {
            WashoutKind::Periodic { period } => math::rem_euclid(t, period),
            WashoutKind::Asymptotic { .. } => t.clamp(self.dense.start(), self.dense.end()),
        };
        match self.dense.node_at(u) {
            Some(i) => self.dense.node(i)[0],
            None => self.dense.eval(u, 0),
        }
    }

    /// First time from which the solution is a certified approximation of `z*`.
    pub fn valid_from(&self) -> f64 {
        match self.kind {
            WashoutKind::Periodic { .. } => f64::NEG_INFINITY,
            WashoutKind::Asymptotic { burn_in } => burn_in,
        }
    }

    /// Last time covered (infinite for periodic solutions).
    pub fn valid_until(&self) -> f64 {
        match self.kind {
            WashoutKind::Periodic { .. } => f64::INFINITY,
            WashoutKind::Asymptotic { .. } => self.dense.end(),
        }
    }

    pub fn step(&self) -> f64 {
        self.dense.step()
    }

    /// `|z*(ω) − z*(0)|` (periodic), or the sampled tail defect under a
    /// period shift (asymptotic solution of a periodic model).
    pub fn periodicity_residual(&self) -> f64 {
        self.periodicity_residual
    }

    /// Defect of `z' = D(s⁰ − z)` at piece midpoints (tail only for asymptotic).
    pub fn equation_residual(&self) -> f64 {
        self.equation_residual
    }

    /// Grid samples `(t, z)` of the stored span.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.dense.values().map(|(t, v)| (t, v[0]))
    }

    pub fn min(&self) -> f64 {
        self.samples().map(|(_, z)| z).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples().map(|(_, z)| z).fold(f64::NEG_INFINITY, f64::max)
    }
}
