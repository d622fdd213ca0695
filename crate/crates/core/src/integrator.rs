//! Method-of-steps RK4 integration of the delayed chemostat with dense output.
//!
//! The state carried per step is `(s, x, E, y)` where `E(t) = ∫_a^t D` is
//! the cumulative dilution from the anchor `a` and `y` is the substrate
//! already absorbed but not yet converted into biomass. The step divides the
//! delay, so every delayed lookup falls on an interval that is already
//! complete, and no step straddles a multiple of `τ`.

use alloc::vec::Vec;

use crate::dense::Dense;
use crate::error::{Error, Result};
use crate::history::HistorySegment;
use crate::math;
use crate::model::ChemostatModel;
use crate::quad;
use crate::signal::Side;
use crate::steps;
use crate::washout::WashoutSolution;

pub const S: usize = 0;
pub const X: usize = 1;
pub const E: usize = 2;
pub const Y: usize = 3;

/// Biomass below this is flushed to zero.
pub const UNDERFLOW: f64 = 1e-300;
/// States beyond this are treated as a blow-up.
pub const BLOW_UP: f64 = 1e12;

/// Dense solution of the delayed chemostat from one initial history.
#[derive(Debug, Clone)]
pub struct Trajectory {
    tau: f64,
    anchor: f64,
    h: f64,
    anchor_node: usize,
    dense: Dense<4>,
    clamp_count: usize,
    extinct_numerically: bool,
    discontinuous_dilution: bool,
    partial_last: bool,
}

/// Number of steps per delay such that `τ/n` is the coarsest step.
pub fn steps_for_delay(tau: f64, h: f64) -> Result<usize> {
    let r = tau / h;
    let n = math::round(r);
    if !(h > 0.0) || n < 1.0 || (r - n).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::StepNotDividingDelay { tau, h });
    }
    Ok(n as usize)
}

/// Right-hand side on `(s, x, E, y)`; `lag` is the state at `t − τ`.
#[inline]
fn field(model: &ChemostatModel, t: f64, side: Side, st: &[f64; 4], lag: &[f64; 4]) -> [f64; 4] {
    let d = model.dilution().eval_side(t, side);
    let feed = model.input().eval_side(t, side);
    let p = model.uptake();
    let uptake_now = p.eval(st[S]);
    let growth = lag[X] * p.eval(lag[S]) * math::exp(lag[E] - st[E]);
    [
        d * (feed - st[S]) - uptake_now * st[X],
        growth - d * st[X],
        d,
        st[X] * uptake_now - growth - d * st[Y],
    ]
}

/// Integrates from the history anchor to `t_end` with fixed step `h`.
///
/// For `τ > 0` the step must divide `τ` exactly. The last step is shortened
/// if `t_end` is off the grid.
pub fn integrate(
    model: &ChemostatModel,
    history: &HistorySegment,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    let tau = model.tau();
    if (history.tau() - tau).abs() > 1e-12 * tau.max(1.0) {
        return Err(Error::InvalidSpec("history window does not match the model delay"));
    }
    if let Some(index) = history.first_negative() {
        return Err(Error::NegativeHistory { index });
    }
    let anchor = history.anchor();
    if !(t_end > anchor) {
        return Err(Error::InvalidSpec("t_end must lie after the history anchor"));
    }
    let (h, n_hist) = if tau > 0.0 {
        let n = steps_for_delay(tau, h)?;
        (tau / n as f64, n)
    } else {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidSpec("step must be positive"));
        }
        (h, 0)
    };
    let n_steps = math::ceil((t_end - anchor) / h - 1e-9).max(1.0) as usize;
    let mut dense = Dense::with_capacity(anchor - tau, h, n_hist + n_steps + 1);
    seed_history(model, history, h, n_hist, &mut dense);

    let mut traj = Trajectory {
        tau,
        anchor,
        h,
        anchor_node: n_hist,
        dense,
        clamp_count: 0,
        extinct_numerically: false,
        discontinuous_dilution: model.has_discontinuous_dilution(),
        partial_last: false,
    };
    traj.advance(model, t_end)?;
    Ok(traj)
}

/// Fills nodes `0..=n_hist` from the history; `E` by Simpson backwards from
/// the anchor, `y(a)` by quadrature of its defining integral.
fn seed_history(
    model: &ChemostatModel,
    history: &HistorySegment,
    h: f64,
    n_hist: usize,
    dense: &mut Dense<4>,
) {
    let tau = model.tau();
    let anchor = history.anchor();
    let hd = history.dense();
    let times: Vec<f64> = (0..=n_hist)
        .map(|k| anchor - tau + k as f64 * h)
        .collect();
    let aligned = tau > 0.0 && hd.len() == n_hist + 1;

    // E relative to the anchor
    let dil = model.dilution();
    let mut e = alloc::vec![0.0; n_hist + 1];
    for k in (0..n_hist).rev() {
        let (a, b) = (times[k], times[k + 1]);
        let simpson =
            (b - a) / 6.0 * (dil.eval(a) + 4.0 * dil.eval(0.5 * (a + b)) + dil.eval_left(b));
        e[k] = e[k + 1] - simpson;
    }

    for k in 0..=n_hist {
        let t = times[k];
        let (v, dl, dr) = if tau == 0.0 {
            let (s, x) = history.head();
            ([s, x], [0.0; 2], [0.0; 2])
        } else if aligned {
            (*hd.node(k), *hd.d_left(k), *hd.d_right(k))
        } else {
            let v = hd.eval_all(t);
            let d = if hd.len() > 1 {
                [hd.deriv(t, 0), hd.deriv(t, 1)]
            } else {
                [0.0; 2]
            };
            (v, d, d)
        };
        dense.push(
            [v[0], v[1], e[k], 0.0],
            [dl[0], dl[1], dil.eval_left(t), 0.0],
            [dr[0], dr[1], dil.eval(t), 0.0],
        );
    }

    if tau > 0.0 {
        let p = model.uptake();
        let integrand = |t: f64| {
            let v = dense.eval_all(t);
            v[X] * p.eval(v[S]) * math::exp(v[E])
        };
        let mut y0 = 0.0;
        for k in 0..n_hist {
            y0 += simpson_piece(&integrand, times[k], times[k + 1]);
        }
        dense.node_mut(n_hist)[Y] = y0;
    }
}

/// Simpson on `[a, b]` with two panels.
fn simpson_piece<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 12.0 * (f(a) + 4.0 * f(0.5 * (a + m)) + 2.0 * f(m) + 4.0 * f(0.5 * (m + b)) + f(b))
}

impl Trajectory {
    /// Continues the integration up to `t_end`.
    pub(crate) fn advance(&mut self, model: &ChemostatModel, t_end: f64) -> Result<()> {
        let h = self.h;
        let tau = self.tau;
        let f = |t: f64, side: Side, st: &[f64; 4], lag: &[f64; 4]| field(model, t, side, st, lag);
        loop {
            let i = self.dense.len() - 1;
            let t = self.dense.node_time(i);
            let remaining = t_end - t;
            if remaining <= 1e-9 * h {
                break;
            }
            let partial = remaining < h * (1.0 - 1e-9);
            let step = if partial { remaining } else { h };
            let y0 = *self.dense.node(i);
            let (mut next, k1) = steps::rk4_step(&self.dense, tau, t, step, &y0, &f);
            *self.dense.d_right_mut(i) = k1;
            let te = t + step;
            if !next.iter().all(|v| v.is_finite())
                || next[S].abs() > BLOW_UP
                || next[X].abs() > BLOW_UP
            {
                return Err(Error::BlowUp { t: te });
            }
            for c in [S, X] {
                if next[c] < 0.0 {
                    next[c] = 0.0;
                    self.clamp_count += 1;
                }
            }
            if next[X] > 0.0 && next[X] < UNDERFLOW {
                next[X] = 0.0;
                self.extinct_numerically = true;
            }
            if partial {
                self.dense.push_at(te, next, next, next);
                self.partial_last = true;
            } else {
                self.dense.push(next, next, next);
            }
            let j = self.dense.len() - 1;
            let dl = steps::node_field(&self.dense, tau, te, Side::Left, &next, &f);
            *self.dense.d_left_mut(j) = dl;
            *self.dense.d_right_mut(j) = dl;
            if partial {
                break;
            }
        }
        let i = self.dense.len() - 1;
        let t = self.dense.node_time(i);
        let last = *self.dense.node(i);
        let dr = steps::node_field(&self.dense, tau, t, Side::Right, &last, &f);
        *self.dense.d_right_mut(i) = dr;
        Ok(())
    }

    /// Number of nodes on the uniform grid (excludes a shortened last node).
    fn full_len(&self) -> usize {
        self.dense.len() - usize::from(self.partial_last)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn t_end(&self) -> f64 {
        self.dense.end()
    }

    /// Number of times a negative `s` or `x` was clamped to zero.
    pub fn clamp_count(&self) -> usize {
        self.clamp_count
    }

    /// Set once biomass fell below [`UNDERFLOW`] and was flushed.
    pub fn extinct_numerically(&self) -> bool {
        self.extinct_numerically
    }

    pub fn discontinuous_dilution(&self) -> bool {
        self.discontinuous_dilution
    }

    /// Index of the node at the anchor.
    pub fn anchor_node(&self) -> usize {
        self.anchor_node
    }

    /// `(s, x, E, y)` at `t`; the `y` channel is meaningful only for `t ≥ anchor`.
    pub fn state(&self, t: f64) -> [f64; 4] {
        match self.dense.node_at(t) {
            Some(i) => *self.dense.node(i),
            None => self.dense.eval_all(t),
        }
    }

    pub fn s(&self, t: f64) -> f64 {
        self.state(t)[S]
    }

    pub fn x(&self, t: f64) -> f64 {
        self.state(t)[X]
    }

    /// Cumulative dilution `∫_anchor^t D`.
    pub fn cumulative_dilution(&self, t: f64) -> f64 {
        self.state(t)[E]
    }

    /// `y` as carried by its ODE channel.
    pub fn y_channel(&self, t: f64) -> f64 {
        self.state(t)[Y]
    }

    /// Output nodes from the anchor on: `(t, [s, x, E, y])`.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, [f64; 4])> + '_ {
        (self.anchor_node..self.dense.len()).map(move |i| (self.dense.node_time(i), *self.dense.node(i)))
    }

    /// Minimum of `x` over output nodes in `[a, b]`.
    pub fn min_x_on(&self, a: f64, b: f64) -> f64 {
        self.nodes()
            .filter(|(t, _)| *t >= a - 1e-9 * self.h && *t <= b + 1e-9 * self.h)
            .map(|(_, v)| v[X])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_x_on(&self, a: f64, b: f64) -> f64 {
        self.nodes()
            .filter(|(t, _)| *t >= a - 1e-9 * self.h && *t <= b + 1e-9 * self.h)
            .map(|(_, v)| v[X])
            .fold(0.0, f64::max)
    }

    /// The window `[t − τ, t]` as a new history anchored at `t`.
    ///
    /// Exact nodes are copied when `t` sits on the grid; otherwise the
    /// window is resampled from the dense output.
    pub fn segment_at(&self, t: f64) -> Result<HistorySegment> {
        if t > self.t_end() + 1e-9 * self.h || t - self.tau < self.dense.start() - 1e-9 * self.h {
            return Err(Error::OutOfRange { t });
        }
        if self.tau == 0.0 {
            let v = self.state(t);
            return HistorySegment::constant(0.0, t, v[S], v[X]);
        }
        let n = math::round(self.tau / self.h) as usize;
        let mut seg = Dense::with_capacity(t - self.tau, self.h, n + 1);
        match self.dense.node_at(t - self.tau) {
            Some(i0) if i0 + n < self.dense.len() => {
                for i in i0..=i0 + n {
                    let (v, dl, dr) = (self.dense.node(i), self.dense.d_left(i), self.dense.d_right(i));
                    seg.push([v[S], v[X]], [dl[S], dl[X]], [dr[S], dr[X]]);
                }
            }
            _ => {
                for k in 0..=n {
                    let q = t - self.tau + k as f64 * self.h;
                    let v = self.dense.eval_all(q);
                    let d = [self.dense.deriv(q, S), self.dense.deriv(q, X)];
                    seg.push([v[S], v[X]], d, d);
                }
            }
        }
        HistorySegment::from_dense(t, self.tau, seg)
    }
}

/// `y(t) = ∫_{t−τ}^t x p(s) e^{−∫_h^t D}` by composite Simpson over the dense output.
pub fn evaluate_y(model: &ChemostatModel, traj: &Trajectory, t: f64) -> Result<f64> {
    let slack = 1e-9 * traj.h;
    if t < traj.anchor - slack || t > traj.t_end() + slack {
        return Err(Error::OutOfRange { t });
    }
    if traj.tau == 0.0 {
        return Ok(0.0);
    }
    let e_t = traj.state(t)[E];
    let p = model.uptake();
    let integrand = |q: f64| {
        let v = traj.dense.eval_all(q);
        v[X] * p.eval(v[S]) * math::exp(v[E] - e_t)
    };
    let (a, b) = (t - traj.tau, t);
    let d = &traj.dense;
    let mut total = 0.0;
    let mut left = a;
    while left < b - slack {
        let k = math::floor((left - d.start()) / traj.h + 1e-9) + 1.0;
        let right = (d.start() + k * traj.h).min(b);
        total += simpson_piece(&integrand, left, right);
        left = right;
    }
    Ok(total)
}

/// Solution-dependent ratio `ψ(t) = x(t)/x(t+τ)·e^{−∫_t^{t+τ} D}` on the
/// trajectory grid, with the residual of its fixed-point identity.
#[derive(Debug, Clone)]
pub struct PsiFunction {
    dense: Dense<1>,
    identity_residual: f64,
}

impl PsiFunction {
    pub fn eval(&self, t: f64) -> f64 {
        self.dense.eval(t, 0)
    }

    pub fn start(&self) -> f64 {
        self.dense.start()
    }

    pub fn end(&self) -> f64 {
        self.dense.end()
    }

    /// `max |ψ(t) − exp(−∫_{t−τ}^t p(s)ψ)|` over `t ≥ anchor + 2τ`.
    pub fn identity_residual(&self) -> f64 {
        self.identity_residual
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.dense.values().map(|(t, v)| (t, v[0]))
    }

    pub fn min(&self) -> f64 {
        self.samples().map(|(_, v)| v).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples().map(|(_, v)| v).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Identity residual restricted to grid points in `[a, b]`.
    pub fn identity_residual_on(
        &self,
        model: &ChemostatModel,
        traj: &Trajectory,
        a: f64,
        b: f64,
    ) -> f64 {
        psi_identity_residual(model, traj, &self.dense, a, b)
    }

    /// Largest relative deviation from the exponential form
    /// `x(u) = x(t₀)·exp ∫_{t₀}^{u} [p(s(h−τ))ψ(h−τ) − D(h)] dh`
    /// over grid points `u ∈ (t₀, b]`; needs `t₀ ≥ start + τ`.
    pub fn exponential_form_residual(
        &self,
        model: &ChemostatModel,
        traj: &Trajectory,
        t0: f64,
        b: f64,
    ) -> Result<f64> {
        let tau = traj.tau;
        let h = traj.h;
        if t0 < self.start() + tau - 1e-9 * h {
            return Err(Error::OutOfRange { t: t0 });
        }
        let b = b.min(self.end() + tau).min(traj.t_end());
        let x0 = traj.x(t0);
        if x0 < UNDERFLOW {
            return Err(Error::ZeroBiomass { t: t0 });
        }
        let p = model.uptake();
        let dil = model.dilution();
        let breaks = dil.discontinuities(t0, b);
        let integrand = |q: f64| {
            let lag = q - tau;
            let growth = p.eval(traj.dense.eval(lag, S)) * self.dense.eval(lag, 0);
            growth - dil.eval(q)
        };
        let mut worst = 0.0_f64;
        let mut exponent = 0.0;
        let mut left = t0;
        while left < b - 1e-9 * h {
            let k = math::floor((left - traj.anchor) / h + 1e-9) + 1.0;
            let right = (traj.anchor + k * h).min(b);
            exponent += quad::integrate_on_grid(&integrand, left, right, traj.anchor, h, &breaks);
            let predicted = x0 * math::exp(exponent);
            let actual = traj.x(right);
            worst = worst.max((actual - predicted).abs() / actual.abs().max(UNDERFLOW));
            left = right;
        }
        Ok(worst)
    }
}

pub fn compute_psi(model: &ChemostatModel, traj: &Trajectory) -> Result<PsiFunction> {
    let tau = traj.tau;
    let d = &traj.dense;
    let dil = model.dilution();
    if tau == 0.0 {
        let mut dense = Dense::new(traj.anchor, traj.h);
        for i in traj.anchor_node..d.len() {
            let t = d.node_time(i);
            if i + 1 == d.len() && i > traj.anchor_node {
                dense.push_at(t, [1.0], [0.0], [0.0]);
            } else {
                dense.push([1.0], [0.0], [0.0]);
            }
        }
        return Ok(PsiFunction {
            dense,
            identity_residual: 0.0,
        });
    }
    let n = math::round(tau / traj.h) as usize;
    let mut dense = Dense::new(traj.anchor, traj.h);
    let full = traj.full_len();
    for i in traj.anchor_node..full.saturating_sub(n) {
        let t = d.node_time(i);
        let (now, later) = (d.node(i), d.node(i + n));
        if now[X] < UNDERFLOW || later[X] < UNDERFLOW {
            return Err(Error::ZeroBiomass {
                t: if now[X] < UNDERFLOW { t } else { t + tau },
            });
        }
        let psi = now[X] / later[X] * math::exp(now[E] - later[E]);
        let rate = |side: Side| {
            let (dn, dl) = match side {
                Side::Left => (d.d_left(i), d.d_left(i + n)),
                Side::Right => (d.d_right(i), d.d_right(i + n)),
            };
            psi * (dn[X] / now[X] - dl[X] / later[X] + dil.eval_side(t, side)
                - dil.eval_side(t + tau, side))
        };
        dense.push([psi], [rate(Side::Left)], [rate(Side::Right)]);
    }
    if dense.len() < 2 {
        return Err(Error::HorizonTooShort {
            needed: traj.anchor + 2.0 * tau,
            horizon: traj.t_end(),
        });
    }
    let residual = psi_identity_residual(model, traj, &dense, traj.anchor + 2.0 * tau, dense.end());
    Ok(PsiFunction {
        dense,
        identity_residual: residual,
    })
}

fn psi_identity_residual(
    model: &ChemostatModel,
    traj: &Trajectory,
    psi: &Dense<1>,
    a: f64,
    b: f64,
) -> f64 {
    let tau = traj.tau;
    if tau == 0.0 {
        return 0.0;
    }
    let p = model.uptake();
    let lo = a.max(psi.start() + tau);
    let breaks = model.dilution().discontinuities(lo - tau, b);
    let integrand = |q: f64| p.eval(traj.dense.eval(q, S)) * psi.eval(q, 0);
    let mut worst = 0.0_f64;
    for (t, v) in psi.values() {
        if t < lo - 1e-9 * traj.h || t > b + 1e-9 * traj.h {
            continue;
        }
        let integral = quad::integrate_on_grid(&integrand, t - tau, t, psi.start(), traj.h, &breaks);
        worst = worst.max((v[0] - math::exp(-integral)).abs());
    }
    worst
}

/// Largest deviation from `(z − s − x − y)(t) = (z − s − x − y)(a)·e^{−E(t)}`
/// over the output nodes, with `z` a solution of the substrate-only equation.
pub fn conservation_residual(traj: &Trajectory, washout: &WashoutSolution) -> f64 {
    let mut nodes = traj.nodes();
    let Some((t0, v0)) = nodes.next() else {
        return 0.0;
    };
    let r0 = washout.eval(t0) - v0[S] - v0[X] - v0[Y];
    let mut worst = 0.0_f64;
    for (t, v) in core::iter::once((t0, v0)).chain(nodes) {
        let r = washout.eval(t) - v[S] - v[X] - v[Y];
        worst = worst.max((r - r0 * math::exp(-v[E])).abs());
    }
    worst
}
