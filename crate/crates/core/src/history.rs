//! Initial data of the delay system: `(s, x)` on a window `[a − τ, a]`.

use alloc::vec::Vec;

use crate::dense::Dense;
use crate::error::{Error, Result};
use crate::math;

/// State of the delay system at time `anchor`: uniformly spaced samples of
/// `(s, x)` over `[anchor − τ, anchor]` joined by a `C¹` piecewise cubic.
/// For `τ = 0` it is a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySegment {
    anchor: f64,
    tau: f64,
    dense: Dense<2>,
}

impl HistorySegment {
    /// Constant history `(s, x)` on `[anchor − τ, anchor]`.
    pub fn constant(tau: f64, anchor: f64, s: f64, x: f64) -> Result<Self> {
        check_tau(tau)?;
        let mut dense = Dense::new(anchor - tau, if tau > 0.0 { tau } else { 1.0 });
        dense.push([s, x], [0.0; 2], [0.0; 2]);
        if tau > 0.0 {
            dense.push([s, x], [0.0; 2], [0.0; 2]);
        }
        Self::from_dense(anchor, tau, dense)
    }

    /// Samples `f` at `samples + 1` points; slopes come from second-order
    /// finite differences of the samples.
    pub fn from_fn<F: Fn(f64) -> (f64, f64)>(
        tau: f64,
        anchor: f64,
        samples: usize,
        f: F,
    ) -> Result<Self> {
        check_tau(tau)?;
        if tau == 0.0 {
            let (s, x) = f(anchor);
            return Self::constant(0.0, anchor, s, x);
        }
        let n = samples.max(2);
        let h = tau / n as f64;
        let (s, x): (Vec<f64>, Vec<f64>) = (0..=n).map(|i| f(anchor - tau + i as f64 * h)).unzip();
        Self::from_samples(tau, anchor, s, x)
    }

    /// Builds a segment from uniformly spaced samples (first sample at `anchor − τ`).
    pub fn from_samples(tau: f64, anchor: f64, s: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        check_tau(tau)?;
        if s.len() != x.len() || s.is_empty() {
            return Err(Error::InvalidSpec("history columns must have equal non-zero length"));
        }
        if tau == 0.0 {
            return Self::constant(0.0, anchor, s[s.len() - 1], x[x.len() - 1]);
        }
        if s.len() < 2 {
            return Self::constant(tau, anchor, s[0], x[0]);
        }
        let n = s.len() - 1;
        let h = tau / n as f64;
        let ds = fd_slopes(&s, h);
        let dx = fd_slopes(&x, h);
        let mut dense = Dense::with_capacity(anchor - tau, h, n + 1);
        for i in 0..=n {
            let d = [ds[i], dx[i]];
            dense.push([s[i], x[i]], d, d);
        }
        Self::from_dense(anchor, tau, dense)
    }

    pub(crate) fn from_dense(anchor: f64, tau: f64, dense: Dense<2>) -> Result<Self> {
        for (_, v) in dense.values() {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(Error::InvalidSpec("history values must be finite"));
            }
        }
        Ok(Self { anchor, tau, dense })
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub(crate) fn dense(&self) -> &Dense<2> {
        &self.dense
    }

    /// Number of stored samples.
    pub fn len(&self) -> usize {
        self.dense.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dense.is_empty()
    }

    /// `(s, x)` at `t ∈ [anchor − τ, anchor]`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let v = self.dense.eval_all(t);
        (v[0], v[1])
    }

    /// Sample times and values.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.dense.values().map(|(t, v)| (t, v[0], v[1]))
    }

    /// Value at the anchor, `(s(a), x(a))`.
    pub fn head(&self) -> (f64, f64) {
        let v = self.dense.last().copied().unwrap_or([0.0; 2]);
        (v[0], v[1])
    }

    pub fn first_negative(&self) -> Option<usize> {
        self.dense
            .values()
            .position(|(_, v)| v[0] < 0.0 || v[1] < 0.0)
    }

    /// Non-negative and either `x(a) > 0` or some sample has `s > 0` and `x > 0`.
    pub fn is_not_null(&self) -> bool {
        if self.first_negative().is_some() {
            return false;
        }
        self.head().1 > 0.0 || self.dense.values().any(|(_, v)| v[0] > 0.0 && v[1] > 0.0)
    }

    /// Max over the window of the Euclidean norm of `(s, x)`.
    pub fn norm(&self) -> f64 {
        self.dense
            .values()
            .map(|(_, v)| math::sqrt(v[0] * v[0] + v[1] * v[1]))
            .fold(0.0, f64::max)
    }

    pub fn min_x(&self) -> f64 {
        self.dense.values().map(|(_, v)| v[1]).fold(f64::INFINITY, f64::min)
    }

    /// Discrete sup distance, pointwise Euclidean in `(s, x)`, on the samples
    /// of `self` (windows are compared relative to their anchors).
    pub fn distance(&self, other: &HistorySegment) -> f64 {
        let shift = other.anchor - self.anchor;
        self.dense
            .values()
            .map(|(t, v)| {
                let (s, x) = other.eval(t + shift);
                let (a, b) = (v[0] - s, v[1] - x);
                math::sqrt(a * a + b * b)
            })
            .fold(0.0, f64::max)
    }

    /// Same window moved to a new anchor time.
    pub fn reanchored(&self, anchor: f64) -> Self {
        let mut dense = Dense::with_capacity(anchor - self.tau, self.dense.step(), self.dense.len());
        for i in 0..self.dense.len() {
            dense.push(*self.dense.node(i), *self.dense.d_left(i), *self.dense.d_right(i));
        }
        Self {
            anchor,
            tau: self.tau,
            dense,
        }
    }

    /// `self + k·(other − self)` on the samples of `self`.
    pub fn lerp(&self, other: &HistorySegment, k: f64) -> Self {
        let shift = other.anchor - self.anchor;
        let mut dense = Dense::with_capacity(self.dense.start(), self.dense.step(), self.dense.len());
        for i in 0..self.dense.len() {
            let t = self.dense.node_time(i);
            let o = other.dense.eval_all(t + shift);
            let v = self.dense.node(i);
            let ol = if other.dense.len() > 1 { [other.dense.deriv(t + shift, 0), other.dense.deriv(t + shift, 1)] } else { [0.0; 2] };
            let (dl, dr) = (self.dense.d_left(i), self.dense.d_right(i));
            dense.push(
                [v[0] + k * (o[0] - v[0]), v[1] + k * (o[1] - v[1])],
                [dl[0] + k * (ol[0] - dl[0]), dl[1] + k * (ol[1] - dl[1])],
                [dr[0] + k * (ol[0] - dr[0]), dr[1] + k * (ol[1] - dr[1])],
            );
        }
        Self {
            anchor: self.anchor,
            tau: self.tau,
            dense,
        }
    }

    /// Adds `(ds, dx)` at every sample.
    pub fn perturbed(&self, ds: f64, dx: f64) -> Self {
        let mut out = self.clone();
        for i in 0..out.dense.len() {
            let v = out.dense.node_mut(i);
            v[0] += ds;
            v[1] += dx;
        }
        out
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSpec("delay must be finite and non-negative"))
    }
}

fn fd_slopes(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    if n == 2 {
        let d = (v[1] - v[0]) / h;
        return alloc::vec![d, d];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h)
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}
