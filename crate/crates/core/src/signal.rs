//! Time-varying environment inputs: dilution rate `D(t)` and feed concentration `s⁰(t)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::math;
use crate::quad;

/// Which one-sided limit to take at a jump of a piecewise signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Linear,
    MonotoneCubic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalKind {
    Constant(f64),
    /// `values[i]` on `[breakpoints[i], breakpoints[i+1])`, repeated with `period`.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        period: f64,
    },
    /// `mean + Σ cos[k]·cos((k+1)νt) + sin[k]·sin((k+1)νt)` with `ν = 2π/period`.
    Fourier {
        mean: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
        period: f64,
    },
    /// Interpolated samples; wraps when `period` is set, otherwise holds the
    /// end values outside the grid.
    Sampled {
        times: Vec<f64>,
        values: Vec<f64>,
        interpolation: Interpolation,
        cubic: Option<MonotoneCubic>,
        period: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSignal {
    kind: SignalKind,
    lower: f64,
    upper: f64,
}

impl EnvironmentSignal {
    pub fn constant(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidSpec("constant signal must be finite"));
        }
        Ok(Self {
            kind: SignalKind::Constant(value),
            lower: value,
            upper: value,
        })
    }

    pub fn piecewise_constant(breakpoints: Vec<f64>, values: Vec<f64>, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidSpec("period must be positive"));
        }
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::InvalidSpec(
                "piecewise signal needs one value per breakpoint",
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidSpec("first breakpoint must be 0"));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) || breakpoints[breakpoints.len() - 1] >= period
        {
            return Err(Error::InvalidSpec(
                "breakpoints must increase strictly within [0, period)",
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("piecewise values must be finite"));
        }
        let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            kind: SignalKind::PiecewiseConstant {
                breakpoints,
                values,
                period,
            },
            lower,
            upper,
        })
    }

    pub fn fourier(mean: f64, cos: Vec<f64>, sin: Vec<f64>, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidSpec("period must be positive"));
        }
        if !mean.is_finite() || cos.iter().chain(&sin).any(|c| !c.is_finite()) {
            return Err(Error::InvalidSpec("Fourier coefficients must be finite"));
        }
        let spread: f64 = cos.iter().chain(&sin).map(|c| c.abs()).sum();
        Ok(Self {
            kind: SignalKind::Fourier {
                mean,
                cos,
                sin,
                period,
            },
            lower: mean - spread,
            upper: mean + spread,
        })
    }

    pub fn sampled(
        times: Vec<f64>,
        values: Vec<f64>,
        interpolation: Interpolation,
        period: Option<f64>,
    ) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::InvalidSpec(
                "sampled signal needs matching time and value columns",
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec("sample times must increase strictly"));
        }
        if values.iter().chain(&times).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("samples must be finite"));
        }
        if let Some(p) = period {
            let span = times[times.len() - 1] - times[0];
            if (span - p).abs() > 1e-12 * p.max(1.0) {
                return Err(Error::InvalidSpec(
                    "periodic samples must span exactly one period",
                ));
            }
            if values[0] != values[values.len() - 1] {
                return Err(Error::InvalidSpec(
                    "periodic samples must repeat the first value at the end",
                ));
            }
        }
        let cubic = match interpolation {
            Interpolation::Linear => None,
            Interpolation::MonotoneCubic => {
                Some(MonotoneCubic::new(times.clone(), values.clone())?)
            }
        };
        let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            kind: SignalKind::Sampled {
                times,
                values,
                interpolation,
                cubic,
                period,
            },
            lower,
            upper,
        })
    }

    pub fn kind(&self) -> &SignalKind {
        &self.kind
    }

    /// Certified lower bound over all `t`.
    pub fn lower(&self) -> f64 {
        self.lower
    }

    /// Certified upper bound over all `t`.
    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, SignalKind::Constant(_))
    }

    pub fn is_piecewise(&self) -> bool {
        matches!(self.kind, SignalKind::PiecewiseConstant { .. })
    }

    /// The signal's own period, `None` for constants and aperiodic samples.
    pub fn natural_period(&self) -> Option<f64> {
        match &self.kind {
            SignalKind::Constant(_) => None,
            SignalKind::PiecewiseConstant { period, .. } | SignalKind::Fourier { period, .. } => {
                Some(*period)
            }
            SignalKind::Sampled { period, .. } => *period,
        }
    }

    /// Right-continuous evaluation.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.eval_side(t, Side::Right)
    }

    #[inline]
    pub fn eval_left(&self, t: f64) -> f64 {
        self.eval_side(t, Side::Left)
    }

    pub fn eval_side(&self, t: f64, side: Side) -> f64 {
        match &self.kind {
            SignalKind::Constant(v) => *v,
            SignalKind::PiecewiseConstant {
                breakpoints,
                values,
                period,
            } => {
                let mut u = math::rem_euclid(t, *period);
                let snap = 1e-9 * period;
                if period - u < snap {
                    u = 0.0;
                }
                let i = breakpoints.partition_point(|&b| b < u - snap);
                // breakpoint `i` is the first one not clearly left of u
                let on_break = i < breakpoints.len() && (breakpoints[i] - u).abs() <= snap;
                let idx = match (on_break, side) {
                    (true, Side::Right) => i,
                    (true, Side::Left) => {
                        if i == 0 {
                            values.len() - 1
                        } else {
                            i - 1
                        }
                    }
                    (false, _) => i - 1,
                };
                values[idx]
            }
            SignalKind::Fourier {
                mean,
                cos,
                sin,
                period,
            } => {
                let u = math::rem_euclid(t, *period);
                let nu = 2.0 * math::PI / period;
                let mut acc = *mean;
                for k in 0..cos.len().max(sin.len()) {
                    let arg = (k + 1) as f64 * nu * u;
                    let a = cos.get(k).copied().unwrap_or(0.0);
                    let b = sin.get(k).copied().unwrap_or(0.0);
                    acc += a * math::cos(arg) + b * math::sin(arg);
                }
                acc
            }
            SignalKind::Sampled {
                times,
                values,
                interpolation,
                cubic,
                period,
            } => {
                let t0 = times[0];
                let t1 = times[times.len() - 1];
                let u = match period {
                    Some(p) => t0 + math::rem_euclid(t - t0, *p),
                    None => t.clamp(t0, t1),
                };
                match interpolation {
                    Interpolation::MonotoneCubic => cubic.as_ref().map_or(f64::NAN, |c| c.eval(u)),
                    Interpolation::Linear => {
                        let i = times.partition_point(|&x| x <= u).clamp(1, times.len() - 1);
                        let (xa, xb) = (times[i - 1], times[i]);
                        let (ya, yb) = (values[i - 1], values[i]);
                        ya + (yb - ya) * (u - xa) / (xb - xa)
                    }
                }
            }
        }
    }

    /// Jump locations of the signal inside `[a, b]`, sorted.
    pub fn discontinuities(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if let SignalKind::PiecewiseConstant {
            breakpoints,
            values,
            period,
        } = &self.kind
        {
            let first = math::floor(a / period) as i64;
            let last = math::ceil(b / period) as i64;
            for k in first..=last {
                for (i, &bp) in breakpoints.iter().enumerate() {
                    let prev = if i == 0 { values[values.len() - 1] } else { values[i - 1] };
                    if prev == values[i] {
                        continue;
                    }
                    let t = k as f64 * period + bp;
                    if t >= a && t <= b {
                        out.push(t);
                    }
                }
            }
        }
        out
    }

    /// Returns `k·f`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidSpec("scale factor must be positive"));
        }
        let kind = match &self.kind {
            SignalKind::Constant(v) => SignalKind::Constant(k * v),
            SignalKind::PiecewiseConstant {
                breakpoints,
                values,
                period,
            } => SignalKind::PiecewiseConstant {
                breakpoints: breakpoints.clone(),
                values: values.iter().map(|v| k * v).collect(),
                period: *period,
            },
            SignalKind::Fourier {
                mean,
                cos,
                sin,
                period,
            } => SignalKind::Fourier {
                mean: k * mean,
                cos: cos.iter().map(|v| k * v).collect(),
                sin: sin.iter().map(|v| k * v).collect(),
                period: *period,
            },
            SignalKind::Sampled {
                times,
                values,
                interpolation,
                period,
                ..
            } => {
                return Self::sampled(
                    times.clone(),
                    values.iter().map(|v| k * v).collect(),
                    *interpolation,
                    *period,
                )
            }
        };
        Ok(Self {
            kind,
            lower: k * self.lower,
            upper: k * self.upper,
        })
    }

    /// Sampling test: `|f(t+ω) − f(t)| < 1e−12` relative on 64 points of one period.
    pub fn is_periodic_with(&self, omega: f64) -> bool {
        if !(omega > 0.0 && omega.is_finite()) {
            return false;
        }
        match &self.kind {
            SignalKind::Constant(_) => true,
            SignalKind::Sampled { period: None, .. } => false,
            _ => (0..64).all(|i| {
                // offset keeps samples off exact breakpoints
                let t = omega * (i as f64 + core::f64::consts::FRAC_1_PI) / 64.0;
                let a = self.eval(t);
                let b = self.eval(t + omega);
                (a - b).abs() < 1e-12 * a.abs().max(b.abs()).max(1.0)
            }),
        }
    }

    /// `∫_a^b f` by Gauss–Legendre panels split at jumps.
    pub fn integral(&self, a: f64, b: f64, panels: usize) -> f64 {
        let breaks = self.discontinuities(a, b);
        let step = (b - a) / panels.max(1) as f64;
        quad::integrate_on_grid(&|t| self.eval(t), a, b, a, step, &breaks)
    }
}

/// Periodic average `⟨f⟩ = (1/ω)∫₀^ω f`.
pub fn signal_average(f: &EnvironmentSignal, omega: f64) -> Result<f64> {
    if !f.is_periodic_with(omega) {
        return Err(Error::NotPeriodic);
    }
    Ok(match &f.kind {
        SignalKind::Constant(v) => *v,
        _ => f.integral(0.0, omega, 2048) / omega,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn average_of_constant_and_harmonics() {
        let c = EnvironmentSignal::constant(0.7).unwrap();
        assert_eq!(signal_average(&c, 3.0).unwrap(), 0.7);
        let f = EnvironmentSignal::fourier(1.3, vec![0.4, -0.2], vec![], 2.0).unwrap();
        assert!((signal_average(&f, 2.0).unwrap() - 1.3).abs() < 1e-13);
    }

    #[test]
    fn average_of_two_equal_pieces() {
        let f = EnvironmentSignal::piecewise_constant(vec![0.0, 1.5], vec![1.0, 3.0], 3.0).unwrap();
        assert!((signal_average(&f, 3.0).unwrap() - 2.0).abs() < 1e-14);
        // a multiple of the natural period is also a period
        assert!((signal_average(&f, 6.0).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn non_period_is_rejected() {
        let f = EnvironmentSignal::fourier(1.0, vec![0.5], vec![], 2.0).unwrap();
        assert_eq!(signal_average(&f, 1.3), Err(Error::NotPeriodic));
    }

    #[test]
    fn one_sided_limits_at_jumps() {
        let f = EnvironmentSignal::piecewise_constant(vec![0.0, 1.0], vec![0.3, 0.7], 2.0).unwrap();
        assert_eq!(f.eval(1.0), 0.7);
        assert_eq!(f.eval_left(1.0), 0.3);
        assert_eq!(f.eval(2.0), 0.3);
        assert_eq!(f.eval_left(2.0), 0.7);
        assert_eq!(f.eval_left(0.0), 0.7);
        // rounding noise near a breakpoint snaps onto it
        assert_eq!(f.eval(0.999_999_999_999_9), 0.7);
        assert_eq!(f.eval_left(1.000_000_000_000_1), 0.3);
        assert_eq!(f.eval(0.5), 0.3);
        assert_eq!(f.eval_left(0.5), 0.3);
    }

    #[test]
    fn fourier_bounds_are_conservative() {
        let f = EnvironmentSignal::fourier(1.0, vec![0.3, 0.1], vec![0.2], 1.7).unwrap();
        assert!((f.lower() - 0.4).abs() < 1e-15 && (f.upper() - 1.6).abs() < 1e-15);
        for i in 0..2000 {
            let v = f.eval(1.7 * i as f64 / 2000.0);
            assert!(v >= f.lower() && v <= f.upper());
        }
    }

    #[test]
    fn sampled_signal_wraps_or_holds() {
        let f = EnvironmentSignal::sampled(
            vec![0.0, 1.0, 2.0],
            vec![1.0, 2.0, 1.0],
            Interpolation::Linear,
            Some(2.0),
        )
        .unwrap();
        assert!((f.eval(2.5) - 1.5).abs() < 1e-15);
        assert!(f.is_periodic_with(2.0));
        let g = EnvironmentSignal::sampled(
            vec![0.0, 1.0],
            vec![1.0, 2.0],
            Interpolation::MonotoneCubic,
            None,
        )
        .unwrap();
        assert_eq!(g.eval(5.0), 2.0);
        assert_eq!(g.eval(-1.0), 1.0);
        assert!(!g.is_periodic_with(1.0));
    }

    #[test]
    fn jumps_are_listed_per_period() {
        let f = EnvironmentSignal::piecewise_constant(vec![0.0, 1.0], vec![0.3, 0.7], 2.0).unwrap();
        assert_eq!(f.discontinuities(0.5, 4.5), vec![1.0, 2.0, 3.0, 4.0]);
    }
}
