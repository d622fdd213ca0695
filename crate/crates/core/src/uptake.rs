//! Substrate uptake laws `p(s)`.

use alloc::vec::Vec;

use crate::error::{Assumption, Error, Result};
use crate::interp::MonotoneCubic;

#[derive(Debug, Clone, PartialEq)]
pub enum UptakeFunction {
    /// `m·s / (K + s)`.
    Monod { max_rate: f64, half_saturation: f64 },
    /// `k·s`.
    Linear { rate: f64 },
    /// Monotone cubic through a table starting at `(0, 0)`.
    Tabulated(MonotoneCubic),
}

impl UptakeFunction {
    pub fn monod(max_rate: f64, half_saturation: f64) -> Result<Self> {
        if !(max_rate > 0.0 && max_rate.is_finite()) {
            return Err(Error::AssumptionViolation {
                assumption: Assumption::A1,
                detail: "Monod maximal rate must be positive",
            });
        }
        if !(half_saturation > 0.0 && half_saturation.is_finite()) {
            return Err(Error::AssumptionViolation {
                assumption: Assumption::A1,
                detail: "Monod half-saturation constant must be positive",
            });
        }
        Ok(UptakeFunction::Monod {
            max_rate,
            half_saturation,
        })
    }

    pub fn linear(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::AssumptionViolation {
                assumption: Assumption::A1,
                detail: "linear uptake rate must be positive",
            });
        }
        Ok(UptakeFunction::Linear { rate })
    }

    /// Builds a tabulated law; the table must start at `(0, 0)` and be
    /// strictly increasing in both columns.
    pub fn tabulated(s: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if s.first() != Some(&0.0) || p.first() != Some(&0.0) {
            return Err(Error::AssumptionViolation {
                assumption: Assumption::A1,
                detail: "tabulated uptake must start at (0, 0)",
            });
        }
        if p.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::AssumptionViolation {
                assumption: Assumption::A1,
                detail: "tabulated uptake values must be strictly increasing",
            });
        }
        Ok(UptakeFunction::Tabulated(MonotoneCubic::new(s, p)?))
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            UptakeFunction::Monod {
                max_rate,
                half_saturation,
            } => max_rate * s / (half_saturation + s),
            UptakeFunction::Linear { rate } => rate * s,
            UptakeFunction::Tabulated(table) => table.eval(s),
        }
    }

    #[inline]
    pub fn deriv(&self, s: f64) -> f64 {
        match self {
            UptakeFunction::Monod {
                max_rate,
                half_saturation,
            } => {
                let q = half_saturation + s;
                max_rate * half_saturation / (q * q)
            }
            UptakeFunction::Linear { rate } => *rate,
            UptakeFunction::Tabulated(table) => table.deriv(s),
        }
    }

    /// Checks `p(0) = 0` and `p' > 0` on `samples + 1` points of `[0, s_max]`.
    pub fn validate(&self, s_max: f64, samples: usize) -> Result<()> {
        if self.eval(0.0) != 0.0 {
            return Err(Error::AssumptionViolation {
                assumption: Assumption::A1,
                detail: "p(0) must be exactly zero",
            });
        }
        for i in 0..=samples {
            let s = s_max * i as f64 / samples as f64;
            let d = self.deriv(s);
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::AssumptionViolation {
                    assumption: Assumption::A1,
                    detail: "p' must be strictly positive",
                });
            }
        }
        Ok(())
    }
}
