//! Shape-preserving interpolation of tabulated data.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::quad::{hermite, hermite_deriv};

/// Piecewise cubic Hermite interpolant with Fritsch–Butland slopes.
///
/// On monotone data the interpolant is monotone and stays between
/// neighbouring samples. Outside the table it extends linearly with the end
/// slopes, which keeps it `C¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidSpec("table columns differ in length"));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidSpec("table needs at least two rows"));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("table contains non-finite values"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec("table abscissae must be strictly increasing"));
        }
        let n = xs.len();
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut slopes = alloc::vec![0.0; n];
        if n == 2 {
            slopes[0] = secants[0];
            slopes[1] = secants[0];
        } else {
            for i in 1..n - 1 {
                let (d0, d1) = (secants[i - 1], secants[i]);
                if d0 * d1 <= 0.0 {
                    slopes[i] = 0.0;
                } else {
                    // weighted harmonic mean (Fritsch & Butland)
                    let h0 = xs[i] - xs[i - 1];
                    let h1 = xs[i + 1] - xs[i];
                    let w0 = 2.0 * h1 + h0;
                    let w1 = h1 + 2.0 * h0;
                    slopes[i] = (w0 + w1) / (w0 / d0 + w1 / d1);
                }
            }
            slopes[0] = end_slope(xs[1] - xs[0], xs[2] - xs[1], secants[0], secants[1]);
            slopes[n - 1] = end_slope(
                xs[n - 1] - xs[n - 2],
                xs[n - 2] - xs[n - 3],
                secants[n - 2],
                secants[n - 3],
            );
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    fn piece(&self, x: f64) -> usize {
        let i = self.xs.partition_point(|&v| v <= x);
        i.saturating_sub(1).min(self.xs.len() - 2)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.slopes[0] * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.slopes[n - 1] * (x - self.xs[n - 1]);
        }
        let i = self.piece(x);
        hermite(
            self.xs[i],
            self.xs[i + 1],
            self.ys[i],
            self.ys[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
            x,
        )
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.slopes[0];
        }
        if x >= self.xs[n - 1] {
            return self.slopes[n - 1];
        }
        let i = self.piece(x);
        hermite_deriv(
            self.xs[i],
            self.xs[i + 1],
            self.ys[i],
            self.ys[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
            x,
        )
    }
}

/// Three-point one-sided end slope, limited to keep the end piece monotone.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        // keep a sliver of slope on strictly monotone data so p' stays positive
        0.5 * d0
    } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_data_gives_positive_derivative() {
        let xs = alloc::vec![0.0, 0.2, 0.5, 1.0, 2.0, 4.0];
        let ys = alloc::vec![0.0, 0.5, 0.8, 0.95, 0.99, 1.0];
        let m = MonotoneCubic::new(xs, ys).unwrap();
        for i in 0..=4000 {
            let x = 5.0 * i as f64 / 4000.0;
            assert!(m.deriv(x) > 0.0, "p'({x}) = {}", m.deriv(x));
        }
        assert_eq!(m.eval(0.0), 0.0);
    }

    #[test]
    fn no_overshoot_between_samples() {
        let xs = alloc::vec![0.0, 1.0, 1.1, 3.0];
        let ys = alloc::vec![0.0, 0.1, 2.0, 2.1];
        let m = MonotoneCubic::new(xs.clone(), ys.clone()).unwrap();
        for i in 0..3 {
            for k in 0..=100 {
                let x = xs[i] + (xs[i + 1] - xs[i]) * k as f64 / 100.0;
                let v = m.eval(x);
                assert!(v >= ys[i] - 1e-15 && v <= ys[i + 1] + 1e-15);
            }
        }
    }

    #[test]
    fn derivative_matches_central_differences() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x / (1.0 + x)).collect();
        let m = MonotoneCubic::new(xs, ys).unwrap();
        let h = 1e-6;
        for k in 1..300 {
            let x = 3.2 * k as f64 / 300.0;
            let fd = (m.eval(x + h) - m.eval(x - h)) / (2.0 * h);
            assert!((fd - m.deriv(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_unsorted_abscissae() {
        assert!(MonotoneCubic::new(alloc::vec![0.0, 1.0, 1.0], alloc::vec![0.0, 1.0, 2.0]).is_err());
    }
}
