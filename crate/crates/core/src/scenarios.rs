//! The standard scenario suite: constant, piecewise-constant and Fourier
//! environments on both sides of the threshold, with `τ ∈ {0, 0.5, 2}`.
//!
//! Every model uses Monod uptake `p(s) = 2s/(1+s)` and period `ω = 2`
//! (declared for constant environments too, so horizons are comparable).

use alloc::vec;
use alloc::vec::Vec;

use crate::history::HistorySegment;
use crate::math;
use crate::model::{make_model, ChemostatModel};
use crate::persistence::Classification;
use crate::signal::EnvironmentSignal;
use crate::uptake::UptakeFunction;

pub const OMEGA: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub model: ChemostatModel,
    /// Expected fate, fixed when the suite was designed.
    pub expected: Classification,
}

impl Scenario {
    /// `τ/16`, or `ω/256` without delay.
    pub fn step(&self) -> f64 {
        let tau = self.model.tau();
        if tau > 0.0 { tau / 16.0 } else { OMEGA / 256.0 }
    }

    /// Constant history `(s, x) = (0.5, 0.2)`.
    pub fn history(&self) -> HistorySegment {
        HistorySegment::constant(self.model.tau(), 0.0, 0.5, 0.2).expect("valid history")
    }
}

fn monod() -> UptakeFunction {
    UptakeFunction::monod(2.0, 1.0).expect("valid uptake")
}

fn constant(v: f64) -> EnvironmentSignal {
    EnvironmentSignal::constant(v).expect("valid signal")
}

fn pieces(a: f64, b: f64) -> EnvironmentSignal {
    EnvironmentSignal::piecewise_constant(vec![0.0, 1.0], vec![a, b], OMEGA).expect("valid signal")
}

fn harmonic(mean: f64, cos: f64, sin: f64) -> EnvironmentSignal {
    EnvironmentSignal::fourier(mean, vec![cos], vec![sin], OMEGA).expect("valid signal")
}

fn build(
    name: &'static str,
    tau: f64,
    d: EnvironmentSignal,
    s0: EnvironmentSignal,
    expected: Classification,
) -> Scenario {
    Scenario {
        name,
        model: make_model(tau, monod(), d, s0, Some(OMEGA)).expect("valid model"),
        expected,
    }
}

/// All scenarios of the suite.
pub fn standard_suite() -> Vec<Scenario> {
    use Classification::{Extinct, Persistent};
    vec![
        build("constant-persistent", 0.5, constant(0.5), constant(1.0), Persistent),
        build("constant-undelayed", 0.0, constant(0.5), constant(1.0), Persistent),
        build("constant-extinct", 2.0, constant(0.9), constant(1.0), Extinct),
        build("piecewise-undelayed", 0.0, pieces(0.3, 0.7), pieces(1.5, 0.5), Persistent),
        build("piecewise-persistent", 0.5, pieces(0.3, 0.7), pieces(1.5, 0.5), Persistent),
        build("piecewise-extinct", 2.0, pieces(0.7, 1.1), pieces(1.5, 0.5), Extinct),
        build("fourier-persistent", 0.5, harmonic(0.5, 0.2, 0.1), harmonic(1.0, 0.3, 0.0), Persistent),
        build("fourier-long-delay", 2.0, harmonic(0.3, 0.1, 0.0), harmonic(1.0, 0.3, 0.0), Persistent),
        build("fourier-extinct", 0.0, harmonic(1.4, 0.3, 0.0), harmonic(1.0, 0.0, 0.3), Extinct),
        build("fourier-extinct-delayed", 0.5, harmonic(1.2, 0.2, 0.0), harmonic(1.0, 0.3, 0.0), Extinct),
        build("fourier-incommensurate", 0.7, harmonic(0.5, 0.2, 0.1), harmonic(1.0, 0.3, 0.0), Persistent),
    ]
}

/// Scenario by name.
pub fn scenario(name: &str) -> Option<Scenario> {
    standard_suite().into_iter().find(|s| s.name == name)
}

/// Equilibrium `(s*, x*, y*)` of a constant environment with Monod uptake,
/// from `p(s*) = d·e^{dτ}`; `None` when the biomass cannot persist.
pub fn monod_equilibrium(max_rate: f64, half_saturation: f64, d: f64, v: f64, tau: f64) -> Option<(f64, f64, f64)> {
    let ps = d * math::exp(d * tau);
    if ps >= max_rate {
        return None;
    }
    let s = half_saturation * ps / (max_rate - ps);
    if s >= v {
        return None;
    }
    let x = (v - s) * math::exp(-d * tau);
    Some((s, x, x * (math::exp(d * tau) - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::threshold_periodic;

    #[test]
    fn suite_signs_match_design() {
        for sc in standard_suite() {
            let r = threshold_periodic(&sc.model).unwrap();
            assert_eq!(r.classification, sc.expected, "{}", sc.name);
            assert!(r.lambda.abs() > 0.1, "{} sits too close to the threshold", sc.name);
        }
    }

    #[test]
    fn equilibrium_formula() {
        let (s, x, y) = monod_equilibrium(2.0, 1.0, 0.5, 1.0, 0.0).unwrap();
        assert!((s - 1.0 / 3.0).abs() < 1e-15 && (x - 2.0 / 3.0).abs() < 1e-15 && y == 0.0);
        assert!(monod_equilibrium(2.0, 1.0, 0.9, 1.0, 2.0).is_none());
    }
}
