//! Problem instances of the delayed chemostat.

use crate::error::{Assumption, Error, Result};
use crate::signal::{signal_average, EnvironmentSignal, SignalKind};
use crate::uptake::UptakeFunction;

/// Fully validated problem instance: delay, uptake law, dilution and feed.
///
/// Immutable after construction; cloning is cheap enough for sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChemostatModel {
    tau: f64,
    uptake: UptakeFunction,
    dilution: EnvironmentSignal,
    input: EnvironmentSignal,
    period: Option<f64>,
}

/// Period used for models whose inputs are both constant.
pub const AUTONOMOUS_PERIOD: f64 = 1.0;

/// Validates every standing assumption eagerly and assembles the model.
///
/// When `period` is `None` it is inferred: the common natural period of the
/// signals, or [`AUTONOMOUS_PERIOD`] when both are constant.
pub fn make_model(
    tau: f64,
    uptake: UptakeFunction,
    dilution: EnvironmentSignal,
    input: EnvironmentSignal,
    period: Option<f64>,
) -> Result<ChemostatModel> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidSpec("delay must be finite and non-negative"));
    }
    if !(input.lower() > 0.0) {
        return Err(Error::AssumptionViolation {
            assumption: Assumption::A2,
            detail: "feed concentration must be bounded below by a positive constant",
        });
    }
    if !(dilution.lower() >= 0.0) {
        return Err(Error::AssumptionViolation {
            assumption: Assumption::A2,
            detail: "dilution rate must be non-negative",
        });
    }
    if !(dilution.upper() > 0.0) {
        return Err(Error::AssumptionViolation {
            assumption: Assumption::A2,
            detail: "dilution rate must have a positive upper bound",
        });
    }
    uptake.validate(2.0 * input.upper(), 1000)?;

    let period = match period {
        Some(w) => {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidSpec("period must be positive"));
            }
            if !dilution.is_periodic_with(w) || !input.is_periodic_with(w) {
                return Err(Error::PeriodMismatch { period: w });
            }
            Some(w)
        }
        None => infer_period(&dilution, &input),
    };

    match period {
        Some(w) => {
            let mean = signal_average(&dilution, w)?;
            if !(mean > 0.0) {
                return Err(Error::AssumptionViolation {
                    assumption: Assumption::A2,
                    detail: "mean dilution must be positive for the integral of D to diverge",
                });
            }
        }
        None => {
            // aperiodic samples hold their last value, so that value decides divergence
            if let SignalKind::Sampled { values, .. } = dilution.kind() {
                if !(values[values.len() - 1] > 0.0) {
                    return Err(Error::AssumptionViolation {
                        assumption: Assumption::A2,
                        detail: "held tail of the dilution samples must be positive",
                    });
                }
            }
        }
    }

    Ok(ChemostatModel {
        tau,
        uptake,
        dilution,
        input,
        period,
    })
}

fn infer_period(a: &EnvironmentSignal, b: &EnvironmentSignal) -> Option<f64> {
    let aperiodic = |s: &EnvironmentSignal| !s.is_constant() && s.natural_period().is_none();
    if aperiodic(a) || aperiodic(b) {
        return None;
    }
    match (a.natural_period(), b.natural_period()) {
        (None, None) => Some(AUTONOMOUS_PERIOD),
        (Some(w), None) | (None, Some(w)) => Some(w),
        (Some(w1), Some(w2)) => {
            if b.is_periodic_with(w1) {
                Some(w1)
            } else if a.is_periodic_with(w2) {
                Some(w2)
            } else {
                None
            }
        }
    }
}

impl ChemostatModel {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn uptake(&self) -> &UptakeFunction {
        &self.uptake
    }

    pub fn dilution(&self) -> &EnvironmentSignal {
        &self.dilution
    }

    /// Feed concentration `s⁰`.
    pub fn input(&self) -> &EnvironmentSignal {
        &self.input
    }

    /// Common period `ω`, if the model is periodic.
    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn is_autonomous(&self) -> bool {
        self.dilution.is_constant() && self.input.is_constant()
    }

    /// Piecewise-constant dilution is admitted although the classical setting
    /// asks for continuous `D`; reports surface this flag.
    pub fn has_discontinuous_dilution(&self) -> bool {
        self.dilution.is_piecewise()
    }

    /// `s̄`, the certified upper bound of the feed.
    pub fn feed_upper(&self) -> f64 {
        self.input.upper()
    }

    pub fn dilution_mean(&self) -> Result<f64> {
        let w = self.period.ok_or(Error::NotPeriodic)?;
        signal_average(&self.dilution, w)
    }

    /// Same model with the dilution scaled by `k`.
    pub fn with_scaled_dilution(&self, k: f64) -> Result<Self> {
        make_model(
            self.tau,
            self.uptake.clone(),
            self.dilution.scaled(k)?,
            self.input.clone(),
            self.period,
        )
    }

    /// Same model with the feed scaled by `k`.
    pub fn with_scaled_input(&self, k: f64) -> Result<Self> {
        make_model(
            self.tau,
            self.uptake.clone(),
            self.dilution.clone(),
            self.input.scaled(k)?,
            self.period,
        )
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        make_model(
            tau,
            self.uptake.clone(),
            self.dilution.clone(),
            self.input.clone(),
            self.period,
        )
    }
}
