use core::fmt;

/// Standing hypothesis of the model that a constructor can reject.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// Uptake law: `C¹`, strictly increasing, `p(0) = 0`.
    A1,
    /// Environment: `s⁰` bounded between positive constants, `D` bounded,
    /// non-negative, with divergent integral.
    A2,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assumption::A1 => f.write_str("A1"),
            Assumption::A2 => f.write_str("A2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    AssumptionViolation {
        assumption: Assumption,
        detail: &'static str,
    },
    InvalidSpec(&'static str),
    PeriodMismatch {
        period: f64,
    },
    NotPeriodic,
    StepNotDividingDelay {
        tau: f64,
        h: f64,
    },
    NegativeHistory {
        index: usize,
    },
    BlowUp {
        t: f64,
    },
    OutOfRange {
        t: f64,
    },
    ZeroBiomass {
        t: f64,
    },
    DegenerateDilution {
        mean: f64,
    },
    HorizonTooShort {
        needed: f64,
        horizon: f64,
    },
    NoConvergence {
        iterations: usize,
        last_ratio: f64,
    },
    BoundViolated {
        t: f64,
        lhs: f64,
        rhs: f64,
    },
    NotPersistent {
        lambda: f64,
    },
    ProbeFailed {
        member: usize,
        floor: f64,
    },
    IdentityViolated {
        identity: &'static str,
        residual: f64,
    },
    FitFailed {
        r_squared: f64,
    },
    DegenerateInput,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::AssumptionViolation { assumption, detail } => {
                write!(f, "assumption {assumption} violated: {detail}")
            }
            Error::InvalidSpec(what) => write!(f, "invalid specification: {what}"),
            Error::PeriodMismatch { period } => {
                write!(f, "declared period {period} is not a period of both signals")
            }
            Error::NotPeriodic => f.write_str("signal is not periodic with the given period"),
            Error::StepNotDividingDelay { tau, h } => {
                write!(f, "step {h} does not divide the delay {tau}")
            }
            Error::NegativeHistory { index } => {
                write!(f, "initial history is negative at sample {index}")
            }
            Error::BlowUp { t } => write!(f, "state left the bounded region at t = {t}"),
            Error::OutOfRange { t } => write!(f, "t = {t} is outside the computed range"),
            Error::ZeroBiomass { t } => write!(f, "biomass vanished at t = {t}"),
            Error::DegenerateDilution { mean } => {
                write!(f, "mean dilution {mean} is not positive")
            }
            Error::HorizonTooShort { needed, horizon } => {
                write!(f, "horizon {horizon} too short, need at least {needed}")
            }
            Error::NoConvergence {
                iterations,
                last_ratio,
            } => write!(
                f,
                "no convergence after {iterations} periods (last contraction ratio {last_ratio})"
            ),
            Error::BoundViolated { t, lhs, rhs } => {
                write!(f, "bound violated at t = {t}: {lhs} >= {rhs}")
            }
            Error::NotPersistent { lambda } => {
                write!(f, "model is not classified persistent (lambda = {lambda})")
            }
            Error::ProbeFailed { member, floor } => {
                write!(f, "ensemble member {member} has non-positive floor {floor}")
            }
            Error::IdentityViolated { identity, residual } => {
                write!(f, "{identity} violated with residual {residual}")
            }
            Error::FitFailed { r_squared } => {
                write!(f, "decay is not geometric (R² = {r_squared})")
            }
            Error::DegenerateInput => f.write_str("degenerate input"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T, E = Error> = core::result::Result<T, E>;
