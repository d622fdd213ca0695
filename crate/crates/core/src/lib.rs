//! Numerics for the chemostat with a fixed growth delay and time-varying
//! dilution `D(t)` and feed `s⁰(t)`:
//!
//! ```text
//! s'(t) = D(t)(s⁰(t) − s(t)) − p(s(t))·x(t)
//! x'(t) = x(t−τ)·p(s(t−τ))·e^{−∫_{t−τ}^t D} − D(t)·x(t)
//! ```
//!
//! The crate is `no_std` (with `alloc`). It provides a method-of-steps RK4
//! integrator with dense output, the washout solution `z*` and the ratio
//! function `φ`, the persistence threshold `λ = ⟨p(z*)φ⟩ − ⟨D⟩`, and the
//! positive periodic orbit found by iterating the period map.
#![no_std]
// `!(a > b)` is deliberate throughout: it rejects NaN along with the bound.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dense;
pub mod error;
pub mod history;
pub mod integrator;
pub mod interp;
pub mod math;
pub mod model;
pub mod orbit;
pub mod persistence;
pub mod phi;
pub mod quad;
pub mod scenarios;
pub mod signal;
mod steps;
pub mod uptake;
pub mod washout;

pub use error::{Assumption, Error, Result};
pub use history::HistorySegment;
pub use integrator::{
    compute_psi, conservation_residual, evaluate_y, integrate, PsiFunction, Trajectory,
};
pub use model::{make_model, ChemostatModel};
pub use signal::{signal_average, EnvironmentSignal, Interpolation, Side};
pub use uptake::UptakeFunction;
pub use washout::{compute_washout_general, compute_washout_periodic, WashoutSolution};
pub use phi::{compute_phi_periodic, compute_phi_periodic_with, lemma_contraction_check, ContractionReport, PhiFunction, PhiOptions};
pub use persistence::{
    proof_constants, threshold_periodic, uniform_persistence_probe, window_condition_general,
    Classification, PersistenceReport, ProbeReport, ProofConstants, WindowReport,
};
pub use orbit::{
    attraction_rate, find_periodic_orbit, poincare_map, verify_orbit, AttractionReport,
    OrbitOptions, OrbitVerification, PeriodicOrbit,
};
