//! Frozen reference values and independent oracles for the standard suite.

use chemostat_dde_core::persistence::threshold_periodic_with;
use chemostat_dde_core::quad::bisect;
use chemostat_dde_core::scenarios::{scenario, standard_suite};
use chemostat_dde_core::washout::period_grid;
use chemostat_dde_core::{
    compute_washout_periodic, conservation_residual, integrate, threshold_periodic, PhiOptions,
};

/// `λ` of every suite member, frozen when the suite was designed.
const LAMBDA: [(&str, f64); 11] = [
    ("constant-persistent", 0.20346742249838967),
    ("constant-undelayed", 0.5),
    ("constant-extinct", -0.47369724898534515),
    ("piecewise-undelayed", 0.3897660449590953),
    ("piecewise-persistent", 0.1444776842118396),
    ("piecewise-extinct", -0.4876413769555592),
    ("fourier-persistent", 0.2169261717450255),
    ("fourier-long-delay", 0.13180141428653996),
    ("fourier-extinct", -0.3958952891569596),
    ("fourier-extinct-delayed", -0.49174729369361325),
    ("fourier-incommensurate", 0.15065598014966874),
];

/// `C` in `conservation residual ≤ C·h⁴` over `[0, 20]`, measured once on
/// the ladder `h, h/2, h/4` from the suite step and frozen at twice the
/// largest value seen.
const CONSERVATION_C: [(&str, f64); 11] = [
    ("constant-persistent", 1e-4),
    ("constant-undelayed", 1.2e-4),
    ("constant-extinct", 8e-4),
    ("piecewise-undelayed", 1.1e-3),
    ("piecewise-persistent", 9e-4),
    ("piecewise-extinct", 7e-3),
    ("fourier-persistent", 1.1e-2),
    ("fourier-long-delay", 4.6e-3),
    ("fourier-extinct", 3.2e-2),
    ("fourier-extinct-delayed", 8.9e-3),
    ("fourier-incommensurate", 1.1e-2),
];

#[test]
fn lambda_matches_frozen_values() {
    assert_eq!(standard_suite().len(), LAMBDA.len());
    for (name, expected) in LAMBDA {
        let sc = scenario(name).unwrap();
        let r = threshold_periodic(&sc.model).unwrap();
        assert!((r.lambda - expected).abs() < 1e-10, "{name}: {} vs {expected}", r.lambda);
        assert_eq!(r.classification, sc.expected, "{name}");
    }
}

#[test]
fn lambda_is_converged_in_the_grid() {
    for sc in standard_suite() {
        let tau = sc.model.tau();
        let omega = sc.model.period().unwrap();
        let n = period_grid(omega, tau);
        let per_delay = 256 * ((tau / omega - 1e-9).ceil().max(1.0) as usize);
        let coarse = PhiOptions {
            samples_per_period: Some(n),
            steps_per_delay: Some(per_delay),
            ..PhiOptions::default()
        };
        let fine = PhiOptions {
            samples_per_period: Some(2 * n),
            steps_per_delay: Some(2 * per_delay),
            ..PhiOptions::default()
        };
        let a = threshold_periodic_with(&sc.model, &coarse).unwrap().lambda;
        let b = threshold_periodic_with(&sc.model, &fine).unwrap().lambda;
        assert!((a - b).abs() < 1e-9, "{}: {a} vs {b}", sc.name);
    }
}

#[test]
fn conservation_stays_under_frozen_fourth_order_bound() {
    for (name, c) in CONSERVATION_C {
        let sc = scenario(name).unwrap();
        let w = compute_washout_periodic(&sc.model).unwrap();
        for k in [1.0, 2.0, 4.0] {
            let h = sc.step() / k;
            let traj = integrate(&sc.model, &sc.history(), 20.0, h).unwrap();
            let r = conservation_residual(&traj, &w);
            // below 1e−11 the residual is rounding, not truncation
            assert!(r <= c * h.powi(4) || r < 1e-11, "{name} h={h}: {r:e} > {:e}", c * h.powi(4));
        }
    }
}

/// With constant `D = d`, `s⁰ = v`: `z* = v` and `φ` is the root of
/// `φ = exp(−τ p(v) φ)`, so `λ = p(v)φ − d`.
#[test]
fn constant_environments_match_the_scalar_oracle() {
    let pv = 2.0 * 1.0 / (1.0 + 1.0);
    for (name, d, tau) in [
        ("constant-persistent", 0.5, 0.5),
        ("constant-undelayed", 0.5, 0.0),
        ("constant-extinct", 0.9, 2.0),
    ] {
        let phi = bisect(|u| u - (-tau * pv * u).exp(), 0.0, 1.0, 1e-15).unwrap();
        let lambda = threshold_periodic(&scenario(name).unwrap().model).unwrap().lambda;
        assert!((lambda - (pv * phi - d)).abs() < 1e-9, "{name}");
    }
}
