//! Invariants over randomly drawn environments.

use chemostat_dde_core::{
    compute_phi_periodic, compute_washout_periodic, integrate, make_model, signal_average,
    threshold_periodic, ChemostatModel, EnvironmentSignal, HistorySegment, UptakeFunction,
};
use proptest::prelude::*;

const OMEGA: f64 = 2.0;

fn harmonic(mean: f64, rel: f64, phase: f64) -> EnvironmentSignal {
    let a = rel * mean;
    EnvironmentSignal::fourier(mean, vec![a * phase.cos()], vec![a * phase.sin()], OMEGA).unwrap()
}

fn model(tau: f64, d: EnvironmentSignal, s0: EnvironmentSignal) -> ChemostatModel {
    make_model(tau, UptakeFunction::monod(2.0, 1.0).unwrap(), d, s0, Some(OMEGA)).unwrap()
}

/// Delay in `{0} ∪ [0.25, 1.5]`.
fn delay() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 0.25..1.5f64]
}

fn step(tau: f64) -> f64 {
    if tau > 0.0 { tau / 16.0 } else { OMEGA / 256.0 }
}

fn environment() -> impl Strategy<Value = ChemostatModel> {
    (delay(), 0.2..1.0f64, 0.0..0.6f64, 0.0..6.3f64, 0.5..2.0f64, 0.0..0.6f64, 0.0..6.3f64)
        .prop_map(|(tau, d, rd, pd, v, rv, pv)| model(tau, harmonic(d, rd, pd), harmonic(v, rv, pv)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_stay_non_negative(m in environment(), s in 0.0..2.0f64, x in 0.0..2.0f64) {
        let hist = HistorySegment::constant(m.tau(), 0.0, s, x).unwrap();
        let traj = integrate(&m, &hist, 12.0, step(m.tau())).unwrap();
        let mut e_prev = f64::NEG_INFINITY;
        for (t, v) in traj.nodes() {
            prop_assert!(v[0] >= 0.0 && v[1] >= 0.0, "state at {t}: {v:?}");
            prop_assert!(v[2] >= e_prev, "cumulative dilution fell at {t}");
            e_prev = v[2];
        }
    }

    #[test]
    fn washout_stays_within_feed_bounds(m in environment()) {
        let w = compute_washout_periodic(&m).unwrap();
        let (lo, hi) = (m.input().lower(), m.input().upper());
        prop_assert!(w.min() >= lo - 1e-9 && w.max() <= hi + 1e-9);
    }

    #[test]
    fn phi_is_a_fraction(m in environment()) {
        let w = compute_washout_periodic(&m).unwrap();
        let phi = compute_phi_periodic(&m, &w).unwrap();
        for (t, v, c) in phi.samples() {
            prop_assert!(v > 0.0 && v <= 1.0, "phi({t}) = {v}");
            prop_assert!(c > 0.0 && c <= 1.0, "c({t}) = {c}");
        }
        if m.tau() == 0.0 {
            prop_assert!(phi.samples().all(|(_, v, _)| v == 1.0));
        }
        prop_assert!(phi.identity_residual() < 1e-6);
    }

    #[test]
    fn lambda_grows_with_feed(tau in delay(), d in 0.2..1.0f64, v in 0.5..2.0f64, rv in 0.0..0.6f64, k in 1.05..2.0f64) {
        let m = model(tau, EnvironmentSignal::constant(d).unwrap(), harmonic(v, rv, 0.3));
        let a = threshold_periodic(&m).unwrap().lambda;
        let b = threshold_periodic(&m.with_scaled_input(k).unwrap()).unwrap().lambda;
        prop_assert!(b >= a - 1e-9, "{a} -> {b}");
    }

    #[test]
    fn lambda_falls_with_dilution(tau in delay(), d in 0.2..1.0f64, rd in 0.0..0.6f64, v in 0.5..2.0f64, k in 1.05..2.0f64) {
        let m = model(tau, harmonic(d, rd, 1.1), EnvironmentSignal::constant(v).unwrap());
        let a = threshold_periodic(&m).unwrap().lambda;
        let b = threshold_periodic(&m.with_scaled_dilution(k).unwrap()).unwrap().lambda;
        prop_assert!(b <= a + 1e-9, "{a} -> {b}");
    }
}

proptest! {
    #[test]
    fn average_is_shift_invariant(mean in 0.1..3.0f64, rel in 0.0..0.9f64, phase in 0.0..6.3f64, a in -10.0..10.0f64) {
        let f = harmonic(mean, rel, phase);
        let avg = signal_average(&f, OMEGA).unwrap();
        prop_assert!((avg - mean).abs() < 1e-12 * mean.max(1.0));
        prop_assert!((f.integral(a, a + OMEGA, 2048) / OMEGA - avg).abs() < 1e-10);
    }

    #[test]
    fn piecewise_average_is_shift_invariant(lo in 0.1..1.0f64, hi in 0.1..1.0f64, cut in 0.1..1.9f64, a in -10.0..10.0f64) {
        let f = EnvironmentSignal::piecewise_constant(vec![0.0, cut], vec![lo, hi], OMEGA).unwrap();
        let avg = signal_average(&f, OMEGA).unwrap();
        prop_assert!((avg - (lo * cut + hi * (OMEGA - cut)) / OMEGA).abs() < 1e-12);
        prop_assert!((f.integral(a, a + OMEGA, 64) / OMEGA - avg).abs() < 1e-10);
    }

    #[test]
    fn monod_uptake_is_increasing(mu in 0.1..5.0f64, k in 0.05..5.0f64) {
        let p = UptakeFunction::monod(mu, k).unwrap();
        for i in 0..1000 {
            let s = 10.0 * i as f64 / 999.0;
            prop_assert!(p.deriv(s) > 0.0);
            prop_assert!(p.eval(s) >= 0.0 && p.eval(s) < mu);
        }
    }

    #[test]
    fn signal_bounds_contain_every_value(mean in 0.1..3.0f64, rel in 0.0..0.9f64, phase in 0.0..6.3f64) {
        let f = harmonic(mean, rel, phase);
        for i in 0..1000 {
            let v = f.eval(OMEGA * i as f64 / 1000.0);
            prop_assert!(v >= f.lower() - 1e-12 && v <= f.upper() + 1e-12);
        }
    }
}
