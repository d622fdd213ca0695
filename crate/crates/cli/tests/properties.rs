//! Parser and round-trip invariants of the scenario format.

use chemostat_dde::{Config, Scenario, Value};
use proptest::prelude::*;

fn key() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-z0-9_]{1,6}", 1..4).prop_map(|parts| parts.join("."))
}

fn number() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        -1e3..1e3f64,
        Just(0.0),
        Just(-0.0),
    ]
}

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        number().prop_map(Value::Number),
        "[ -~]{0,20}".prop_map(Value::Text),
        prop::collection::vec(number(), 2..6).prop_map(Value::List),
    ]
}

proptest! {
    #[test]
    fn config_text_round_trips(entries in prop::collection::btree_map(key(), value(), 0..12)) {
        let mut c = Config::new();
        for (k, v) in &entries {
            c.set(k, v.clone());
        }
        let back = Config::parse(&c.to_text(), "generated").unwrap();
        prop_assert_eq!(&back, &c);
        // bit-exact numbers, including the sign of zero
        for (k, v) in &entries {
            if let (Value::Number(a), Some(Value::Number(b))) = (v, back.get(k)) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn parser_never_panics(text in "[ -~\n]{0,200}") {
        let _ = Config::parse(&text, "fuzz");
    }

    #[test]
    fn parse_errors_point_inside_the_input(text in "[a-z.=\" ,0-9#]{1,40}") {
        if let Err(chemostat_dde::CliError::Parse { line, column, .. }) = Config::parse(&text, "fuzz") {
            let l = text.lines().nth(line - 1).unwrap_or("");
            prop_assert!(column >= 1 && column <= l.chars().count() + 1);
        }
    }

    #[test]
    fn typed_scenarios_round_trip(
        tau in 0.0..3.0f64,
        d in 0.1..1.5f64,
        mean in 0.5..2.0f64,
        amp in 0.0..0.4f64,
        n in 8usize..64,
        hist in prop::collection::vec(0.01..1.0f64, 2..6),
    ) {
        let mut c = Config::new();
        c.set("model.tau", Value::Number(tau));
        c.set("uptake.max_rate", Value::Number(2.0));
        c.set("uptake.half_saturation", Value::Number(1.0));
        c.set("d.kind", Value::text("constant"));
        c.set("d.value", Value::Number(d));
        c.set("s0.kind", Value::text("fourier"));
        c.set("s0.mean", Value::Number(mean));
        c.set("s0.cos", Value::Number(amp));
        c.set("s0.period", Value::Number(2.0));
        c.set("run.n", Value::Number(n as f64));
        c.set("history.x", Value::list(hist));
        let sc = Scenario::from_config(&c).unwrap();
        let text = sc.to_config().to_text();
        let again = Scenario::from_config(&Config::parse(&text, "generated").unwrap()).unwrap();
        prop_assert_eq!(&again, &sc);
        prop_assert_eq!(again.to_config().to_text(), text);
    }
}
