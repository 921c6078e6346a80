use std::path::Path;

use inverter_doa::export::fmt12;
use inverter_doa::Study;
use proptest::prelude::*;

fn base() -> Study {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../studies/table_a3.json");
    Study::load(&path).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn override_sets_the_field(xg in 0.05f64..2.0, m_q in 0.0f64..20.0) {
        let s = base().with_overrides(&[format!("network.xg={xg}"), format!("ibr2.m_q={m_q}")]).unwrap();
        prop_assert_eq!(s.network.xg, xg);
        prop_assert_eq!(s.to_value()["ibr2"]["m_q"].as_f64(), Some(m_q));
    }

    #[test]
    fn digest_tracks_content(xg in 0.05f64..2.0) {
        let b = base();
        let s = b.with_overrides(&[format!("network.xg={xg}")]).unwrap();
        prop_assert_eq!(s.digest(), Study::from_json(&s.to_value().to_string()).unwrap().digest());
        prop_assert_eq!(s.digest() == b.digest(), xg == b.network.xg);
    }

    #[test]
    fn twelve_digit_format_round_trips(v in -1e6f64..1e6) {
        let back: f64 = fmt12(v).parse().unwrap();
        prop_assert!((back - v).abs() <= 1e-11 * v.abs().max(1e-300));
    }
}
