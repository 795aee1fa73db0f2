use linda_cli::Settings;
use proptest::prelude::*;

fn keys() -> Vec<String> {
    Settings::default().as_map().keys().cloned().collect()
}

proptest! {
    #[test]
    fn resolved_config_text_round_trips(
        picks in prop::collection::vec((any::<prop::sample::Index>(), "[a-z0-9.,:_-]{1,12}"), 0..12)
    ) {
        let keys = keys();
        let mut s = Settings::default();
        for (idx, value) in &picks {
            s.apply_assignment(&format!("{}={value}", idx.get(&keys))).unwrap();
        }
        let mut back = Settings::default();
        back.apply_str(&s.to_kv_string(), "resolved").unwrap();
        prop_assert_eq!(back.as_map(), s.as_map());
    }

    #[test]
    fn later_assignments_win(idx in any::<prop::sample::Index>(), first in "[a-z0-9]{1,8}", second in "[a-z0-9]{1,8}") {
        let keys = keys();
        let key = idx.get(&keys);
        let mut s = Settings::default();
        s.apply_str(&format!("{key}: {first}"), "file").unwrap();
        s.apply_assignment(&format!("{key}={second}")).unwrap();
        prop_assert_eq!(s.get(key), second.as_str());
    }

    #[test]
    fn unknown_keys_are_rejected(key in "[a-z]{1,6}\\.[a-z]{1,6}_x") {
        let assignment = format!("{key}=1");
        prop_assert!(Settings::default().apply_assignment(&assignment).is_err());
    }
}
