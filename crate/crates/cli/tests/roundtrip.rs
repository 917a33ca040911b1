use molforge::config::{Preset, RunConfig};
use molforge::runlog::Ledger;
use proptest::prelude::*;

const POOL: [&str; 6] = ["C", "CC", "CO", "C=O", "C1CC1", "CCN"];

proptest! {
    #[test]
    fn ledger_text_round_trips(events in prop::collection::vec((0..POOL.len(), -50i32..50), 0..40)) {
        let mut ledger = Ledger::default();
        for (ep, &(k, r)) in events.iter().enumerate() {
            ledger.record(POOL[k], r as f64 / 4.0, ep);
        }
        let again = Ledger::parse(&ledger.to_text()).unwrap();
        prop_assert_eq!(&again, &ledger);
        let top = ledger.top(3);
        prop_assert!(top.windows(2).all(|w| w[0].best_reward >= w[1].best_reward));
        prop_assert!(ledger.last_unique(2).len() == ledger.len().min(2));
    }

    #[test]
    fn config_text_is_a_fixed_point(
        desk in any::<bool>(),
        episodes in 1usize..5000,
        seed in any::<u64>(),
        hidden in prop::collection::vec(1usize..300, 1..4),
        steps in 1usize..60,
        lr in 1e-6f64..1e-1,
    ) {
        let preset = if desk { Preset::Desk } else { Preset::Full };
        let mut cfg = RunConfig::preset(preset);
        cfg.set_episodes(episodes);
        cfg.seed = seed;
        cfg.train.hidden = hidden;
        cfg.mdp.max_steps = steps;
        cfg.train.learning_rate = lr;
        let text = cfg.to_text();
        let parsed = RunConfig::parse(&text, None).unwrap();
        prop_assert_eq!(parsed.to_text(), text);
        prop_assert_eq!(&parsed.train, &cfg.train);
        prop_assert_eq!(&parsed.mdp, &cfg.mdp);
        prop_assert_eq!(parsed.seed, seed);
    }
}
