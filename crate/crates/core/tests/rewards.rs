use molforge_core::actions::*;
use molforge_core::molgraph::*;
use molforge_core::properties::*;
use molforge_core::rewards::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mol(s: &str) -> Molecule {
    parse_smiles(s).unwrap()
}

fn reward_fn(variant: RewardVariant) -> RewardFn {
    RewardFn::new(RewardSpec::new(variant), Properties::default()).unwrap()
}

#[test]
fn range_examples() {
    assert_eq!(target_range_reward(175.0, 150.0, 200.0), 1.0);
    assert_eq!(target_range_reward(140.0, 150.0, 200.0), -10.0);
    assert_eq!(target_range_reward(150.0, 150.0, 200.0), 1.0);
    assert_eq!(target_range_reward(200.0, 150.0, 200.0), 1.0);
    assert_eq!(target_range_reward(230.0, 150.0, 200.0), -30.0);
}

#[test]
fn constrained_examples() {
    let origin = mol("CCC(C)CO");
    let f = reward_fn(RewardVariant::ConstrainedLogP {
        origin: origin.clone(),
        delta: 0.6,
        lambda: 100.0,
    });
    let plogp = |m: &Molecule| penalized_logp(m, LogPTable::bundled(), SaProxy::Zero).unwrap();
    assert_eq!(f.raw(&origin).unwrap(), plogp(&origin));
    assert_eq!(constrained_penalty(0.59, 0.6, 100.0), 100.0 * (0.6 - 0.59));
    assert!((constrained_penalty(0.59, 0.6, 100.0) - 1.0).abs() < 1e-9);
    assert_eq!(constrained_penalty(0.6, 0.6, 100.0), 0.0);
    let far = mol("OC(=O)C#N");
    let sim = similarity(&far, &origin);
    assert!(sim < 0.6);
    assert!((f.raw(&far).unwrap() - (plogp(&far) - 100.0 * (0.6 - sim))).abs() < 1e-9);
}

#[test]
fn scalarize_examples() {
    assert_eq!(scalarize(0.0, 0.3, 0.9), 0.9);
    assert_eq!(scalarize(1.0, 0.3, 0.9), 0.3);
    assert!((scalarize(0.4, 0.5, 0.8) - 0.68).abs() < 1e-12);
    let v = RewardVector { components: vec![0.5, 0.8] };
    assert!((scalarize_vector(&[0.4, 0.6], &v) - 0.68).abs() < 1e-12);
}

#[test]
fn step_reward_examples() {
    let spec = RewardSpec::new(RewardVariant::Maximize {
        property: PropertyKind::MolecularWeight,
    });
    let props = Properties::default();
    let m = mol("CCO");
    let raw = molecular_weight(&m);
    assert_eq!(step_reward(&spec, &props, &State::new(m.clone(), 40), 40).unwrap(), raw);
    assert!((step_reward(&spec, &props, &State::new(m.clone(), 39), 40).unwrap() - 0.9 * raw).abs() < 1e-12);
    let final_only = RewardSpec { per_step: false, ..spec };
    assert_eq!(step_reward(&final_only, &props, &State::new(m.clone(), 39), 40).unwrap(), 0.0);
    assert_eq!(step_reward(&final_only, &props, &State::new(m, 40), 40).unwrap(), raw);
}

#[test]
fn relative_improvement_examples() {
    assert_eq!(relative_improvement(0.5, 0.5).unwrap(), 0.0);
    assert_eq!(relative_improvement(1.0, 0.5).unwrap(), 1.0);
    assert!((relative_improvement(0.7, 0.5).unwrap() - 0.4).abs() < 1e-12);
    assert!(matches!(relative_improvement(0.7, 1.0), Err(RewardError::DivisionByZero)));
}

#[test]
fn spec_validation() {
    let origin = mol("CCO");
    let bad = [
        RewardVariant::TargetRange { property: PropertyKind::MolecularWeight, lower: 2.0, upper: 1.0 },
        RewardVariant::ConstrainedLogP { origin: origin.clone(), delta: 1.5, lambda: 100.0 },
        RewardVariant::ConstrainedLogP { origin: origin.clone(), delta: 0.5, lambda: -1.0 },
        RewardVariant::MultiObjective { origin: origin.clone(), weight: 1.2, property: PropertyKind::LogP },
    ];
    for v in bad {
        assert!(RewardSpec::new(v).validate().is_err());
    }
    for gamma in [0.0, 1.5, f64::NAN] {
        let spec = RewardSpec { gamma, ..RewardSpec::new(RewardVariant::Maximize { property: PropertyKind::LogP }) };
        assert!(spec.validate().is_err(), "{gamma}");
    }
    assert!(RewardSpec { gamma: 1.0, ..RewardSpec::new(RewardVariant::Maximize { property: PropertyKind::LogP }) }
        .validate()
        .is_ok());
}

#[test]
fn multi_objective_vector_and_scalar_agree() {
    let origin = mol("CC(C)CCO");
    let f = reward_fn(RewardVariant::MultiObjective { origin: origin.clone(), weight: 0.3, property: PropertyKind::LogP });
    for s in ["CC(C)CCO", "CCCCO", "C1CCCCC1", "CC(C)CC(=O)O"] {
        let m = mol(s);
        let v = f.reward_vector(&m).unwrap();
        assert_eq!(v.components.len(), 2);
        assert_eq!(v.components[0], similarity(&m, &origin));
        assert!((f.raw(&m).unwrap() - scalarize_vector(&[0.3, 0.7], &v)).abs() < 1e-12);
    }
    assert_eq!(f.reward_vector(&origin).unwrap().components[0], 1.0);
}

/// Sum of per-step discounted rewards along a random trajectory equals the
/// discount applied afterwards to the raw rewards.
#[test]
fn discounting_telescopes() {
    let cfg = MdpConfig { max_steps: 12, ..MdpConfig::default() };
    let f = reward_fn(RewardVariant::Maximize { property: PropertyKind::LogP });
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..50 {
        let mut s = cfg.initial_state();
        let (mut at_emission, mut raws) = (0.0, Vec::new());
        for _ in 0..=cfg.max_steps {
            at_emission += f.step_reward(&s, cfg.max_steps).unwrap();
            raws.push(f.raw(&s.molecule).unwrap());
            if s.is_terminal(&cfg) {
                break;
            }
            let acts = valid_actions(&s, &cfg).unwrap();
            s = apply(&s, &acts[rng.gen_range(0..acts.len())], &cfg).unwrap();
        }
        let at_aggregation: f64 = raws
            .iter()
            .enumerate()
            .map(|(t, r)| 0.9f64.powi((cfg.max_steps - t) as i32) * r)
            .sum();
        assert!((at_emission - at_aggregation).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn range_reward_shape(l in -100.0f64..100.0, width in 0.0f64..50.0, p in -300.0f64..300.0, eps in 1e-6f64..10.0) {
        let u = l + width;
        let r = target_range_reward(p, l, u);
        if p >= l && p <= u {
            prop_assert_eq!(r, 1.0);
        } else {
            prop_assert!(r < 0.0);
            let farther = if p < l { p - eps } else { p + eps };
            prop_assert!(target_range_reward(farther, l, u) < r);
        }
        // Continuity away from the two range ends.
        let d = (p - l).abs().min((p - u).abs());
        if d > 1e-3 {
            prop_assert!((target_range_reward(p + 1e-6, l, u) - r).abs() < 1e-5);
        }
    }

    #[test]
    fn penalty_is_nonnegative(sim in 0.0f64..=1.0, delta in 0.0f64..=1.0, lambda in 0.0f64..500.0) {
        let p = constrained_penalty(sim, delta, lambda);
        prop_assert!(p >= 0.0);
        if sim >= delta {
            prop_assert_eq!(p, 0.0);
        }
    }

    #[test]
    fn scalarize_is_affine(w in 0.0f64..=1.0, dw in 0.0f64..=1.0, sim in -5.0f64..5.0, prop in -5.0f64..5.0) {
        let w2 = (w + dw).min(1.0);
        let (a, b) = (scalarize(w, sim, prop), scalarize(w2, sim, prop));
        if sim >= prop {
            prop_assert!(b >= a - 1e-12);
        } else {
            prop_assert!(b <= a + 1e-12);
        }
        let mid = scalarize(0.5 * (w + w2), sim, prop);
        prop_assert!((mid - 0.5 * (a + b)).abs() < 1e-9);
    }
}
