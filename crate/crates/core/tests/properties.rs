use std::cmp::Ordering;

use proptest::prelude::*;

use cwc::dsl::{format_term, parse_model};
use cwc::matcher::enumerate_contexts;
use cwc::ssa::{enumerate_transitions, rng_for, run, Model, SimConfig, TerminalStatus};
use cwc::term::Term;
use cwc::testkit::{random_rule, random_term, random_term_with_copies, shuffled_text, TermShape};
use cwc::{parse_term, Rule};

fn term_from(seed: u64) -> Term {
    let mut rng = rng_for(seed, 1);
    if seed.is_multiple_of(2) {
        random_term(&mut rng, TermShape::SMALL)
    } else {
        random_term_with_copies(&mut rng, TermShape::SMALL)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn format_parse_round_trip(seed in any::<u64>()) {
        let t = term_from(seed);
        prop_assert_eq!(parse_term(&format_term(&t)).unwrap(), t);
    }

    #[test]
    fn canonical_form_is_idempotent(seed in any::<u64>()) {
        let t = term_from(seed);
        let again = Term::from_simples(t.elements().iter_expanded().cloned());
        prop_assert_eq!(&again, &t);
        let mut rng = rng_for(seed, 2);
        let text = shuffled_text(&mut rng, &t);
        prop_assert_eq!(parse_term(&text).unwrap(), t);
    }

    #[test]
    fn order_is_total_and_consistent(a in any::<u64>(), b in any::<u64>()) {
        let (x, y) = (term_from(a), term_from(b));
        prop_assert_eq!(x.cmp(&y), y.cmp(&x).reverse());
        prop_assert_eq!(x.cmp(&y) == Ordering::Equal, x == y);
        prop_assert_eq!(x == y, x.to_string() == y.to_string());
    }

    #[test]
    fn resolve_replace_round_trip(seed in any::<u64>()) {
        let t = term_from(seed);
        for ctx in enumerate_contexts(&t) {
            let local = t.resolve(&ctx.path).unwrap().clone();
            prop_assert_eq!(t.replace_at(&ctx.path, local).unwrap(), t.clone());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn incremental_matches_full(seed in any::<u64>()) {
        let mut rng = rng_for(seed, 3);
        let rules: Vec<Rule> = (0..4).map(|_| random_rule(&mut rng)).collect();
        let model = Model { init: term_from(seed), rules, observables: Vec::new() };
        let cfg = SimConfig {
            t_max: f64::INFINITY,
            max_events: Some(60),
            seed,
            cross_check: true,
            ..SimConfig::default()
        };
        let traj = run(&model, &cfg, 0);
        prop_assert_eq!(traj.discrepancies, 0);
        if traj.status == TerminalStatus::Deadlock {
            prop_assert!(enumerate_transitions(&traj.final_state, &model.rules).unwrap().is_empty());
        }
    }
}

#[test]
fn bundled_models_parse_and_start() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let m = parse_model(&text).unwrap_or_else(|d| panic!("{}: {d:?}", path.display()));
        let ts = enumerate_transitions(&m.init, &m.rules).unwrap();
        assert!(!ts.is_empty(), "{} starts deadlocked", path.display());
        assert!(m.directives.tmax.is_some(), "{} has no horizon", path.display());
        seen += 1;
    }
    assert!(seen >= 7);
}
