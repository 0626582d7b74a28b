mod common;

use common::{corpus, engine, root};
use protogame::validity::{
    check_omega_instances, solve, verify_opponent_certificate, verify_player_certificate, SearchLimits,
};

const VALID: &[&str] = &[
    "p_implies_p",
    "qq_p_p",
    "peirce",
    "ex4",
    "drinker",
    "one_packet",
    "two_packets",
];
const INVALID: &[&str] = &["p_implies_q", "p_alone", "exists_to_forall", "forall_p"];

#[test]
fn valid_corpus_formulas_have_checked_certificates() {
    let prog = corpus();
    let e = engine(&prog);
    let lim = SearchLimits::default();
    for name in VALID {
        let f = root(&prog, name);
        let v = solve(&e, &f, &lim).unwrap();
        assert!(v.is_valid(), "{name}: {}", v.label());
        assert!(!v.stats().limit_hit);
        let cert = v.certificate().unwrap();
        assert!(verify_player_certificate(&e, &f, cert, lim.max_depth).unwrap(), "{name}");
    }
}

#[test]
fn invalid_corpus_formulas_have_checked_traps() {
    let prog = corpus();
    let e = engine(&prog);
    let lim = SearchLimits::default();
    for name in INVALID {
        let f = root(&prog, name);
        let v = solve(&e, &f, &lim).unwrap();
        assert!(v.is_invalid(), "{name}: {}", v.label());
        let cert = v.certificate().unwrap();
        assert!(verify_opponent_certificate(&e, &f, cert, 10_000).unwrap(), "{name}");
    }
}

#[test]
fn drinker_is_won_in_six_positions() {
    let prog = corpus();
    let v = solve(&engine(&prog), &root(&prog, "drinker"), &SearchLimits::default()).unwrap();
    assert_eq!(v.stats().states, 6);
}

#[test]
fn typed_formulas_hold_for_small_counts() {
    let prog = corpus();
    let e = engine(&prog);
    let lim = SearchLimits::default();
    for name in ["typed_packets", "typed_ack_count", "typed_simple"] {
        let f = root(&prog, name);
        for (n, v) in check_omega_instances(&e, &f, &[0, 1, 2, 3, 4, 5], &lim).unwrap() {
            assert!(v.is_valid(), "{name} n={n}: {}", v.label());
        }
    }
}

#[test]
fn typed_search_grows_linearly() {
    let prog = corpus();
    let e = engine(&prog);
    let f = root(&prog, "typed_packets");
    let states: Vec<usize> = check_omega_instances(&e, &f, &[1, 2, 3], &SearchLimits::default())
        .unwrap()
        .into_iter()
        .map(|(_, v)| v.stats().states)
        .collect();
    assert_eq!(states[2] - states[1], states[1] - states[0]);
}

#[test]
fn tiny_budget_gives_unknown() {
    let prog = corpus();
    let lim = SearchLimits { max_states: 3, ..SearchLimits::default() };
    let v = solve(&engine(&prog), &root(&prog, "two_packets"), &lim).unwrap();
    assert_eq!(v.label(), "Unknown");
    assert!(v.stats().limit_hit);
}

mod keys {
    use super::common::{c, corpus, engine, root};
    use protogame::game::{GameState, Move, Mover, Value};
    use protogame::validity::canonical_state;
    use protogame::Engine;

    /// Drinker after the receiver offers `a` and the sender picks `y`.
    fn line_four(e: &Engine, a: Value, y: Value) -> GameState {
        let prog = corpus();
        let s = e.init(&root(&prog, "drinker")).unwrap();
        let (s, _) = e.apply_move(&s, &Move::new(Mover::Opponent, s.root.clone(), vec![])).unwrap();
        let g = s.u.get_index(1).unwrap().clone();
        let (s, _) = e.apply_move(&s, &Move::new(Mover::Player, g, vec![a])).unwrap();
        let v = s.v[0].clone();
        e.apply_move(&s, &Move::new(Mover::Opponent, v, vec![y])).unwrap().0
    }

    #[test]
    fn keys_ignore_constant_names_but_not_structure() {
        let e = engine(&corpus());
        let one = line_four(&e, c("a"), c("b"));
        let swapped = line_four(&e, c("b"), c("a"));
        let two = line_four(&e, c("a"), c("a"));
        assert_eq!(canonical_state(&one), canonical_state(&swapped));
        assert_ne!(canonical_state(&one), canonical_state(&two));
    }
}
