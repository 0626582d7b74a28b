mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use common::{corpus, engine, root};
use protogame::formula::{Binder, Sign};
use protogame::game::{AckChoice, Transcript, TranscriptRow, WinReason};
use protogame::netsim::{simulate, EventKind, LossModel};
use protogame::syntax::SourceText;
use protogame::validity::{canonical_state, solve, verify_player_certificate, SearchLimits};
use protogame::{
    alpha_equal, compose, evaluate_term, expand_sugar, free_vars, is_normal, normalize, occurrences, parse_formula,
    print_formula, substitute, Engine, Formula, GameState, Mover, NormalFormula, Outcome, Signature, Sort, SurfaceFormula,
    Term,
};

const CASES: u32 = 256;

fn sig() -> Signature {
    let mut s = Signature::new();
    for p in ["p", "q", "r"] {
        s.declare_predicate(p, vec![]).unwrap();
    }
    s.declare_predicate("P", vec![Sort::Ack]).unwrap();
    s.declare_predicate("R", vec![Sort::Ack, Sort::Ack]).unwrap();
    s.declare_predicate("U", vec![Sort::Int]).unwrap();
    s.declare_constant("a").unwrap();
    s.declare_constant("b").unwrap();
    s
}

fn ack_term() -> impl Strategy<Value = Term> {
    prop_oneof![
        prop::sample::select(vec!["x", "y", "z"]).prop_map(Term::ack_var),
        prop::sample::select(vec!["a", "b"]).prop_map(Term::constant),
    ]
}

fn int_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![prop::sample::select(vec!["i", "j"]).prop_map(Term::int_var), (0u64..4).prop_map(Term::Nat)];
    leaf.prop_recursive(2, 4, 1, |t| t.prop_map(Term::succ))
}

fn atom() -> impl Strategy<Value = Formula> {
    prop_oneof![
        Just(Formula::Falsum),
        prop::sample::select(vec!["p", "q", "r"]).prop_map(Formula::prop),
        ack_term().prop_map(|t| Formula::atom("P", vec![t])),
        (ack_term(), ack_term()).prop_map(|(t, u)| Formula::atom("R", vec![t, u])),
        int_term().prop_map(|t| Formula::atom("U", vec![t])),
    ]
}

fn formula() -> impl Strategy<Value = Formula> {
    atom().prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            3 => (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
            2 => (prop::sample::select(vec![("x", Sort::Ack), ("y", Sort::Ack), ("i", Sort::Int)]), inner.clone())
                .prop_map(|((n, s), b)| Formula::forall(n, s, b)),
            1 => (int_term(), int_term(), inner).prop_map(|(t, u, b)| Formula::guard(t, u, b)),
        ]
    })
}

fn close(f: Formula) -> Formula {
    free_vars(&f).into_iter().fold(f, |acc, (n, s)| Formula::forall(&n, s, acc))
}

fn prop_formula() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        1 => Just(Formula::Falsum),
        4 => prop::sample::select(vec!["p", "q", "r"]).prop_map(Formula::prop),
    ];
    leaf.prop_recursive(4, 16, 2, |inner| (inner.clone(), inner).prop_map(|(a, b)| Formula::implies(a, b)))
}

fn truth(f: &Formula, v: &BTreeMap<&str, bool>) -> bool {
    match f {
        Formula::Falsum => false,
        Formula::Atom(p, _) => v[p.as_str()],
        Formula::Implies(a, b) => !truth(a, v) || truth(b, v),
        _ => unreachable!("propositional"),
    }
}

/// Truth-table check.
fn tautology(f: &Formula) -> bool {
    (0..8u8).all(|bits| {
        let v = BTreeMap::from([("p", bits & 1 != 0), ("q", bits & 2 != 0), ("r", bits & 4 != 0)]);
        truth(f, &v)
    })
}

fn prop_engine() -> Engine {
    Engine::new(std::sync::Arc::new(sig()), Default::default())
}

fn leaf_count(f: &Formula) -> usize {
    match f {
        Formula::Falsum | Formula::Atom(..) => 1,
        Formula::Implies(a, b) => leaf_count(a) + leaf_count(b),
        Formula::Forall(_, b) | Formula::Guard(_, _, b) => leaf_count(b),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn alpha_equal_is_an_equivalence(f in formula(), g in formula()) {
        let mut avoid = f.var_names();
        let f1 = f.rename_bound_apart(&mut avoid);
        let f2 = f1.rename_bound_apart(&mut avoid);
        prop_assert!(alpha_equal(&f, &f));
        prop_assert!(alpha_equal(&f, &f1) && alpha_equal(&f1, &f));
        prop_assert!(alpha_equal(&f1, &f2) && alpha_equal(&f, &f2));
        prop_assert_eq!(alpha_equal(&f, &g), alpha_equal(&g, &f));
        prop_assert_eq!(alpha_equal(&f, &g), f.canonical() == g.canonical());
    }

    #[test]
    fn substitution_laws(f in formula(), a in prop::sample::select(vec!["a", "b"]), k in 0u64..5) {
        prop_assert!(alpha_equal(&substitute(&f, &BTreeMap::new()).unwrap(), &f));
        let binding: BTreeMap<String, Term> = free_vars(&f)
            .into_iter()
            .map(|(n, s)| (n, if s == Sort::Ack { Term::constant(a) } else { Term::Nat(k) }))
            .collect();
        let mut avoid: BTreeSet<String> = f.var_names();
        let renamed = f.rename_bound_apart(&mut avoid);
        let direct = substitute(&f, &binding).unwrap();
        prop_assert!(direct.is_closed());
        prop_assert!(alpha_equal(&substitute(&renamed, &binding).unwrap(), &direct));
    }

    #[test]
    fn occurrences_count_leaves_and_flip_on_the_left(f in formula()) {
        let n = normalize(&f).to_formula();
        let occ = occurrences(&n).unwrap();
        prop_assert_eq!(occ.len(), leaf_count(&n));
        let neg = Formula::not(n.clone());
        let flipped = occurrences(&neg).unwrap();
        prop_assert_eq!(flipped.len(), occ.len() + 1);
        for (o, fo) in occ.iter().zip(&flipped) {
            prop_assert_eq!(&o.atom, &fo.atom);
            prop_assert_eq!(o.sign.flip(), fo.sign);
            prop_assert_eq!(o.hypothesis_count, fo.hypothesis_count);
        }
        prop_assert_eq!(flipped.last().unwrap().sign, Sign::Positive);
    }

    #[test]
    fn sugar_expansion_is_idempotent_on_core(f in formula()) {
        let s = sig();
        let surface = SurfaceFormula::from(&f);
        prop_assert_eq!(expand_sugar(&surface, &s).unwrap(), f.clone());
        let sugared = SurfaceFormula::Exists(Binder::new("x", Sort::Ack), Box::new(SurfaceFormula::And(Box::new(surface.clone()), Box::new(SurfaceFormula::Not(Box::new(surface))))));
        let core = expand_sugar(&sugared, &s).unwrap();
        prop_assert_eq!(expand_sugar(&SurfaceFormula::from(&core), &s).unwrap(), core);
    }

    #[test]
    fn successor_chains_evaluate_to_their_length(k in 0u64..64) {
        let t = (0..k).fold(Term::app("0", vec![]), |acc, _| Term::succ(acc));
        prop_assert_eq!(evaluate_term(&t, &sig()), Ok(k));
    }

    #[test]
    fn print_then_parse_is_identity(f in formula()) {
        let s = sig();
        let text = print_formula(&f);
        let parsed = parse_formula(&SourceText::inline(text.clone()), &s).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        let back = expand_sugar(&parsed, &s).unwrap();
        prop_assert!(alpha_equal(&back, &f), "{} reparsed as {}", text, print_formula(&back));
    }

    #[test]
    fn normalize_is_idempotent_and_keeps_free_variables(f in formula()) {
        let n = normalize(&f).to_formula();
        prop_assert!(is_normal(&n));
        prop_assert!(alpha_equal(&normalize(&n).to_formula(), &n));
        prop_assert_eq!(free_vars(&n), free_vars(&f));
        let c = close(f);
        prop_assert!(normalize(&c).to_formula().is_closed());
        prop_assert!(NormalFormula::from_formula(&n).is_some());
    }
}

fn random_play(e: &Engine, f: &Formula, picks: &[usize]) -> (Vec<GameState>, Transcript) {
    let mut s = e.init(f).unwrap();
    let mut states = vec![s.clone()];
    let mut rows: Vec<TranscriptRow> = Vec::new();
    for &k in picks {
        if s.outcome.is_over() {
            break;
        }
        let moves: Vec<_> = match s.turn {
            Mover::Player => e.legal_moves_player(&s).unwrap(),
            Mover::Opponent => e.opponent_moves(&s, AckChoice::Pool).unwrap().into_iter().map(|m| m.mv).collect(),
        };
        assert!(!moves.is_empty(), "no legal move");
        let (next, row) = e.apply_move(&s, &moves[k % moves.len()]).unwrap();
        rows.push(row);
        states.push(next.clone());
        s = next;
    }
    let outcome = s.outcome.clone();
    (states, Transcript { root: f.clone(), rows, outcome })
}

const PLAYED: &[&str] = &["drinker", "two_packets", "peirce", "p_implies_q", "exists_to_forall", "typed_packets"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn plays_are_monotone_and_replayable(which in 0..PLAYED.len(), picks in prop::collection::vec(0usize..16, 1..30)) {
        let prog = corpus();
        let e = engine(&prog);
        let f = root(&prog, PLAYED[which]);
        let (states, t) = random_play(&e, &f, &picks);
        let neg = states[0].root_negation();
        for (w, row) in states.windows(2).zip(&t.rows) {
            let (before, after) = (&w[0], &w[1]);
            prop_assert!(before.u.iter().all(|x| after.u.contains(x)));
            prop_assert!(before.a.iter().all(|x| after.a.contains(x)));
            prop_assert!(after.a.contains(&Formula::Falsum));
            prop_assert!(after.u.contains(&neg));
            if after.turn == Mover::Player && !after.outcome.is_over() {
                prop_assert!(!e.legal_moves_player(after).unwrap().is_empty());
            }
            if after.outcome == (Outcome::PlayerWins { reason: WinReason::VEmpty }) {
                prop_assert_eq!(row.mover, Mover::Player);
                prop_assert_eq!(NormalFormula::from_formula(&row.mv.formula).unwrap().formula_premise_count(), 0);
            }
        }
        let end = e.replay(&t).unwrap();
        prop_assert_eq!(canonical_state(&end), canonical_state(states.last().unwrap()));
    }

    #[test]
    fn verdicts_match_truth_tables(f in prop_formula()) {
        let e = prop_engine();
        let root = normalize(&f).to_formula();
        let v = solve(&e, &root, &SearchLimits::default()).unwrap();
        prop_assert!(!v.stats().limit_hit);
        prop_assert_eq!(v.is_valid(), tautology(&f), "{}: {}", print_formula(&f), v.label());
        prop_assert!(v.is_valid() || v.is_invalid());
        if let Some(cert) = v.certificate().filter(|_| v.is_valid()) {
            prop_assert!(verify_player_certificate(&e, &root, cert, 64).unwrap());
        }
    }

    #[test]
    fn larger_limits_never_flip_a_verdict(f in prop_formula(), small in 1usize..40) {
        let e = prop_engine();
        let root = normalize(&f).to_formula();
        let tight = SearchLimits { max_states: small, max_depth: 8, ..SearchLimits::default() };
        let a = solve(&e, &root, &tight).unwrap();
        let b = solve(&e, &root, &SearchLimits::default()).unwrap();
        if a.is_valid() || a.is_invalid() {
            prop_assert_eq!(a.label(), b.label());
        } else {
            prop_assert!(a.stats().limit_hit);
        }
    }

    #[test]
    fn composing_with_a_valid_protocol_keeps_the_verdict(f in prop_formula(), g in prop::sample::select(vec!["p_implies_p", "qq_p_p", "peirce"])) {
        let prog = corpus();
        let e = prop_engine();
        let root = normalize(&f).to_formula();
        let h = compose(&root, &common::root(&prog, g)).unwrap().to_formula();
        let v = solve(&e, &h, &SearchLimits::default()).unwrap();
        prop_assert_eq!(v.is_valid(), tautology(&f), "{}", print_formula(&h));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simulation_is_seed_deterministic(
        seed in any::<u64>(),
        ack in 0.0f64..1.0,
        close in 0.0f64..0.5,
        reinit in 0.0f64..0.5,
        two in any::<bool>(),
    ) {
        let prog = corpus();
        let e = engine(&prog);
        let f = root(&prog, if two { "two_packets" } else { "drinker" });
        let model = LossModel { ack_loss_probability: ack, close_request_probability: close, reinit_probability: reinit, seed, max_reinits: Some(2), max_ack_losses: Some(4), ..LossModel::default() };
        let t = simulate(&e, &f, &model, 80).unwrap();
        prop_assert_eq!(&t, &simulate(&e, &f, &model, 80).unwrap());
        prop_assert!(t.outcome().player_won(), "{}", t.timeline());
        for ev in &t.events {
            match ev.kind {
                EventKind::Send | EventKind::CloseRequest | EventKind::OpponentForfeit => prop_assert_eq!(ev.mover, Mover::Opponent),
                EventKind::Ack | EventKind::AckLoss | EventKind::Reinit | EventKind::Close | EventKind::HeaderOffer => prop_assert_eq!(ev.mover, Mover::Player),
                _ => {}
            }
        }
    }
}
