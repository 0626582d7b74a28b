mod common;

use common::{corpus, engine, root, text};
use protogame::formula::Sign;
use protogame::validity::{solve, SearchLimits};
use protogame::{alpha_equal, compose, final_occurrences, make_ack_chain, normalize, occurrences, Formula, Signature, Sort};

const VALID: &[&str] = &["p_implies_p", "qq_p_p", "peirce", "ex4", "drinker", "one_packet", "two_packets"];

fn chain_sig(n: usize) -> (Signature, Vec<String>) {
    let mut sig = Signature::new();
    let names: Vec<String> = (1..=n).map(|k| format!("P{k}")).collect();
    for p in &names {
        sig.declare_predicate(p, vec![Sort::Ack]).unwrap();
    }
    (sig, names)
}

fn chain(sig: &Signature, names: &[String]) -> Formula {
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    normalize(&make_ack_chain(sig, &refs).unwrap()).to_formula()
}

#[test]
fn packet_then_packet_is_the_two_packet_protocol() {
    let prog = corpus();
    let one = root(&prog, "one_packet");
    let q_packet = Formula::exists(
        "x",
        Sort::Ack,
        Formula::forall(
            "y",
            Sort::Ack,
            Formula::implies(
                Formula::atom("Q", vec![protogame::Term::ack_var("x")]),
                Formula::atom("Q", vec![protogame::Term::ack_var("y")]),
            ),
        ),
    );
    let h = compose(&one, &normalize(&q_packet).to_formula()).unwrap().to_formula();
    assert!(alpha_equal(&h, &root(&prog, "two_packets")), "{}", text(&h));
}

#[test]
fn composition_unfolds_the_ack_chain() {
    let (sig, names) = chain_sig(4);
    for n in 2..=4 {
        let inner = chain(&sig, &names[..n - 1]);
        let outer = chain(&sig, &names[n - 1..n]);
        let h = compose(&outer, &inner).unwrap().to_formula();
        assert!(alpha_equal(&h, &chain(&sig, &names[..n])), "n={n}: {}", text(&h));
    }
}

#[test]
fn composed_drinkers_are_valid() {
    let prog = corpus();
    let d = root(&prog, "drinker");
    let h = compose(&d, &d).unwrap().to_formula();
    let v = solve(&engine(&prog), &h, &SearchLimits::default()).unwrap();
    assert!(v.is_valid(), "{}", v.label());
}

#[test]
fn composition_preserves_validity_on_the_corpus() {
    let prog = corpus();
    let e = engine(&prog);
    let lim = SearchLimits::default();
    for f in VALID {
        for g in VALID {
            let h = compose(&root(&prog, f), &root(&prog, g)).unwrap().to_formula();
            let v = solve(&e, &h, &lim).unwrap();
            assert!(v.is_valid(), "{f} then {g}: {}", v.label());
        }
    }
}

#[test]
fn finals_gain_a_hypothesis_and_signs_are_kept() {
    let prog = corpus();
    for f in VALID {
        for g in ["p_implies_p", "drinker"] {
            let (f, g) = (root(&prog, f), root(&prog, g));
            let h = compose(&f, &g).unwrap().to_formula();
            let n_finals = final_occurrences(&f).unwrap().len();
            let count = |x: &Formula, s: Sign| occurrences(x).unwrap().iter().filter(|o| o.sign == s).count();
            let g_count = occurrences(&g).unwrap().len();
            assert_eq!(occurrences(&h).unwrap().len(), occurrences(&f).unwrap().len() + n_finals * g_count);
            for s in [Sign::Positive, Sign::Negative] {
                assert_eq!(count(&h, s), count(&f, s) + n_finals * count(&g, s));
            }
            assert_eq!(final_occurrences(&h).unwrap().len(), n_finals * final_occurrences(&g).unwrap().len());
        }
    }
}

#[test]
fn composition_is_associative_on_the_corpus() {
    let prog = corpus();
    let names = ["p_implies_p", "peirce", "drinker", "one_packet"];
    for f in names {
        for g in names {
            for k in names {
                let (f, g, k) = (root(&prog, f), root(&prog, g), root(&prog, k));
                let left = compose(&compose(&f, &g).unwrap().to_formula(), &k).unwrap().to_formula();
                let right = compose(&f, &compose(&g, &k).unwrap().to_formula()).unwrap().to_formula();
                assert!(alpha_equal(&left, &right));
            }
        }
    }
}
