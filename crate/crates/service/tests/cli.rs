mod common;

use common::{golden, protogame, protogame_in};

#[test]
fn check_drinker_matches_golden() {
    let r = protogame(&["check", "examples.lp:drinker"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout, golden("check_drinker.txt"));
}

#[test]
fn check_p_implies_q_matches_golden() {
    let r = protogame(&["check", "examples.lp:p_implies_q"]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert_eq!(r.stdout, golden("check_p_implies_q.txt"));
}

#[test]
fn normalize_ex4_matches_golden() {
    let r = protogame(&["normalize", "examples.lp:ex4"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout, golden("normalize_ex4.txt"));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["bogus"][..],
        &["check"],
        &["check", "examples.lp:no_such_formula"],
        &["check", "missing.lp:drinker"],
        &["play", "examples.lp:drinker", "--player", "psychic"],
        &["simulate", "--formula", "p_implies_q"],
        &["simulate", "--formula", "drinker", "--ack-loss", "1.5"],
    ] {
        let r = protogame(args);
        assert_eq!(r.code, 2, "{args:?}: {}", r.stderr);
        assert!(!r.stderr.is_empty(), "{args:?}");
        assert!(r.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn syntax_errors_name_the_position() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.lp"), "pred P : ack\nformula f := P(x) ->\n").unwrap();
    let r = protogame_in(dir.path(), &["parse", "bad.lp"], None);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("bad.lp:"), "{}", r.stderr);
}

#[test]
fn unknown_verdict_has_its_own_exit_code() {
    let r = protogame(&["check", "examples.lp:two_packets", "--max-states", "2"]);
    assert_eq!(r.code, 4, "{}", r.stderr);
    assert!(r.stdout.starts_with("Unknown\n"));
}

#[test]
fn parse_lists_declarations_and_formulas() {
    let r = protogame(&["parse", "examples.lp"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("pred Pk : int * ack\n"), "{}", r.stdout);
    assert!(r.stdout.contains("formula p_implies_q := p -> q\n"));
    assert_eq!(r.stdout.lines().filter(|l| l.starts_with("formula ")).count(), 14);
}

#[test]
fn normalize_whole_file() {
    let r = protogame(&["normalize", "examples.lp"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("ex4: forall y. ((forall x. P(x)) -> P(y))\n"));
    assert!(r.stdout.contains("p_alone: p\n"));
}

#[test]
fn bare_names_use_the_bundled_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let r = protogame_in(dir.path(), &["check", "peirce"], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with("Valid\n"));
}

#[test]
fn typed_instances() {
    let r = protogame(&["check", "examples.lp:typed_packets", "--n0", "0,1,2,3,4,5"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout.lines().count(), 6);
    assert!(r.stdout.lines().all(|l| l.contains(": Valid")), "{}", r.stdout);
}

#[test]
fn check_json_carries_certificate() {
    let r = protogame(&["check", "examples.lp:drinker", "--json"]);
    assert_eq!(r.code, 0);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["verdict"], "Valid");
    assert_eq!(v["certificate"]["mover"], "player");
    assert!(!v["certificate"]["moves"].as_array().unwrap().is_empty());
}

#[test]
fn verdict_cache_gives_same_output() {
    let store = tempfile::tempdir().unwrap();
    let dir = common::corpus_dir();
    let first = protogame_in(&dir, &["check", "examples.lp:two_packets"], Some(store.path()));
    let cached: Vec<_> = std::fs::read_dir(store.path().join("verdicts")).unwrap().collect();
    assert_eq!(cached.len(), 1);
    let second = protogame_in(&dir, &["check", "examples.lp:two_packets"], Some(store.path()));
    assert_eq!((first.code, &first.stdout), (second.code, &second.stdout));
    let uncached = protogame_in(&dir, &["check", "examples.lp:two_packets", "--no-cache"], Some(store.path()));
    assert_eq!(uncached.stdout, first.stdout);
}

#[test]
fn compose_prints_a_normal_formula() {
    let r = protogame(&["compose", "examples.lp:one_packet", "examples.lp:drinker"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let line = r.stdout.trim_end();
    assert!(line.contains("P(x)") && line.matches("forall").count() >= 4, "{line}");
    let r = protogame(&["compose", "examples.lp:one_packet", "examples.lp:p_alone"]);
    assert_eq!(r.code, 0);
}

#[test]
fn play_greedy_against_first_legal() {
    let r = protogame(&["play", "examples.lp:drinker", "--trace"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("outcome: player wins (V empty)"));
    assert!(r.stdout.contains("CloseRequest"), "{}", r.stdout);
}

#[test]
fn play_invalid_formula_ends_at_the_cap() {
    let r = protogame(&["play", "examples.lp:p_implies_q", "--budget", "9"]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert!(r.stdout.contains("opponent wins at cap (9 steps)"), "{}", r.stdout);
}

#[test]
fn play_scripted_opponent() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("sender.json");
    std::fs::write(&script, r##"[{"pick": 0}, {"pick": 0, "values": ["#1"]}, {"pick": 0, "values": ["#2"]}]"##)
        .unwrap();
    let spec = format!("scripted:{}", script.display());
    let r = protogame(&["play", "examples.lp:drinker", "--opponent", &spec, "--json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let trace: protogame::SessionTrace = serde_json::from_str(&r.stdout).unwrap();
    use protogame::EventKind::*;
    assert_eq!(trace.kinds(), [Open, HeaderOffer, Send, Ack, Send, Close]);
}

#[test]
fn play_exhausted_script_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("short.json");
    std::fs::write(&script, r#"[{"pick": 0}]"#).unwrap();
    let spec = format!("scripted:{}", script.display());
    let r = protogame(&["play", "examples.lp:drinker", "--opponent", &spec]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("script exhausted"), "{}", r.stderr);
    assert!(r.stdout.contains("outcome: ongoing"));
}

#[test]
fn play_certificate_opponent_refutes() {
    let r = protogame(&["play", "examples.lp:exists_to_forall", "--opponent", "certificate", "--budget", "20"]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    let r = protogame(&["play", "examples.lp:drinker", "--opponent", "certificate"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("no winning strategy"));
}

#[test]
fn play_interactive_reads_choices() {
    use std::io::Write;
    use std::process::{Command, Stdio};
    let mut child = Command::new(env!("CARGO_BIN_EXE_protogame"))
        .args(["play", "examples.lp:p_implies_p", "--player", "interactive"])
        .current_dir(common::corpus_dir())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    // the player's options after the sender's move: the root negation, then p
    child.stdin.as_mut().unwrap().write_all(b"1\n").unwrap();
    let out = child.wait_with_output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("[1] p"), "{text}");
    assert!(text.contains("outcome: player wins"));
}

#[test]
fn simulate_with_ack_loss() {
    let r = protogame(&[
        "simulate", "--formula", "drinker", "--seed", "7", "--ack-loss", "1", "--max-ack-losses", "1", "--steps", "40",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("AckLoss"), "{}", r.stdout);
    assert!(r.stdout.trim_end().ends_with("player wins (V empty)"));
    let again = protogame(&[
        "simulate", "--formula", "drinker", "--seed", "7", "--ack-loss", "1", "--max-ack-losses", "1", "--steps", "40",
    ]);
    assert_eq!(again.stdout, r.stdout);
}

#[test]
fn simulate_from_file_with_json() {
    let r = protogame(&["simulate", "--file", "examples.lp", "--formula", "two_packets", "--json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let trace: protogame::SessionTrace = serde_json::from_str(&r.stdout).unwrap();
    assert!(trace.outcome().player_won());
}

#[test]
fn help_exits_zero() {
    let r = protogame(&["--help"]);
    assert_eq!(r.code, 0);
    for cmd in ["parse", "normalize", "check", "compose", "play", "simulate", "serve"] {
        assert!(r.stdout.contains(cmd), "{cmd}");
    }
}
