use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use protogame::game::{Move, Mover};
use protogame_service::api::{router, AppState};
use protogame_service::catalog::Catalog;
use protogame_service::store::Store;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(Arc::new(AppState::new(Catalog::bundled(), None).unwrap()))
}

fn app_with_store(dir: &std::path::Path) -> Router {
    let store = Store::open(dir).unwrap();
    router(Arc::new(AppState::new(Catalog::bundled(), Some(store)).unwrap()))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

async fn create(app: &Router, body: Value) -> String {
    let (st, v) = post(app, "/sessions", body).await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

async fn explicit(app: &Router, id: &str, formula: &str, values: Value) -> (StatusCode, Value) {
    post(app, &format!("/sessions/{id}/moves"), json!({ "formula": formula, "values": values })).await
}

const DRINKER_ROOT: &str = "(forall x. ((forall y. (P(x) -> P(y))) -> false)) -> false";
const DRINKER_OFFER: &str = "forall x. ((forall y. (P(x) -> P(y))) -> false)";

/// Plays the first four moves of the best-case drinker session with named constants;
/// the sender must then answer the offer of b.
async fn drinker_to_line_five(app: &Router, id: &str) {
    for (f, vals) in [
        (DRINKER_ROOT, json!([])),
        (DRINKER_OFFER, json!(["a"])),
        ("forall y. (P(a) -> P(y))", json!(["b"])),
        (DRINKER_OFFER, json!(["b"])),
    ] {
        let (st, v) = explicit(app, id, f, vals).await;
        assert_eq!(st, StatusCode::OK, "{f}: {v}");
    }
}

#[tokio::test]
async fn formula_catalog_lists_the_corpus() {
    let app = app();
    let (st, v) = get(&app, "/formulas").await;
    assert_eq!(st, StatusCode::OK);
    let entries = v.as_array().unwrap();
    assert_eq!(entries.len(), 14);
    let drinker = entries.iter().find(|e| e["name"] == "drinker").unwrap();
    assert_eq!(drinker["normal_form"], DRINKER_ROOT);
    assert!(entries.iter().all(|e| !e["description"].as_str().unwrap().is_empty()));
}

#[tokio::test]
async fn line_three_offers_close_request_and_fresh_packet() {
    let app = app();
    let id = create(&app, json!({ "formula": "drinker", "human": "opponent" })).await;
    let (_, m) = get(&app, &format!("/sessions/{id}/moves")).await;
    assert_eq!(m["turn"], "opponent");
    let moves = m["moves"].as_array().unwrap();
    assert_eq!(moves.len(), 1);
    assert_eq!(moves[0]["annotation"], "open the session");
    let (st, _) = post(&app, &format!("/sessions/{id}/moves"), json!({ "token": moves[0]["token"] })).await;
    assert_eq!(st, StatusCode::OK);
    let (st, step) = post(&app, &format!("/sessions/{id}/auto"), json!({})).await;
    assert_eq!(st, StatusCode::OK, "{step}");
    assert_eq!(step["event"]["kind"], "HeaderOffer");
    let header = step["event"]["header"].as_str().unwrap().to_string();
    let (_, m) = get(&app, &format!("/sessions/{id}/moves")).await;
    let moves = m["moves"].as_array().unwrap();
    assert_eq!(moves.len(), 2, "{m}");
    let reuse = moves.iter().find(|o| o["values"][0]["value"] == header.as_str()).unwrap();
    assert_eq!(reuse["values"][0]["fresh"], false);
    assert_eq!(reuse["annotation"], format!("resend header {header} (request close)"));
    let fresh = moves.iter().find(|o| o["values"][0]["fresh"] == true).unwrap();
    let b = fresh["values"][0]["value"].as_str().unwrap();
    assert_ne!(b, header);
    assert_eq!(fresh["annotation"], format!("send packet P({b})"));
}

#[tokio::test]
async fn illegal_conclusion_is_rejected_with_the_engine_reason() {
    let app = app();
    let id = create(&app, json!({ "formula": "drinker", "human": "opponent" })).await;
    for (f, vals) in [(DRINKER_ROOT, json!([])), (DRINKER_OFFER, json!(["a"])), ("forall y. (P(a) -> P(y))", json!(["b"]))]
    {
        assert_eq!(explicit(&app, &id, f, vals).await.0, StatusCode::OK);
    }
    // P(a) is in U but not in A
    let (st, v) = explicit(&app, &id, "P(a)", json!([])).await;
    assert_eq!(st, StatusCode::CONFLICT);
    let reason = v["error"].as_str().unwrap();
    assert!(reason.contains("B[b] ∈ A") && reason.contains("P(a)"), "{reason}");
    let (st, v) = explicit(&app, &id, "P(c)", json!([])).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert!(v["error"].as_str().unwrap().contains("is not in U"));
    let (_, s) = get(&app, &format!("/sessions/{id}")).await;
    assert_eq!(s["version"], 3);
}

#[tokio::test]
async fn auto_step_at_line_six_closes_with_pb() {
    let app = app();
    let id = create(&app, json!({ "formula": "drinker", "human": "opponent" })).await;
    drinker_to_line_five(&app, &id).await;
    let (st, _) = explicit(&app, &id, "forall y. (P(b) -> P(y))", json!(["c"])).await;
    assert_eq!(st, StatusCode::OK);
    let (_, s) = get(&app, &format!("/sessions/{id}")).await;
    assert_eq!(s["u"].as_array().unwrap().len(), 4);
    let (st, v) = post(&app, &format!("/sessions/{id}/auto"), json!({})).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["event"]["kind"], "Close");
    assert_eq!(v["annotation"], "close with packet P(b)");
    assert_eq!(v["session"]["outcome"], json!({ "kind": "player_wins", "reason": "VEmpty" }));
    assert_eq!(v["session"]["closed"], true);
    let (_, t) = get(&app, &format!("/sessions/{id}/transcript")).await;
    let kinds: Vec<&str> = t["trace"]["events"].as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["Open", "HeaderOffer", "Send", "Ack", "Send", "Close"]);
    assert!(t["table"].as_str().unwrap().contains("outcome: player wins (V empty)"));
    assert!(t["timeline"].as_str().unwrap().contains("Ack P(b)"));
}

#[tokio::test]
async fn error_classes() {
    let app = app();
    assert_eq!(get(&app, "/sessions/nope").await.0, StatusCode::NOT_FOUND);
    assert_eq!(post(&app, "/sessions/nope/auto", json!({})).await.0, StatusCode::NOT_FOUND);
    assert_eq!(post(&app, "/sessions", json!({ "formula": "nope" })).await.0, StatusCode::NOT_FOUND);
    let (st, _) = post(&app, "/sessions", json!({ "formula": "f", "program": "pred P : ack\nformula f := P(" })).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let id = create(&app, json!({ "formula": "p_implies_p", "human": "player" })).await;
    // the opponent is the engine, the player is human
    let (st, v) = post(&app, &format!("/sessions/{id}/moves"), json!({ "token": "0123" })).await;
    assert_eq!(st, StatusCode::CONFLICT, "{v}");
    let (_, m) = get(&app, &format!("/sessions/{id}/moves")).await;
    let old = m["moves"][0]["token"].clone();
    assert_eq!(post(&app, &format!("/sessions/{id}/auto"), json!({})).await.0, StatusCode::OK);
    let (st, v) = post(&app, &format!("/sessions/{id}/moves"), json!({ "token": old })).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert!(v["error"].as_str().unwrap().contains("stale"));
    let (st, v) = post(&app, &format!("/sessions/{id}/auto"), json!({})).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert!(v["error"].as_str().unwrap().contains("player is played by a human"));
    let (st, _) = explicit(&app, &id, "p -> (", json!([])).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = explicit(&app, &id, "p", json!([])).await;
    assert_eq!(st, StatusCode::OK);
    let (st, v) = explicit(&app, &id, "p", json!([])).await;
    assert_eq!(st, StatusCode::GONE, "{v}");
    assert_eq!(post(&app, &format!("/sessions/{id}/auto"), json!({})).await.0, StatusCode::GONE);
    let (_, m) = get(&app, &format!("/sessions/{id}/moves")).await;
    assert!(m["moves"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn budget_closes_the_session() {
    let app = app();
    let limits = json!({ "budget": 3 });
    let id = create(&app, json!({ "formula": "p_implies_q", "roles": { "player": "engine", "opponent": "engine" }, "limits": limits })).await;
    for _ in 0..3 {
        assert_eq!(post(&app, &format!("/sessions/{id}/auto"), json!({})).await.0, StatusCode::OK);
    }
    let (_, s) = get(&app, &format!("/sessions/{id}")).await;
    assert_eq!(s["outcome"], json!({ "kind": "opponent_wins_at_cap", "steps": 3 }));
    assert_eq!(post(&app, &format!("/sessions/{id}/auto"), json!({})).await.0, StatusCode::GONE);
}

#[tokio::test]
async fn hint_follows_the_certificate() {
    let app = app();
    let id = create(&app, json!({ "formula": "drinker", "human": "player" })).await;
    let (_, h) = get(&app, &format!("/sessions/{id}/hint")).await;
    assert_eq!(h["verdict"], "Valid");
    assert!(h["move"].is_null(), "the opponent has no winning move");
    assert_eq!(post(&app, &format!("/sessions/{id}/auto"), json!({})).await.0, StatusCode::OK);
    let (_, h) = get(&app, &format!("/sessions/{id}/hint")).await;
    assert_eq!(h["verdict"], "Valid");
    let token = h["move"]["token"].clone();
    let (st, v) = post(&app, &format!("/sessions/{id}/moves"), json!({ "token": token })).await;
    assert_eq!(st, StatusCode::OK, "{v}");

    let id = create(&app, json!({ "formula": "exists_to_forall", "human": "opponent" })).await;
    let (_, h) = get(&app, &format!("/sessions/{id}/hint")).await;
    assert_eq!(h["verdict"], "Invalid");
    assert_eq!(h["move"]["mover"], "opponent");
}

#[tokio::test]
async fn api_moves_equal_engine_moves_along_plays() {
    let app = app();
    let catalog = Catalog::bundled();
    for (name, seed) in [("drinker", 1usize), ("two_packets", 2), ("peirce", 3), ("typed_simple", 4), ("exists_to_forall", 5)]
    {
        let id = create(&app, json!({ "formula": name, "roles": { "player": "human", "opponent": "human" } })).await;
        let engine = catalog.engine(Default::default());
        let mut s = engine.init(&catalog.root(name).unwrap()).unwrap();
        for k in 0..14 {
            let (_, m) = get(&app, &format!("/sessions/{id}/moves")).await;
            let api: Vec<Move> =
                m["moves"].as_array().unwrap().iter().map(|o| serde_json::from_value(o["move"].clone()).unwrap()).collect();
            if s.outcome.is_over() {
                assert!(api.is_empty());
                break;
            }
            let direct: Vec<Move> = match s.turn {
                Mover::Player => engine.legal_moves_player(&s).unwrap(),
                Mover::Opponent => engine.legal_moves_opponent(&s).unwrap().into_iter().map(|l| l.mv).collect(),
            };
            assert_eq!(api, direct, "{name} step {k}");
            let pick = (seed * 7 + k * 3) % api.len();
            let token = m["moves"][pick]["token"].clone();
            let (st, v) = post(&app, &format!("/sessions/{id}/moves"), json!({ "token": token })).await;
            assert_eq!(st, StatusCode::OK, "{v}");
            s = engine.apply_move(&s, &api[pick]).unwrap().0;
            let (_, view) = get(&app, &format!("/sessions/{id}")).await;
            assert_eq!(view["version"], k + 1);
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_submissions_do_not_interleave() {
    let app = app();
    let id = create(&app, json!({ "formula": "drinker", "human": "opponent" })).await;
    let (_, m) = get(&app, &format!("/sessions/{id}/moves")).await;
    let token = m["moves"][0]["token"].clone();
    let mut tasks = Vec::new();
    for _ in 0..8 {
        let (app, id, token) = (app.clone(), id.clone(), token.clone());
        tasks.push(tokio::spawn(async move { post(&app, &format!("/sessions/{id}/moves"), json!({ "token": token })).await.0 }));
    }
    let mut codes = Vec::new();
    for t in tasks {
        codes.push(t.await.unwrap());
    }
    assert_eq!(codes.iter().filter(|c| **c == StatusCode::OK).count(), 1, "{codes:?}");
    assert!(codes.iter().all(|c| *c == StatusCode::OK || *c == StatusCode::CONFLICT));
    let (_, s) = get(&app, &format!("/sessions/{id}")).await;
    assert_eq!(s["version"], 1);
}

#[tokio::test]
async fn sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (id, before, id2) = {
        let app = app_with_store(dir.path());
        let id = create(&app, json!({ "formula": "drinker", "human": "opponent" })).await;
        drinker_to_line_five(&app, &id).await;
        let id2 = create(&app, json!({ "formula": "p_implies_p", "human": "player" })).await;
        assert_eq!(post(&app, &format!("/sessions/{id2}/auto"), json!({})).await.0, StatusCode::OK);
        (id.clone(), get(&app, &format!("/sessions/{id}")).await.1, id2)
    };
    let log = |id: &str| std::fs::read_to_string(dir.path().join("sessions").join(id).join("log.jsonl")).unwrap();
    assert_eq!(log(&id).lines().count(), 4);
    assert_eq!(log(&id2).lines().count(), 1);
    // a crash during an append leaves a torn line
    let mut torn = log(&id);
    torn.push_str("{\"version\": 4, \"mo");
    std::fs::write(dir.path().join("sessions").join(&id).join("log.jsonl"), torn).unwrap();

    let app = app_with_store(dir.path());
    let (st, after) = get(&app, &format!("/sessions/{id}")).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(after, before);
    let (_, list) = get(&app, "/sessions").await;
    assert_eq!(list.as_array().unwrap().len(), 2);
    let (st, _) = explicit(&app, &id, "forall y. (P(b) -> P(y))", json!(["c"])).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(post(&app, &format!("/sessions/{id}/auto"), json!({})).await.0, StatusCode::OK);
    let (_, done) = get(&app, &format!("/sessions/{id}")).await;
    assert_eq!(done["closed"], true);
    drop(app);
    let app = app_with_store(dir.path());
    assert_eq!(get(&app, &format!("/sessions/{id}")).await.1, done);
    assert_eq!(log(&id).lines().count(), 6);
}

#[tokio::test]
async fn check_results_are_cached() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with_store(dir.path());
    let (st, first) = post(&app, "/check", json!({ "formula": "two_packets" })).await;
    assert_eq!(st, StatusCode::OK, "{first}");
    assert_eq!(first["cached"], false);
    assert_eq!(first["verdict"], "Valid");
    let (_, second) = post(&app, "/check", json!({ "formula": "two_packets" })).await;
    assert_eq!(second["cached"], true);
    assert_eq!(first["certificate"], second["certificate"]);
    let (_, other) = post(&app, "/check", json!({ "formula": "p_implies_q" })).await;
    assert_eq!(other["verdict"], "Invalid");
}
