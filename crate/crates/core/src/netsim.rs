//! Plays read as network sessions.
//!
//! The opponent is the sender and the player the receiver. Each transcript
//! row becomes one event: headers offered by the receiver, packets sent,
//! acknowledgements, losses, reinitialisations and closes.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Formula, Sort};
use crate::game::{fresh_constant, AckChoice, Engine, GameError, GameState, Move, Mover, Outcome, Transcript, TranscriptRow, Value, WinReason};
use crate::normal::{NormalFormula, Premise};
use crate::validity::{greedy_player, solve, SearchLimits};

/// A closed atomic formula seen as a packet: its predicate is the data, its
/// arguments the headers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Packet {
    pub data: String,
    pub headers: Vec<Value>,
}

impl Packet {
    pub fn from_atom(f: &Formula) -> Option<Packet> {
        match f {
            Formula::Atom(p, args) => Some(Packet {
                data: p.clone(),
                headers: args.iter().map(Value::from_ground).collect::<Option<_>>()?,
            }),
            _ => None,
        }
    }

    fn carries(&self, header: &str) -> bool {
        self.headers.iter().any(|h| matches!(h, Value::Const(c) if c == header))
    }
}

impl fmt::Display for Packet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.headers.is_empty() {
            return f.write_str(&self.data);
        }
        let hs: Vec<String> = self.headers.iter().map(ToString::to_string).collect();
        write!(f, "{}({})", self.data, hs.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    /// The sender opens a session or a sub-session.
    Open,
    /// The receiver proposes a header.
    HeaderOffer,
    Send,
    Ack,
    /// The receiver answers with a header that acknowledges nothing.
    AckLoss,
    /// The receiver restarts from the root negation.
    Reinit,
    /// The sender reuses a header offered by the receiver.
    CloseRequest,
    Close,
    /// The sender could only pick a value failing a guard.
    OpponentForfeit,
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventTag {
    /// The reused header was offered before the last reinitialisation.
    StaleHeader,
    /// The receiver asks again for a packet it already acknowledged.
    ReRequest,
    /// Opens or closes a nested session rather than the whole one.
    SubSession,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetEvent {
    pub kind: EventKind,
    /// Index of the transcript row.
    pub step: usize,
    pub mover: Mover,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packet: Option<Packet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<EventTag>,
}

impl NetEvent {
    fn new(kind: EventKind, row: &TranscriptRow) -> NetEvent {
        NetEvent { kind, step: row.step, mover: row.mover, packet: None, header: None, tags: Vec::new() }
    }

    fn with_packet(mut self, p: Packet) -> NetEvent {
        self.packet = Some(p);
        self
    }

    fn with_header(mut self, h: &str) -> NetEvent {
        self.header = Some(Value::constant(h));
        self
    }

    fn tagged(mut self, t: EventTag) -> NetEvent {
        self.tags.push(t);
        self
    }

    pub fn has_tag(&self, t: EventTag) -> bool {
        self.tags.contains(&t)
    }
}

impl fmt::Display for NetEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = match self.mover {
            Mover::Opponent => "sender",
            Mover::Player => "receiver",
        };
        write!(f, "{:>3}  {side:<8}  {:?}", self.step, self.kind)?;
        if let Some(p) = &self.packet {
            write!(f, " {p}")?;
        }
        if let Some(h) = &self.header {
            write!(f, " [{h}]")?;
        }
        for t in &self.tags {
            write!(f, " #{t:?}")?;
        }
        Ok(())
    }
}

/// A transcript with one event per row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub transcript: Transcript,
    pub events: Vec<NetEvent>,
}

impl SessionTrace {
    pub fn kinds(&self) -> Vec<EventKind> {
        self.events.iter().map(|e| e.kind).collect()
    }

    pub fn outcome(&self) -> &Outcome {
        &self.transcript.outcome
    }

    /// One line per event.
    pub fn timeline(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out.push_str(&format!("     {}\n", self.transcript.outcome));
        out
    }
}

/// Running interpretation of a session.
#[derive(Debug, Clone, Default)]
struct Annotator {
    epoch: usize,
    /// Headers offered by the receiver, with the epoch of the first offer.
    offered: HashMap<String, usize>,
    sent: Vec<Packet>,
    acked: Vec<Packet>,
    /// Packets of the current sub-session not yet acknowledged.
    outstanding: Vec<Packet>,
}

impl Annotator {
    fn event(&mut self, engine: &Engine, before: &GameState, row: &TranscriptRow) -> NetEvent {
        match row.mover {
            Mover::Opponent => self.sender_event(before, row),
            Mover::Player => self.receiver_event(engine, before, row),
        }
    }

    fn sender_event(&mut self, before: &GameState, row: &TranscriptRow) -> NetEvent {
        if matches!(row.outcome, Outcome::PlayerWins { reason: WinReason::OpponentGuardFailure }) {
            return NetEvent::new(EventKind::OpponentForfeit, row);
        }
        let assertion = row.added_a.first().cloned().or_else(|| {
            // an assertion already in A is not listed as added
            let nf = NormalFormula::from_formula(&row.mv.formula)?;
            let terms: Vec<_> = row.mv.values.iter().map(Value::to_term).collect();
            Some(nf.instantiate(&terms).1)
        });
        let packet = assertion.as_ref().and_then(Packet::from_atom);
        if before.history.is_empty() || (assertion == Some(Formula::Falsum) && row.mv.formula == before.root) {
            self.outstanding.clear();
            let e = NetEvent::new(EventKind::Open, row);
            return match packet {
                Some(p) => {
                    self.sent.push(p.clone());
                    e.with_packet(p)
                }
                None => e,
            };
        }
        if assertion == Some(Formula::Falsum) {
            self.outstanding.clear();
            return NetEvent::new(EventKind::Open, row).tagged(EventTag::SubSession);
        }
        let reused = row.mv.values.iter().find_map(|v| match v {
            Value::Const(c) => self.offered.get(c).map(|&ep| (c.clone(), ep)),
            Value::Nat(_) => None,
        });
        if let Some((h, ep)) = reused {
            let mut e = NetEvent::new(EventKind::CloseRequest, row).with_header(&h);
            if let Some(p) = packet {
                e = e.with_packet(p);
            }
            return if ep < self.epoch { e.tagged(EventTag::StaleHeader) } else { e };
        }
        match packet {
            Some(p) => {
                self.sent.push(p.clone());
                self.outstanding.push(p.clone());
                NetEvent::new(EventKind::Send, row).with_packet(p)
            }
            None => NetEvent::new(EventKind::Unclassified, row),
        }
    }

    fn receiver_event(&mut self, engine: &Engine, before: &GameState, row: &TranscriptRow) -> NetEvent {
        if row.mv.formula == before.root_negation() {
            self.epoch += 1;
            self.outstanding.clear();
            return NetEvent::new(EventKind::Reinit, row);
        }
        let Some(nf) = NormalFormula::from_formula(&row.mv.formula) else {
            return NetEvent::new(EventKind::Unclassified, row);
        };
        let terms: Vec<_> = row.mv.values.iter().map(Value::to_term).collect();
        let concl = nf.instantiate(&terms).1;
        let concl = engine.evaluate(&concl).unwrap_or(concl);
        if let Some(p) = Packet::from_atom(&concl) {
            let premise_free = nf.premises.iter().all(|p| matches!(p, Premise::Equation(..)));
            if premise_free {
                return NetEvent::new(EventKind::Close, row).with_packet(p);
            }
            if self.sent.contains(&p) && !self.acked.contains(&p) {
                self.acked.push(p.clone());
                self.outstanding.retain(|q| *q != p);
                return NetEvent::new(EventKind::Ack, row).with_packet(p);
            }
            return NetEvent::new(EventKind::Close, row).with_packet(p).tagged(EventTag::SubSession);
        }
        let header = nf.prefix.iter().zip(&row.mv.values).find_map(|(b, v)| match (b.sort, v) {
            (Sort::Ack, Value::Const(c)) => Some(c.clone()),
            _ => None,
        });
        let Some(h) = header else {
            return NetEvent::new(EventKind::Unclassified, row);
        };
        self.offered.entry(h.clone()).or_insert(self.epoch);
        if let Some(p) = self.outstanding.iter().find(|p| p.carries(&h)).cloned() {
            self.acked.push(p.clone());
            self.outstanding.clear();
            return NetEvent::new(EventKind::Ack, row).with_packet(p).with_header(&h);
        }
        if let Some(p) = self.acked.iter().find(|p| p.carries(&h)).cloned() {
            return NetEvent::new(EventKind::HeaderOffer, row)
                .with_packet(p)
                .with_header(&h)
                .tagged(EventTag::ReRequest);
        }
        if !self.outstanding.is_empty() {
            return NetEvent::new(EventKind::AckLoss, row).with_header(&h);
        }
        NetEvent::new(EventKind::HeaderOffer, row).with_header(&h)
    }
}

fn replay_annotated(engine: &Engine, t: &Transcript) -> Result<(GameState, Annotator, Vec<NetEvent>), GameError> {
    let mut s = engine.init(&t.root)?;
    let mut ann = Annotator::default();
    let mut events = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        let (next, _) = engine.apply_move(&s, &row.mv)?;
        events.push(ann.event(engine, &s, row));
        s = next;
    }
    Ok((s, ann, events))
}

/// Reads a transcript as a network session.
pub fn annotate(engine: &Engine, t: &Transcript) -> Result<SessionTrace, GameError> {
    let (_, _, events) = replay_annotated(engine, t)?;
    Ok(SessionTrace { transcript: t.clone(), events })
}

/// The events the given moves would produce if played next after `t`.
pub fn preview(engine: &Engine, t: &Transcript, moves: &[Move]) -> Result<Vec<NetEvent>, GameError> {
    let (s, ann, _) = replay_annotated(engine, t)?;
    moves
        .iter()
        .map(|m| {
            let (_, row) = engine.apply_move(&s, m)?;
            Ok(ann.clone().event(engine, &s, &row))
        })
        .collect()
}

/// The move of a lossless sender after `t`: fresh packets, `first_int` for
/// integers on the first move.
pub fn sender_choice(engine: &Engine, t: &Transcript, first_int: u64) -> Result<Move, GameError> {
    let (s, ann, _) = replay_annotated(engine, t)?;
    if s.turn != Mover::Opponent {
        return Err(GameError::OutOfTurn(s.turn));
    }
    sender_move(engine, &ann, &s, first_int, || false)
}

/// Perturbations applied to a simulated session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossModel {
    /// Chance that the receiver drops an acknowledgement it could send.
    pub ack_loss_probability: f64,
    /// Chance that the sender reuses an offered header instead of sending.
    pub close_request_probability: f64,
    /// Chance that the receiver restarts the session on its turn.
    pub reinit_probability: f64,
    pub seed: u64,
    /// Caps on how often each perturbation may fire.
    pub max_ack_losses: Option<usize>,
    pub max_close_requests: Option<usize>,
    pub max_reinits: Option<usize>,
    /// Integer the sender picks for integer coordinates of its first move.
    pub first_int: u64,
}

impl Default for LossModel {
    fn default() -> Self {
        LossModel {
            ack_loss_probability: 0.0,
            close_request_probability: 0.0,
            reinit_probability: 0.0,
            seed: 0,
            max_ack_losses: None,
            max_close_requests: None,
            max_reinits: None,
            first_int: 2,
        }
    }
}

impl LossModel {
    pub fn lossless() -> Self {
        LossModel::default()
    }

    fn validate(&self) -> Result<(), SimError> {
        for (name, p) in [
            ("ack_loss_probability", self.ack_loss_probability),
            ("close_request_probability", self.close_request_probability),
            ("reinit_probability", self.reinit_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::BadModel(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("formula is {0}; only valid protocols can be simulated")]
    NotValid(&'static str),
    #[error("bad loss model: {0}")]
    BadModel(String),
    #[error(transparent)]
    Game(#[from] GameError),
}

struct Budget(Option<usize>);

impl Budget {
    fn fire(&mut self, rng: &mut ChaCha8Rng, p: f64) -> bool {
        if self.0 == Some(0) || !rng.gen_bool(p) {
            return false;
        }
        if let Some(n) = &mut self.0 {
            *n -= 1;
        }
        true
    }
}

/// Runs a session of a valid protocol: a greedy receiver and a sender that
/// sends fresh packets, both perturbed by `model`. Stops after `budget`
/// moves if the session has not ended.
pub fn simulate(engine: &Engine, f: &Formula, model: &LossModel, budget: usize) -> Result<SessionTrace, SimError> {
    model.validate()?;
    let verdict = solve(engine, f, &SearchLimits::default())?;
    if !verdict.is_valid() {
        return Err(SimError::NotValid(verdict.label()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut ack_losses = Budget(model.max_ack_losses);
    let mut close_requests = Budget(model.max_close_requests);
    let mut reinits = Budget(model.max_reinits);
    let mut s = engine.init(f)?;
    let mut ann = Annotator::default();
    let mut rows = Vec::new();
    let mut events = Vec::new();
    while !s.outcome.is_over() && rows.len() < budget {
        let mv = match s.turn {
            Mover::Player => {
                let greedy = greedy_player(engine, &s)?;
                if reinits.fire(&mut rng, model.reinit_probability) {
                    Move::new(Mover::Player, s.root_negation(), vec![])
                } else if peek(engine, &ann, &s, &greedy)? == EventKind::Ack
                    && ack_losses.fire(&mut rng, model.ack_loss_probability)
                {
                    lost_ack(engine, &ann, &s, &greedy)?.unwrap_or(greedy)
                } else {
                    greedy
                }
            }
            Mover::Opponent => sender_move(engine, &ann, &s, model.first_int, || {
                close_requests.fire(&mut rng, model.close_request_probability)
            })?,
        };
        let (next, row) = engine.apply_move(&s, &mv)?;
        events.push(ann.event(engine, &s, &row));
        rows.push(row);
        s = next;
    }
    let transcript = Transcript { root: s.root.clone(), rows, outcome: s.outcome.clone() };
    Ok(SessionTrace { transcript, events })
}

fn peek(engine: &Engine, ann: &Annotator, s: &GameState, mv: &Move) -> Result<EventKind, GameError> {
    let (_, row) = engine.apply_move(s, mv)?;
    Ok(ann.clone().event(engine, s, &row).kind)
}

/// The acknowledging move with its header replaced by one that acknowledges
/// nothing.
fn lost_ack(engine: &Engine, ann: &Annotator, s: &GameState, ack: &Move) -> Result<Option<Move>, GameError> {
    for m in engine.legal_moves_player(s)? {
        if m.formula == ack.formula && m.values != ack.values && peek(engine, ann, s, &m)? == EventKind::AckLoss {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// The sender answers the newest member of `V`. It prefers moves it does
/// not lose, then fresh headers; `close` is asked whether to reuse an
/// offered header instead, when one can be reused.
fn sender_move(
    engine: &Engine,
    ann: &Annotator,
    s: &GameState,
    first_int: u64,
    close: impl FnOnce() -> bool,
) -> Result<Move, GameError> {
    if s.step == 0 {
        let nf = NormalFormula::from_formula(&s.root).expect("normal root");
        let mut taken = Vec::new();
        let values = nf
            .prefix
            .iter()
            .map(|b| match b.sort {
                Sort::Int => Value::Nat(first_int),
                Sort::Ack => {
                    let c = fresh_constant(&s.pool, &taken);
                    taken.push(c.clone());
                    Value::Const(c)
                }
            })
            .collect();
        return Ok(Move::new(Mover::Opponent, s.root.clone(), values));
    }
    let all = engine.opponent_moves(s, AckChoice::Pool)?;
    let newest = s.v.last();
    let alive: Vec<&Move> = all.iter().filter(|l| !l.loses).map(|l| &l.mv).collect();
    let pool: Vec<&Move> = match alive.iter().filter(|m| Some(&m.formula) == newest).copied().collect::<Vec<_>>() {
        v if !v.is_empty() => v,
        _ if !alive.is_empty() => alive,
        _ => return Ok(all.first().map(|l| l.mv.clone()).ok_or_else(|| GameError::Illegal("no opponent move".into()))?),
    };
    let fresh = |m: &&&Move| m.values.iter().all(|v| matches!(v, Value::Nat(_)) || !s.pool.contains(&v.to_string()));
    let mut reuse = None;
    for m in &pool {
        if peek(engine, ann, s, m)? == EventKind::CloseRequest {
            reuse = Some((*m).clone());
            break;
        }
    }
    if let Some(m) = reuse.filter(|_| close()) {
        return Ok(m);
    }
    Ok(pool.iter().find(fresh).or(pool.first()).map(|m| (*m).clone()).expect("pool is not empty"))
}
