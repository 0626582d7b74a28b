//! Game sessions: state, legal moves with tokens, submission and engine
//! moves.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use protogame::game::{fresh_constant, Engine, GameError, GameState, Move, Mover, Outcome, Transcript, Value};
use protogame::syntax::SourceText;
use protogame::validity::{greedy_player, solve_state, SearchLimits, Verdict};
use protogame::{
    annotate, expand_sugar, free_vars, parse_formula, preview, print_formula, sender_choice, substitute, NetEvent,
    SessionTrace, Sort, Term,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::{Catalog, LoadError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Control {
    Human,
    Engine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub player: Control,
    pub opponent: Control,
}

impl Roles {
    /// A human on one side, the engine on the other.
    pub fn human(side: Mover) -> Roles {
        match side {
            Mover::Player => Roles { player: Control::Human, opponent: Control::Engine },
            Mover::Opponent => Roles { player: Control::Engine, opponent: Control::Human },
        }
    }

    pub fn of(&self, side: Mover) -> Control {
        match side {
            Mover::Player => self.player,
            Mover::Opponent => self.opponent,
        }
    }
}

impl Default for Roles {
    fn default() -> Self {
        Roles::human(Mover::Opponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionLimits {
    /// Moves after which the play ends as an opponent win at the cap.
    pub budget: usize,
    pub search: SearchLimits,
    /// Integer the engine sender announces on its first move.
    pub first_int: u64,
}

impl Default for SessionLimits {
    fn default() -> Self {
        SessionLimits { budget: 200, search: SearchLimits::default(), first_int: 2 }
    }
}

/// What a session is made of; everything else follows by replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub formula_name: String,
    pub origin: String,
    /// The whole program the formula comes from.
    pub program: String,
    pub roles: Roles,
    pub limits: SessionLimits,
    pub created: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    #[serde(flatten)]
    pub meta: SessionMeta,
    pub source: String,
    pub state: GameState,
    pub transcript: Transcript,
    pub updated: u64,
}

impl SessionRecord {
    /// Number of moves played; tokens are bound to it.
    pub fn version(&self) -> usize {
        self.transcript.rows.len()
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("the session is closed: {0}")]
    Closed(Outcome),
    #[error("{0}")]
    Illegal(String),
    #[error("stale or unknown move token")]
    StaleToken,
    #[error("the {0} is played by a human")]
    NotEngineTurn(Mover),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("engine failure: {0}")]
    Engine(String),
}

impl From<GameError> for SessionError {
    fn from(e: GameError) -> Self {
        match e {
            GameError::GameOver(o) => SessionError::Closed(o),
            GameError::Illegal(m) => SessionError::Illegal(m),
            GameError::OutOfTurn(m) => SessionError::Illegal(format!("it is the {m}'s turn")),
            other => SessionError::Engine(other.to_string()),
        }
    }
}

/// A value in a legal move; `fresh` marks a constant the engine minted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueChoice {
    pub value: Value,
    pub fresh: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveOption {
    pub token: String,
    pub mover: Mover,
    pub formula: String,
    pub values: Vec<ValueChoice>,
    /// Opponent moves that falsify a guard and lose on the spot.
    pub loses: bool,
    /// One-line network reading of the move.
    pub annotation: String,
    #[serde(rename = "move")]
    pub mv: Move,
}

/// A move given by content instead of token. Values may be the string
/// `"fresh"`, for which the engine mints a constant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplicitMove {
    pub formula: String,
    #[serde(default)]
    pub values: Vec<Value>,
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Token of a move at a given state version.
pub fn move_token(id: &str, version: usize, mv: &Move) -> String {
    let mut h = Sha256::new();
    h.update(id.as_bytes());
    h.update([0]);
    h.update(version.to_le_bytes());
    h.update(serde_json::to_vec(mv).expect("moves serialize"));
    hex::encode(&h.finalize()[..16])
}

/// A live session: the record and the engine for its signature.
#[derive(Debug, Clone)]
pub struct Session {
    pub record: SessionRecord,
    pub engine: Engine,
}

impl Session {
    pub fn create(meta: SessionMeta) -> Result<Session, SessionError> {
        let catalog = Catalog::parse(&meta.program, &meta.origin)?;
        let root = catalog.root(&meta.formula_name)?;
        let engine = catalog.engine(meta.limits.search.policy());
        let state = engine.init(&root)?;
        let source = catalog.program.get(&meta.formula_name).map(protogame::print_surface).unwrap_or_default();
        let transcript = Transcript { root: state.root.clone(), rows: Vec::new(), outcome: Outcome::Ongoing };
        let updated = meta.created;
        Ok(Session { record: SessionRecord { meta, source, state, transcript, updated }, engine })
    }

    /// Rebuilds a session by replaying its moves.
    pub fn restore(meta: SessionMeta, moves: &[Move]) -> Result<Session, SessionError> {
        let mut s = Session::create(meta)?;
        for m in moves {
            s.apply(m)?;
        }
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.record.meta.id
    }

    pub fn state(&self) -> &GameState {
        &self.record.state
    }

    pub fn is_closed(&self) -> bool {
        self.record.state.outcome.is_over()
    }

    fn ensure_open(&self) -> Result<(), SessionError> {
        if self.is_closed() {
            return Err(SessionError::Closed(self.record.state.outcome));
        }
        Ok(())
    }

    /// Every legal move of the side to move, in engine order.
    pub fn legal_moves(&self) -> Result<Vec<MoveOption>, SessionError> {
        if self.is_closed() {
            return Ok(Vec::new());
        }
        let s = &self.record.state;
        let moves: Vec<(Move, bool)> = match s.turn {
            Mover::Player => self.engine.legal_moves_player(s)?.into_iter().map(|m| (m, false)).collect(),
            Mover::Opponent => self.engine.legal_moves_opponent(s)?.into_iter().map(|l| (l.mv, l.loses)).collect(),
        };
        let plain: Vec<Move> = moves.iter().map(|(m, _)| m.clone()).collect();
        let events = preview(&self.engine, &self.record.transcript, &plain)?;
        Ok(moves.into_iter().zip(events).map(|((mv, loses), e)| self.option(mv, loses, &e)).collect())
    }

    fn option(&self, mv: Move, loses: bool, event: &NetEvent) -> MoveOption {
        let s = &self.record.state;
        let values = mv
            .values
            .iter()
            .map(|v| ValueChoice {
                value: v.clone(),
                fresh: matches!(v, Value::Const(c) if !s.pool.contains(c)),
            })
            .collect();
        MoveOption {
            token: move_token(self.id(), self.record.version(), &mv),
            mover: mv.mover,
            formula: print_formula(&mv.formula),
            values,
            loses,
            annotation: annotation(event),
            mv,
        }
    }

    /// Plays the move a token stands for.
    pub fn submit_token(&mut self, token: &str) -> Result<NetEvent, SessionError> {
        self.ensure_open()?;
        let mv = self
            .legal_moves()?
            .into_iter()
            .find(|o| o.token == token)
            .map(|o| o.mv)
            .ok_or(SessionError::StaleToken)?;
        self.apply(&mv)
    }

    /// Plays a move given by content; the engine checks legality.
    pub fn submit_explicit(&mut self, m: &ExplicitMove) -> Result<NetEvent, SessionError> {
        self.ensure_open()?;
        let sig = self.engine.signature();
        let surface = parse_formula(&SourceText::inline(m.formula.as_str()), sig)
            .map_err(|e| SessionError::BadRequest(e.to_string()))?;
        let formula = expand_sugar(&surface, sig).map_err(|e| SessionError::BadRequest(e.to_string()))?;
        // names left free in a move are the constants of the play
        let binding: BTreeMap<String, Term> = free_vars(&formula)
            .into_iter()
            .filter(|(_, sort)| *sort == Sort::Ack)
            .map(|(n, _)| (n.clone(), Term::constant(&n)))
            .collect();
        let formula = substitute(&formula, &binding).map_err(|e| SessionError::BadRequest(e.to_string()))?;
        let s = &self.record.state;
        let mut taken = Vec::new();
        let values = m
            .values
            .iter()
            .map(|v| match v {
                Value::Const(c) if c == "fresh" => {
                    let c = fresh_constant(&s.pool, &taken);
                    taken.push(c.clone());
                    Value::Const(c)
                }
                v => v.clone(),
            })
            .collect();
        self.apply(&Move::new(s.turn, formula, values))
    }

    /// Lets the engine play the side to move, if the engine controls it.
    pub fn auto_step(&mut self) -> Result<NetEvent, SessionError> {
        self.ensure_open()?;
        let turn = self.record.state.turn;
        if self.record.meta.roles.of(turn) != Control::Engine {
            return Err(SessionError::NotEngineTurn(turn));
        }
        let mv = self.engine_move()?;
        self.apply(&mv)
    }

    /// The engine's choice for the side to move: the greedy receiver or a
    /// lossless sender.
    pub fn engine_move(&self) -> Result<Move, SessionError> {
        let s = &self.record.state;
        Ok(match s.turn {
            Mover::Player => greedy_player(&self.engine, s)?,
            Mover::Opponent => sender_choice(&self.engine, &self.record.transcript, self.record.meta.limits.first_int)?,
        })
    }

    /// Applies a move, records it and closes the session at the budget.
    pub fn apply(&mut self, mv: &Move) -> Result<NetEvent, SessionError> {
        self.ensure_open()?;
        let before = self.record.transcript.clone();
        let event = preview(&self.engine, &before, std::slice::from_ref(mv))?.remove(0);
        let (mut next, row) = self.engine.apply_move(&self.record.state, mv)?;
        let r = &mut self.record;
        r.transcript.rows.push(row);
        if !next.outcome.is_over() && r.transcript.rows.len() >= r.meta.limits.budget {
            next.outcome = Outcome::OpponentWinsAtCap { steps: next.step };
        }
        r.transcript.outcome = next.outcome;
        r.state = next;
        r.updated = now();
        Ok(event)
    }

    /// The certified move for the side to move, when the solver finds a
    /// winning strategy for that side.
    pub fn hint(&self) -> Result<Hint, SessionError> {
        let s = &self.record.state;
        if self.is_closed() {
            return Ok(Hint { verdict: "Closed".into(), mv: None });
        }
        let verdict = solve_state(&self.engine, s, &self.record.meta.limits.search)?;
        let label = verdict.label().to_string();
        let winner = match &verdict {
            Verdict::Valid { .. } => Some(Mover::Player),
            Verdict::Invalid { .. } => Some(Mover::Opponent),
            Verdict::Unknown { .. } => None,
        };
        let mv = match (winner, verdict.certificate()) {
            (Some(w), Some(cert)) if w == s.turn => cert.lookup(s),
            _ => None,
        };
        let mv = match mv {
            Some(m) => {
                let e = preview(&self.engine, &self.record.transcript, std::slice::from_ref(&m))?.remove(0);
                let loses = match s.turn {
                    Mover::Opponent => self.engine.legal_moves_opponent(s)?.iter().any(|l| l.mv == m && l.loses),
                    Mover::Player => false,
                };
                Some(self.option(m, loses, &e))
            }
            None => None,
        };
        Ok(Hint { verdict: label, mv })
    }

    pub fn trace(&self) -> Result<SessionTrace, SessionError> {
        Ok(annotate(&self.engine, &self.record.transcript)?)
    }

    pub fn view(&self) -> SessionView {
        let r = &self.record;
        SessionView {
            id: r.meta.id.clone(),
            formula: r.meta.formula_name.clone(),
            source: r.source.clone(),
            version: r.version(),
            turn: r.state.turn,
            outcome: r.state.outcome,
            closed: self.is_closed(),
            u: list(r.state.u.iter()),
            v: list(r.state.v.iter()),
            a: list(r.state.a.iter()),
            roles: r.meta.roles,
            limits: r.meta.limits,
            created: r.meta.created,
            updated: r.updated,
        }
    }
}

fn list<'a>(fs: impl Iterator<Item = &'a protogame::Formula>) -> Vec<String> {
    fs.map(print_formula).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hint {
    pub verdict: String,
    #[serde(rename = "move")]
    pub mv: Option<MoveOption>,
}

/// Client view of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub formula: String,
    pub source: String,
    pub version: usize,
    pub turn: Mover,
    pub outcome: Outcome,
    pub closed: bool,
    pub u: Vec<String>,
    pub v: Vec<String>,
    pub a: Vec<String>,
    pub roles: Roles,
    pub limits: SessionLimits,
    pub created: u64,
    pub updated: u64,
}

/// Short description of a network event.
pub fn annotation(e: &NetEvent) -> String {
    use protogame::netsim::EventTag;
    use protogame::EventKind::*;
    let packet = e.packet.as_ref().map(|p| p.to_string()).unwrap_or_default();
    let header = e.header.as_ref().map(|h| h.to_string()).unwrap_or_default();
    let mut s = match e.kind {
        Open if e.has_tag(EventTag::SubSession) => "open a sub-session".to_string(),
        Open if packet.is_empty() => "open the session".to_string(),
        Open => format!("open the session with packet {packet}"),
        HeaderOffer if e.has_tag(EventTag::ReRequest) => format!("ask again for packet {packet} (header {header})"),
        HeaderOffer => format!("offer header {header}"),
        Send => format!("send packet {packet}"),
        Ack if header.is_empty() => format!("acknowledge packet {packet}"),
        Ack => format!("acknowledge packet {packet} (header {header})"),
        AckLoss => format!("offer header {header}; the acknowledgement is lost"),
        Reinit => "reinitialize the session".to_string(),
        CloseRequest => format!("resend header {header} (request close)"),
        Close => format!("close with packet {packet}"),
        OpponentForfeit => "violate a guard (sender forfeits)".to_string(),
        Unclassified => "unclassified move".to_string(),
    };
    if e.has_tag(EventTag::StaleHeader) {
        s.push_str(" [stale header]");
    }
    s
}
