//! The game `(U, V, A)` played on a closed normal formula.
//!
//! The opponent picks a formula of `V` and values for its prefix; its
//! premises join `U` and its conclusion joins `A`. The player answers with a
//! formula of `U` whose instantiated conclusion is already in `A`; its
//! premises replace `V`. The player wins when `V` becomes empty, or when the
//! opponent picks values that falsify an integer guard.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{evaluate_term, Binder, CoreError, Formula, Signature, Sort, Term};
use crate::normal::{is_normal, NormalFormula, Premise};
use crate::syntax::print_formula;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mover {
    Opponent,
    Player,
}

impl Mover {
    pub fn other(self) -> Mover {
        match self {
            Mover::Opponent => Mover::Player,
            Mover::Player => Mover::Opponent,
        }
    }
}

impl fmt::Display for Mover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mover::Opponent => "opponent",
            Mover::Player => "player",
        })
    }
}

/// A value chosen for a quantified variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Nat(u64),
    Const(String),
}

impl Value {
    pub fn constant(name: &str) -> Value {
        Value::Const(name.to_string())
    }

    pub fn sort(&self) -> Sort {
        match self {
            Value::Nat(_) => Sort::Int,
            Value::Const(_) => Sort::Ack,
        }
    }

    pub fn to_term(&self) -> Term {
        match self {
            Value::Nat(k) => Term::Nat(*k),
            Value::Const(c) => Term::AckConst(c.clone()),
        }
    }

    pub(crate) fn from_ground(t: &Term) -> Option<Value> {
        match t {
            Term::Nat(k) => Some(Value::Nat(*k)),
            Term::AckConst(c) => Some(Value::Const(c.clone())),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nat(k) => write!(f, "{k}"),
            Value::Const(c) => f.write_str(c),
        }
    }
}

/// A move: a member of `V` (opponent) or `U` (player) and values for its
/// quantifier prefix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Move {
    pub mover: Mover,
    pub formula: Formula,
    pub values: Vec<Value>,
}

impl Move {
    pub fn new(mover: Mover, formula: Formula, values: Vec<Value>) -> Move {
        Move { mover, formula, values }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_formula(&self.formula))?;
        if !self.values.is_empty() {
            let vals: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
            write!(f, " @ {}", vals.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WinReason {
    VEmpty,
    OpponentGuardFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Ongoing,
    PlayerWins { reason: WinReason },
    /// The play reached the step budget; the real game would go on forever.
    OpponentWinsAtCap { steps: usize },
}

impl Outcome {
    pub fn is_over(&self) -> bool {
        !matches!(self, Outcome::Ongoing)
    }

    pub fn player_won(&self) -> bool {
        matches!(self, Outcome::PlayerWins { .. })
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Ongoing => f.write_str("ongoing"),
            Outcome::PlayerWins { reason: WinReason::VEmpty } => f.write_str("player wins (V empty)"),
            Outcome::PlayerWins { reason: WinReason::OpponentGuardFailure } => {
                f.write_str("player wins (opponent guard failure)")
            }
            Outcome::OpponentWinsAtCap { steps } => write!(f, "opponent wins at cap ({steps} steps)"),
        }
    }
}

/// Value enumeration for unconstrained coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolPolicy {
    /// Integers `0..=int_bound` are always offered.
    pub int_bound: u64,
    /// Maximum number of fresh constants introduced by one move.
    pub max_fresh: usize,
}

impl Default for PoolPolicy {
    fn default() -> Self {
        PoolPolicy { int_bound: 3, max_fresh: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("root formula is not closed")]
    NotClosed,
    #[error("root formula is not in normal form")]
    NotNormal,
    #[error("it is the {0}'s turn")]
    OutOfTurn(Mover),
    #[error("the play is over: {0}")]
    GameOver(Outcome),
    #[error("illegal move: {0}")]
    Illegal(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Position of a play.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameState {
    pub root: Formula,
    pub u: IndexSet<Formula>,
    pub v: IndexSet<Formula>,
    pub a: IndexSet<Formula>,
    pub turn: Mover,
    /// Ack constants in order of first appearance.
    pub pool: IndexSet<String>,
    /// Conclusion added by the last opponent move.
    pub last_assertion: Option<Formula>,
    /// Members of `U` from this index on were added by the last opponent move.
    #[serde(default)]
    pub u_mark: usize,
    pub outcome: Outcome,
    pub step: usize,
    pub history: Vec<Move>,
}

impl GameState {
    /// `root -> false`, which is in `U` from the start.
    pub fn root_negation(&self) -> Formula {
        Formula::not(self.root.clone())
    }

    /// Constants occurring in `U`, `V` or `A`, in pool order.
    pub fn present_constants(&self) -> Vec<String> {
        let mut present = HashSet::new();
        for f in self.u.iter().chain(&self.v).chain(&self.a) {
            present.extend(f.constants());
        }
        self.pool.iter().filter(|c| present.contains(*c)).cloned().collect()
    }

    pub fn ints_in_play(&self) -> BTreeSet<u64> {
        let mut out = BTreeSet::new();
        for f in self.u.iter().chain(&self.v).chain(&self.a) {
            out.extend(f.naturals());
        }
        out
    }

    /// Atoms asserted by the opponent that the player also holds.
    pub fn common_atoms(&self) -> Vec<&Formula> {
        self.a.iter().filter(|f| matches!(f, Formula::Atom(..)) && self.u.contains(*f)).collect()
    }
}

/// An opponent option; `loses` marks values that falsify a guard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegalMove {
    pub mv: Move,
    pub loses: bool,
}

/// One applied move and its effect on the state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRow {
    pub step: usize,
    pub mover: Mover,
    #[serde(rename = "move")]
    pub mv: Move,
    pub added_u: Vec<Formula>,
    /// The new content of `V`, for player moves.
    pub v: Option<Vec<Formula>>,
    pub added_a: Vec<Formula>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub root: Formula,
    pub rows: Vec<TranscriptRow>,
    pub outcome: Outcome,
}

impl Transcript {
    /// Text table with one line per move.
    pub fn to_table(&self) -> String {
        let list = |fs: &[Formula]| fs.iter().map(print_formula).collect::<Vec<_>>().join("; ");
        let mut lines = vec![[
            "step".to_string(),
            "mover".to_string(),
            "move".to_string(),
            "U +".to_string(),
            "V".to_string(),
            "A +".to_string(),
        ]];
        let root = print_formula(&self.root);
        lines.push([
            "0".into(),
            "".into(),
            "".into(),
            print_formula(&Formula::not(self.root.clone())),
            root,
            "false".into(),
        ]);
        for r in &self.rows {
            lines.push([
                r.step.to_string(),
                r.mover.to_string(),
                r.mv.to_string(),
                list(&r.added_u),
                r.v.as_ref().map(|v| if v.is_empty() { "(empty)".to_string() } else { list(v) }).unwrap_or_default(),
                list(&r.added_a),
            ]);
        }
        let mut widths = [0usize; 6];
        for l in &lines {
            for (w, c) in widths.iter_mut().zip(l) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        for l in &lines {
            let cells: Vec<String> = l.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
            out.push_str(cells.join(" | ").trim_end());
            out.push('\n');
        }
        out.push_str(&format!("outcome: {}\n", self.outcome));
        out
    }
}

/// Chooses moves for one side.
pub trait Strategy {
    fn choose(&mut self, engine: &Engine, state: &GameState) -> Result<Move, String>;
}

/// Which formula a scripted step picks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pick {
    /// The root negation in `U`.
    Root,
    /// The `k`-th member of `V` or `U` in insertion order.
    Index(usize),
    /// The most recently added member of `U`.
    Newest,
    /// A member alpha-equal to the given formula.
    Formula(Formula),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptStep {
    pub pick: Pick,
    pub values: Vec<Value>,
}

impl ScriptStep {
    pub fn new(pick: Pick, values: Vec<Value>) -> Self {
        ScriptStep { pick, values }
    }
}

/// Plays a fixed list of steps, then fails.
#[derive(Debug, Clone)]
pub struct Scripted {
    steps: Vec<ScriptStep>,
    next: usize,
}

impl Scripted {
    pub fn new(steps: Vec<ScriptStep>) -> Self {
        Scripted { steps, next: 0 }
    }
}

impl Strategy for Scripted {
    fn choose(&mut self, _engine: &Engine, state: &GameState) -> Result<Move, String> {
        let step = self.steps.get(self.next).ok_or("script exhausted")?.clone();
        self.next += 1;
        let set = match state.turn {
            Mover::Opponent => &state.v,
            Mover::Player => &state.u,
        };
        let formula = match &step.pick {
            Pick::Root => state.root_negation(),
            Pick::Index(k) => set.get_index(*k).cloned().ok_or_else(|| format!("no member at index {k}"))?,
            Pick::Newest => set.last().cloned().ok_or("empty set")?,
            Pick::Formula(f) => {
                find_alpha(set, f).cloned().ok_or_else(|| format!("`{}` is not available", print_formula(f)))?
            }
        };
        Ok(Move::new(state.turn, formula, step.values))
    }
}

/// Replays the moves of one side from a transcript.
#[derive(Debug, Clone)]
pub struct Replay {
    moves: Vec<Move>,
    next: usize,
}

impl Replay {
    pub fn new(transcript: &Transcript, mover: Mover) -> Self {
        let moves = transcript.rows.iter().filter(|r| r.mover == mover).map(|r| r.mv.clone()).collect();
        Replay { moves, next: 0 }
    }
}

impl Strategy for Replay {
    fn choose(&mut self, _engine: &Engine, _state: &GameState) -> Result<Move, String> {
        let m = self.moves.get(self.next).cloned().ok_or("replay exhausted")?;
        self.next += 1;
        Ok(m)
    }
}

/// Always plays the first legal move; the opponent skips losing moves
/// when it can.
#[derive(Debug, Clone, Default)]
pub struct FirstLegal;

impl Strategy for FirstLegal {
    fn choose(&mut self, engine: &Engine, state: &GameState) -> Result<Move, String> {
        match state.turn {
            Mover::Player => engine.legal_moves_player(state).map_err(|e| e.to_string())?.into_iter().next(),
            Mover::Opponent => {
                let moves = engine.legal_moves_opponent(state).map_err(|e| e.to_string())?;
                let safe = moves.iter().find(|m| !m.loses).or(moves.first()).map(|m| m.mv.clone());
                safe
            }
        }
        .ok_or_else(|| "no legal move".to_string())
    }
}

/// A play aborted by an illegal strategy move.
#[derive(Debug, Clone, Error)]
#[error("play aborted at step {}: {message}", transcript.rows.len() + 1)]
pub struct PlayError {
    pub transcript: Transcript,
    pub message: String,
}

/// How opponent ack coordinates are enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AckChoice {
    /// Constants in play, plus fresh ones.
    Pool,
    /// Only pairwise distinct fresh constants.
    FreshOnly,
}

/// Runs games on a fixed signature.
#[derive(Debug, Clone)]
pub struct Engine {
    sig: Arc<Signature>,
    policy: PoolPolicy,
}

impl Engine {
    pub fn new(sig: Arc<Signature>, policy: PoolPolicy) -> Self {
        Engine { sig, policy }
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn policy(&self) -> PoolPolicy {
        self.policy
    }

    /// Replaces closed integer terms by their values.
    pub fn evaluate(&self, f: &Formula) -> Result<Formula, GameError> {
        Ok(f.eval_closed_terms(&self.sig)?)
    }

    pub fn init(&self, root: &Formula) -> Result<GameState, GameError> {
        if !root.is_closed() {
            return Err(GameError::NotClosed);
        }
        if !is_normal(root) {
            return Err(GameError::NotNormal);
        }
        let root = self.evaluate(root)?;
        let neg = Formula::not(root.clone());
        Ok(GameState {
            pool: root.constants().into_iter().collect(),
            u: IndexSet::from([neg]),
            v: IndexSet::from([root.clone()]),
            a: IndexSet::from([Formula::Falsum]),
            root,
            turn: Mover::Opponent,
            last_assertion: None,
            u_mark: 0,
            outcome: Outcome::Ongoing,
            step: 0,
            history: Vec::new(),
        })
    }

    fn check_turn(&self, s: &GameState, mover: Mover) -> Result<(), GameError> {
        if s.outcome.is_over() {
            return Err(GameError::GameOver(s.outcome));
        }
        if s.turn != mover {
            return Err(GameError::OutOfTurn(s.turn));
        }
        Ok(())
    }

    /// Integers offered for unconstrained integer coordinates: everything up
    /// to the bound or to the largest integer in play.
    pub fn int_pool(&self, s: &GameState) -> Vec<u64> {
        let top = s.ints_in_play().last().copied().unwrap_or(0).max(self.policy.int_bound);
        (0..=top).collect()
    }

    pub fn legal_moves_opponent(&self, s: &GameState) -> Result<Vec<LegalMove>, GameError> {
        self.opponent_moves(s, AckChoice::Pool)
    }

    /// Opponent options under the given ack enumeration. Guard-falsifying
    /// options are included and flagged.
    pub fn opponent_moves(&self, s: &GameState, ack: AckChoice) -> Result<Vec<LegalMove>, GameError> {
        self.check_turn(s, Mover::Opponent)?;
        let consts = match ack {
            AckChoice::Pool => s.present_constants(),
            AckChoice::FreshOnly => Vec::new(),
        };
        let ints = self.int_pool(s);
        let mut out = Vec::new();
        for f in &s.v {
            let nf = NormalFormula::from_formula(f).expect("V holds normal formulas");
            let fixed = vec![None; nf.prefix.len()];
            for values in self.value_vectors(&nf.prefix, &fixed, &consts, &ints, &s.pool, ack == AckChoice::FreshOnly) {
                let (premises, _) = nf.instantiate(&terms(&values));
                let loses = !self.guards_hold(&premises)?;
                out.push(LegalMove { mv: Move::new(Mover::Opponent, f.clone(), values), loses });
            }
        }
        Ok(out)
    }

    /// Player options; never empty in a reachable player-turn state.
    pub fn legal_moves_player(&self, s: &GameState) -> Result<Vec<Move>, GameError> {
        self.check_turn(s, Mover::Player)?;
        let consts = s.present_constants();
        let ints = self.int_pool(s);
        let mut out = Vec::new();
        for f in &s.u {
            let nf = NormalFormula::from_formula(f).expect("U holds normal formulas");
            let mut seen = HashSet::new();
            for fixed in self.conclusion_matches(&nf, s) {
                for values in self.value_vectors(&nf.prefix, &fixed, &consts, &ints, &s.pool, false) {
                    if seen.contains(&values) {
                        continue;
                    }
                    let (premises, concl) = nf.instantiate(&terms(&values));
                    if self.guards_hold(&premises)? && s.a.contains(&concl.eval_closed_terms(&self.sig)?) {
                        seen.insert(values.clone());
                        out.push(Move::new(Mover::Player, f.clone(), values));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Partial value vectors that make the conclusion match an atom of `A`
    /// on the coordinates occurring bare in it.
    fn conclusion_matches(&self, nf: &NormalFormula, s: &GameState) -> Vec<Vec<Option<Value>>> {
        let n = nf.prefix.len();
        let (pred, args) = match &nf.conclusion {
            Formula::Atom(p, args) => (p, args),
            _ => return vec![vec![None; n]],
        };
        let index = |name: &str| nf.prefix.iter().position(|b| b.name == name);
        let mut out = Vec::new();
        'atoms: for atom in &s.a {
            let Formula::Atom(q, ground) = atom else { continue };
            if q != pred || ground.len() != args.len() {
                continue;
            }
            let mut fixed: Vec<Option<Value>> = vec![None; n];
            for (p, g) in args.iter().zip(ground) {
                if let Some(i) = p.var_name().and_then(index) {
                    let Some(v) = Value::from_ground(g) else { continue 'atoms };
                    if v.sort() != nf.prefix[i].sort {
                        continue 'atoms;
                    }
                    match &fixed[i] {
                        Some(w) if *w != v => continue 'atoms,
                        _ => fixed[i] = Some(v),
                    }
                } else if p.is_closed() && p != g {
                    continue 'atoms;
                }
            }
            if !out.contains(&fixed) {
                out.push(fixed);
            }
        }
        out
    }

    fn value_vectors(
        &self,
        prefix: &[Binder],
        fixed: &[Option<Value>],
        consts: &[String],
        ints: &[u64],
        pool: &IndexSet<String>,
        fresh_only: bool,
    ) -> Vec<Vec<Value>> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(prefix.len());
        let mut fresh = Vec::new();
        self.extend_values(prefix, fixed, consts, ints, pool, fresh_only, &mut cur, &mut fresh, &mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn extend_values(
        &self,
        prefix: &[Binder],
        fixed: &[Option<Value>],
        consts: &[String],
        ints: &[u64],
        pool: &IndexSet<String>,
        fresh_only: bool,
        cur: &mut Vec<Value>,
        fresh: &mut Vec<String>,
        out: &mut Vec<Vec<Value>>,
    ) {
        let i = cur.len();
        if i == prefix.len() {
            out.push(cur.clone());
            return;
        }
        let mut recurse = |v: Value, cur: &mut Vec<Value>, fresh: &mut Vec<String>| {
            cur.push(v);
            self.extend_values(prefix, fixed, consts, ints, pool, fresh_only, cur, fresh, out);
            cur.pop();
        };
        if let Some(v) = &fixed[i] {
            recurse(v.clone(), cur, fresh);
            return;
        }
        match prefix[i].sort {
            Sort::Int => {
                for k in ints {
                    recurse(Value::Nat(*k), cur, fresh);
                }
            }
            Sort::Ack => {
                if !fresh_only {
                    for c in consts.iter().chain(fresh.clone().iter()) {
                        recurse(Value::Const(c.clone()), cur, fresh);
                    }
                }
                if fresh.len() < self.policy.max_fresh {
                    let name = fresh_constant(pool, fresh);
                    fresh.push(name.clone());
                    recurse(Value::Const(name), cur, fresh);
                    fresh.pop();
                }
            }
        }
    }

    fn guards_hold(&self, premises: &[Premise]) -> Result<bool, GameError> {
        for p in premises {
            if let Premise::Equation(t, u) = p {
                if evaluate_term(t, &self.sig)? != evaluate_term(u, &self.sig)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn check_values(&self, nf: &NormalFormula, values: &[Value]) -> Result<(), GameError> {
        if nf.prefix.len() != values.len() {
            return Err(GameError::Illegal(format!(
                "expected {} value(s), got {}",
                nf.prefix.len(),
                values.len()
            )));
        }
        for (b, v) in nf.prefix.iter().zip(values) {
            if b.sort != v.sort() {
                return Err(GameError::Illegal(format!("sort mismatch: value `{v}` for a {} variable", b.sort)));
            }
        }
        Ok(())
    }

    /// Applies a move, returning the new state and the transcript row.
    pub fn apply_move(&self, s: &GameState, m: &Move) -> Result<(GameState, TranscriptRow), GameError> {
        self.check_turn(s, m.mover)?;
        let set = match m.mover {
            Mover::Opponent => &s.v,
            Mover::Player => &s.u,
        };
        let Some(formula) = find_alpha(set, &m.formula).cloned() else {
            let which = if m.mover == Mover::Opponent { "V" } else { "U" };
            return Err(GameError::Illegal(format!("`{}` is not in {which}", print_formula(&m.formula))));
        };
        let nf = NormalFormula::from_formula(&formula).expect("members are normal");
        self.check_values(&nf, &m.values)?;
        let (premises, concl) = nf.instantiate(&terms(&m.values));
        let concl = concl.eval_closed_terms(&self.sig)?;
        let guards = self.guards_hold(&premises)?;
        let mut next = s.clone();
        next.step += 1;
        next.history.push(Move::new(m.mover, formula.clone(), m.values.clone()));
        let mut row = TranscriptRow {
            step: next.step,
            mover: m.mover,
            mv: Move::new(m.mover, formula, m.values.clone()),
            added_u: Vec::new(),
            v: None,
            added_a: Vec::new(),
            outcome: Outcome::Ongoing,
        };
        let mut body = Vec::new();
        for p in &premises {
            if let Premise::Formula(n) = p {
                body.push(self.evaluate(&n.to_formula())?);
            }
        }
        match m.mover {
            Mover::Opponent => {
                if !guards {
                    next.outcome = Outcome::PlayerWins { reason: WinReason::OpponentGuardFailure };
                } else {
                    next.u_mark = next.u.len();
                    for f in body {
                        note_constants(&mut next.pool, &f);
                        if insert_alpha(&mut next.u, &f) {
                            row.added_u.push(f);
                        }
                    }
                    note_constants(&mut next.pool, &concl);
                    if next.a.insert(concl.clone()) {
                        row.added_a.push(concl.clone());
                    }
                    next.last_assertion = Some(concl);
                    next.turn = Mover::Player;
                }
            }
            Mover::Player => {
                if !guards {
                    return Err(GameError::Illegal("a guard evaluates to false".into()));
                }
                if !s.a.contains(&concl) {
                    return Err(GameError::Illegal(format!(
                        "conclusion `{}` is not in A; a player move needs B[b] ∈ A",
                        print_formula(&concl)
                    )));
                }
                for f in &body {
                    note_constants(&mut next.pool, f);
                }
                next.v = IndexSet::new();
                for f in &body {
                    insert_alpha(&mut next.v, f);
                }
                row.v = Some(next.v.iter().cloned().collect());
                next.turn = Mover::Opponent;
                if next.v.is_empty() {
                    next.outcome = Outcome::PlayerWins { reason: WinReason::VEmpty };
                }
            }
        }
        row.outcome = next.outcome;
        Ok((next, row))
    }

    /// Plays from the initial state until a win or until `budget` moves.
    pub fn run_play(
        &self,
        root: &Formula,
        player: &mut dyn Strategy,
        opponent: &mut dyn Strategy,
        budget: usize,
    ) -> Result<Transcript, PlayError> {
        let mut state = self.init(root).map_err(|e| PlayError {
            transcript: Transcript { root: root.clone(), rows: vec![], outcome: Outcome::Ongoing },
            message: e.to_string(),
        })?;
        let mut t = Transcript { root: state.root.clone(), rows: Vec::new(), outcome: Outcome::Ongoing };
        while !state.outcome.is_over() {
            if state.step >= budget {
                state.outcome = Outcome::OpponentWinsAtCap { steps: state.step };
                break;
            }
            let strategy: &mut dyn Strategy = match state.turn {
                Mover::Player => &mut *player,
                Mover::Opponent => &mut *opponent,
            };
            let applied = strategy
                .choose(self, &state)
                .and_then(|m| self.apply_move(&state, &m).map_err(|e| e.to_string()));
            match applied {
                Ok((next, row)) => {
                    state = next;
                    t.rows.push(row);
                }
                Err(message) => {
                    t.outcome = state.outcome;
                    return Err(PlayError { transcript: t, message: format!("{} move rejected: {message}", state.turn) });
                }
            }
        }
        t.outcome = state.outcome;
        Ok(t)
    }

    /// Re-applies every row of a transcript and returns the final state.
    pub fn replay(&self, t: &Transcript) -> Result<GameState, GameError> {
        let mut s = self.init(&t.root)?;
        for r in &t.rows {
            let (next, row) = self.apply_move(&s, &r.mv)?;
            if row != *r {
                return Err(GameError::Illegal(format!("row {} does not reproduce", r.step)));
            }
            s = next;
        }
        if let Outcome::OpponentWinsAtCap { .. } = t.outcome {
            s.outcome = t.outcome;
        }
        Ok(s)
    }
}

/// The member of `set` alpha-equivalent to `f`.
pub fn find_alpha<'a>(set: &'a IndexSet<Formula>, f: &Formula) -> Option<&'a Formula> {
    if let Some(g) = set.get(f) {
        return Some(g);
    }
    let c = f.canonical();
    set.iter().find(|g| g.canonical() == c)
}

fn insert_alpha(set: &mut IndexSet<Formula>, f: &Formula) -> bool {
    if find_alpha(set, f).is_some() {
        return false;
    }
    set.insert(f.clone())
}

fn terms(values: &[Value]) -> Vec<Term> {
    values.iter().map(Value::to_term).collect()
}

fn note_constants(pool: &mut IndexSet<String>, f: &Formula) {
    pool.extend(f.constants());
}

/// First `#k` name that is neither in the pool nor already taken.
pub fn fresh_constant(pool: &IndexSet<String>, taken: &[String]) -> String {
    (0..)
        .map(|k| format!("#{k}"))
        .find(|n| !pool.contains(n) && !taken.contains(n))
        .expect("unbounded supply")
}
