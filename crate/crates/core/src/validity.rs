//! Bounded solving of the game, certificates and strategies.
//!
//! Validity is proved by an AND-OR search in which the opponent only ever
//! picks fresh constants. This loses nothing: a play where the opponent
//! reuses constants is the image of a fresh play under a renaming, and the
//! player's moves carry over along that renaming.
//!
//! Invalidity is proved by finding a trap: a set of positions, closed under
//! every player move, in which the opponent always has a reply that stays
//! inside. Plays that never leave it are infinite, so the opponent wins.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::formula::Formula;
use crate::game::{
    find_alpha, fresh_constant, AckChoice, Engine, GameError, GameState, LegalMove, Move, Mover, PoolPolicy, Strategy, Value,
};
use crate::normal::{NormalFormula, Premise};

/// Position up to renaming of constants and reordering of the sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateKey {
    pub turn: Mover,
    pub u: Vec<Formula>,
    pub v: Vec<Formula>,
    pub a: Vec<Formula>,
}

/// Constants of a state renamed to `#0, #1, ...` in pool order.
struct Renaming {
    present: Vec<String>,
    index: HashMap<String, usize>,
}

impl Renaming {
    fn of(s: &GameState) -> Self {
        let present = s.present_constants();
        let index = present.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Renaming { present, index }
    }

    fn formula(&self, f: &Formula) -> Formula {
        f.canonical().map_constants(&|c| match self.index.get(c) {
            Some(i) => format!("#{i}"),
            None => c.to_string(),
        })
    }

    fn key(&self, s: &GameState) -> StateKey {
        let sorted = |set: &indexmap::IndexSet<Formula>| {
            let mut out: Vec<Formula> = set.iter().map(|f| self.formula(f)).collect();
            out.sort();
            out.dedup();
            out
        };
        StateKey { turn: s.turn, u: sorted(&s.u), v: sorted(&s.v), a: sorted(&s.a) }
    }

    /// The move in key naming; constants outside the state become
    /// `#n, #n+1, ...` in order of appearance.
    fn to_key_move(&self, m: &Move) -> Move {
        let mut extra: Vec<String> = Vec::new();
        let values = m
            .values
            .iter()
            .map(|v| match v {
                Value::Const(c) => match self.index.get(c) {
                    Some(i) => Value::Const(format!("#{i}")),
                    None => {
                        let j = extra.iter().position(|e| e == c).unwrap_or_else(|| {
                            extra.push(c.clone());
                            extra.len() - 1
                        });
                        Value::Const(format!("#{}", self.present.len() + j))
                    }
                },
                Value::Nat(k) => Value::Nat(*k),
            })
            .collect();
        Move::new(m.mover, self.formula(&m.formula), values)
    }

    /// Inverse of `to_key_move` in the state `s`.
    fn from_key_move(&self, s: &GameState, m: &Move) -> Option<Move> {
        let set = match m.mover {
            Mover::Opponent => &s.v,
            Mover::Player => &s.u,
        };
        let formula = set.iter().find(|f| self.formula(f) == m.formula)?.clone();
        let mut fresh: BTreeMap<usize, String> = BTreeMap::new();
        let mut taken: Vec<String> = Vec::new();
        let mut values = Vec::new();
        for v in &m.values {
            values.push(match v {
                Value::Const(c) => {
                    let i: usize = c.strip_prefix('#').and_then(|k| k.parse().ok())?;
                    if let Some(name) = self.present.get(i) {
                        Value::Const(name.clone())
                    } else {
                        let name = fresh
                            .entry(i)
                            .or_insert_with(|| {
                                let n = fresh_constant(&s.pool, &taken);
                                taken.push(n.clone());
                                n
                            })
                            .clone();
                        Value::Const(name)
                    }
                }
                Value::Nat(k) => Value::Nat(*k),
            });
        }
        Some(Move::new(m.mover, formula, values))
    }
}

/// Canonical key of a state: sets sorted, binders nameless, constants
/// renamed by order of first appearance.
pub fn canonical_state(s: &GameState) -> StateKey {
    Renaming::of(s).key(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchLimits {
    /// Budget of expanded positions, shared by both searches.
    pub max_states: usize,
    /// Maximum number of moves explored from the start position.
    pub max_depth: usize,
    /// Integers `0..=int_bound` are offered at unconstrained coordinates.
    pub int_bound: u64,
    /// Fresh constants introduced by one move.
    pub fresh_bound: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_states: 100_000, max_depth: 64, int_bound: 3, fresh_bound: 4 }
    }
}

impl SearchLimits {
    pub fn policy(&self) -> PoolPolicy {
        PoolPolicy { int_bound: self.int_bound, max_fresh: self.fresh_bound }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Positions expanded by both searches.
    pub states: usize,
    /// Deepest position reached, in moves from the start.
    pub depth: usize,
    /// Whether a limit stopped a search.
    pub limit_hit: bool,
}

/// A positional strategy for one side, keyed by canonical state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub mover: Mover,
    #[serde(with = "entries")]
    pub moves: HashMap<StateKey, Move>,
}

mod entries {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        state: StateKey,
        #[serde(rename = "move")]
        mv: Move,
    }

    pub fn serialize<S: Serializer>(map: &HashMap<StateKey, Move>, ser: S) -> Result<S::Ok, S::Error> {
        let mut list: Vec<Entry> = map.iter().map(|(k, m)| Entry { state: k.clone(), mv: m.clone() }).collect();
        list.sort_by(|a, b| a.state.cmp(&b.state));
        list.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<HashMap<StateKey, Move>, D::Error> {
        let list = Vec::<Entry>::deserialize(de)?;
        Ok(list.into_iter().map(|e| (e.state, e.mv)).collect())
    }
}

impl Certificate {
    fn new(mover: Mover) -> Self {
        Certificate { mover, moves: HashMap::new() }
    }

    /// The certified move in `s`, if any.
    pub fn lookup(&self, s: &GameState) -> Option<Move> {
        let r = Renaming::of(s);
        let m = self.moves.get(&r.key(s))?;
        r.from_key_move(s, m)
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    Valid { certificate: Certificate, stats: SearchStats },
    Invalid { certificate: Certificate, stats: SearchStats },
    Unknown { stats: SearchStats },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Valid { .. } => "Valid",
            Verdict::Invalid { .. } => "Invalid",
            Verdict::Unknown { .. } => "Unknown",
        }
    }

    pub fn stats(&self) -> SearchStats {
        match self {
            Verdict::Valid { stats, .. } | Verdict::Invalid { stats, .. } | Verdict::Unknown { stats } => *stats,
        }
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            Verdict::Valid { certificate, .. } | Verdict::Invalid { certificate, .. } => Some(certificate),
            Verdict::Unknown { .. } => None,
        }
    }

    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid { .. })
    }

    pub fn is_invalid(&self) -> bool {
        matches!(self, Verdict::Invalid { .. })
    }
}

/// Player moves in search order: closing moves; answers to the last atom
/// asserted; formulas the opponent just added to `U`; the rest by recency of
/// the conclusion in `A` and of the formula in `U`; repeats of earlier player
/// moves; the root negation last.
/// Recent constants come before older ones and fresh ones.
pub fn order_player_moves(engine: &Engine, s: &GameState, mut moves: Vec<Move>) -> Vec<Move> {
    let neg = s.root_negation();
    let last_atom = s.last_assertion.as_ref().filter(|f| matches!(f, Formula::Atom(..)));
    let rank = |m: &Move| {
        let nf = NormalFormula::from_formula(&m.formula).expect("normal");
        let terms: Vec<_> = m.values.iter().map(Value::to_term).collect();
        let (_, concl) = nf.instantiate(&terms);
        let concl = engine.evaluate(&concl).unwrap_or(concl);
        let u_index = s.u.get_index_of(&m.formula).unwrap_or(0);
        let repeat = s.history.iter().any(|h| h.mover == Mover::Player && h.formula == m.formula && h.values == m.values);
        let tier = if m.formula == neg {
            5
        } else if nf.formula_premise_count() == 0 {
            0
        } else if repeat {
            4
        } else if last_atom == Some(&concl) {
            1
        } else if u_index >= s.u_mark && s.u_mark > 0 {
            2
        } else {
            3
        };
        let a_age = s.a.len() - s.a.get_index_of(&concl).unwrap_or(0);
        let u_age = s.u.len() - u_index;
        let value_age: Vec<usize> = m
            .values
            .iter()
            .map(|v| match v {
                Value::Const(c) => s.pool.get_index_of(c).map(|i| s.pool.len() - i).unwrap_or(usize::MAX),
                Value::Nat(_) => 0,
            })
            .collect();
        (tier, a_age, u_age, value_age)
    };
    moves.sort_by_cached_key(rank);
    moves
}

/// AND-OR search for a player win against fresh opponent choices.
struct Prover<'a> {
    engine: &'a Engine,
    max_states: usize,
    wins: HashMap<StateKey, Option<Move>>,
    fails: HashMap<StateKey, usize>,
    expanded: usize,
    depth_seen: usize,
    limit_hit: bool,
    width: usize,
}

impl<'a> Prover<'a> {
    fn new(engine: &'a Engine, max_states: usize) -> Self {
        Prover {
            engine,
            max_states,
            wins: HashMap::new(),
            fails: HashMap::new(),
            expanded: 0,
            depth_seen: 0,
            limit_hit: false,
            width: usize::MAX,
        }
    }

    /// Iterative deepening up to `max_depth`, trying every player move.
    fn prove(&mut self, s: &GameState, max_depth: usize) -> Result<bool, GameError> {
        self.width = usize::MAX;
        let mut depth = 4.min(max_depth);
        loop {
            self.limit_hit = false;
            if self.node(s, depth, 0, &mut HashSet::new())? {
                return Ok(true);
            }
            if depth >= max_depth || self.expanded >= self.max_states {
                self.limit_hit = true;
                return Ok(false);
            }
            if !self.limit_hit {
                // nothing was cut by the depth bound; deeper search is futile
                return Ok(false);
            }
            depth = (depth * 2).min(max_depth);
        }
    }

    /// One search that only tries the `width` best-ranked player moves.
    fn prove_narrow(&mut self, s: &GameState, max_depth: usize, width: usize) -> Result<bool, GameError> {
        self.width = width;
        self.fails.clear();
        let won = self.node(s, max_depth, 0, &mut HashSet::new())?;
        self.fails.clear();
        Ok(won)
    }

    fn node(&mut self, s: &GameState, remaining: usize, depth: usize, path: &mut HashSet<StateKey>) -> Result<bool, GameError> {
        if s.outcome.player_won() {
            return Ok(true);
        }
        self.depth_seen = self.depth_seen.max(depth);
        let r = Renaming::of(s);
        let key = r.key(s);
        if self.wins.contains_key(&key) {
            return Ok(true);
        }
        if path.contains(&key) {
            return Ok(false);
        }
        if remaining == 0 || self.expanded >= self.max_states {
            self.limit_hit = true;
            return Ok(false);
        }
        if self.fails.get(&key).is_some_and(|&d| d >= remaining) {
            return Ok(false);
        }
        self.expanded += 1;
        path.insert(key.clone());
        let won = match s.turn {
            Mover::Opponent => self.opponent_node(s, remaining, depth, path)?.then_some(None),
            Mover::Player => self.player_node(s, remaining, depth, path)?.map(Some),
        };
        path.remove(&key);
        match won {
            Some(m) => {
                self.wins.insert(key, m.map(|m| r.to_key_move(&m)));
                Ok(true)
            }
            None => {
                let d = self.fails.entry(key).or_insert(0);
                *d = (*d).max(remaining);
                Ok(false)
            }
        }
    }

    fn opponent_node(&mut self, s: &GameState, remaining: usize, depth: usize, path: &mut HashSet<StateKey>) -> Result<bool, GameError> {
        for LegalMove { mv, loses } in self.engine.opponent_moves(s, AckChoice::FreshOnly)? {
            if loses {
                continue;
            }
            let (next, _) = self.engine.apply_move(s, &mv)?;
            if !self.node(&next, remaining - 1, depth + 1, path)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn player_node(&mut self, s: &GameState, remaining: usize, depth: usize, path: &mut HashSet<StateKey>) -> Result<Option<Move>, GameError> {
        let moves = order_player_moves(self.engine, s, self.engine.legal_moves_player(s)?);
        for mv in moves.into_iter().take(self.width) {
            let (next, _) = self.engine.apply_move(s, &mv)?;
            if self.node(&next, remaining - 1, depth + 1, path)? {
                return Ok(Some(mv));
            }
        }
        Ok(None)
    }

    fn certificate(&self) -> Certificate {
        let mut cert = Certificate::new(Mover::Player);
        for (k, m) in &self.wins {
            if let Some(m) = m {
                cert.moves.insert(k.clone(), m.clone());
            }
        }
        cert
    }
}

/// Co-inductive search for an opponent trap over the full pool policy.
struct Refuter<'a> {
    engine: &'a Engine,
    max_states: usize,
    max_depth: usize,
    /// Positions proved to be in a trap without assumptions.
    trapped: HashSet<StateKey>,
    /// Positions from which the player was shown to escape.
    escapes: HashSet<StateKey>,
    choices: HashMap<StateKey, Move>,
    expanded: usize,
    depth_seen: usize,
    limit_hit: bool,
}

/// Result of a trap search below one position: `None` when the player
/// escapes, otherwise the shallowest path position the proof assumed.
type TrapResult = Option<usize>;

impl<'a> Refuter<'a> {
    fn new(engine: &'a Engine, max_states: usize, max_depth: usize) -> Self {
        Refuter {
            engine,
            max_states,
            max_depth,
            trapped: HashSet::new(),
            escapes: HashSet::new(),
            choices: HashMap::new(),
            expanded: 0,
            depth_seen: 0,
            limit_hit: false,
        }
    }

    fn node(&mut self, s: &GameState, path: &mut Vec<StateKey>) -> Result<TrapResult, GameError> {
        if s.outcome.player_won() {
            return Ok(None);
        }
        let depth = path.len();
        self.depth_seen = self.depth_seen.max(depth);
        let r = Renaming::of(s);
        let key = r.key(s);
        if self.trapped.contains(&key) {
            return Ok(Some(usize::MAX));
        }
        if self.escapes.contains(&key) {
            return Ok(None);
        }
        if let Some(i) = path.iter().position(|k| *k == key) {
            return Ok(Some(i));
        }
        if depth >= self.max_depth || self.expanded >= self.max_states {
            self.limit_hit = true;
            return Ok(None);
        }
        self.expanded += 1;
        path.push(key.clone());
        let result = match s.turn {
            Mover::Opponent => self.opponent_node(s, &r, &key, path)?,
            Mover::Player => self.player_node(s, path)?,
        };
        path.pop();
        match result {
            Some(low) if low >= depth => {
                self.trapped.insert(key);
                Ok(Some(usize::MAX))
            }
            Some(low) => Ok(Some(low)),
            None => {
                if !self.limit_hit {
                    self.escapes.insert(key);
                }
                Ok(None)
            }
        }
    }

    fn opponent_node(&mut self, s: &GameState, r: &Renaming, key: &StateKey, path: &mut Vec<StateKey>) -> Result<TrapResult, GameError> {
        let mut options = Vec::new();
        for LegalMove { mv, loses } in self.engine.opponent_moves(s, AckChoice::Pool)? {
            if loses {
                continue;
            }
            let (next, _) = self.engine.apply_move(s, &mv)?;
            let next_key = canonical_state(&next);
            let on_path = path.contains(&next_key) || self.trapped.contains(&next_key);
            let closable = !next.common_atoms().is_empty();
            let fresh = mv.values.iter().any(|v| matches!(v, Value::Const(c) if !s.pool.contains(c)));
            options.push(((!on_path, closable, fresh), mv, next));
        }
        options.sort_by(|a, b| a.0.cmp(&b.0));
        for (_, mv, next) in options {
            if let Some(low) = self.node(&next, path)? {
                self.choices.insert(key.clone(), r.to_key_move(&mv));
                return Ok(Some(low));
            }
        }
        Ok(None)
    }

    fn player_node(&mut self, s: &GameState, path: &mut Vec<StateKey>) -> Result<TrapResult, GameError> {
        let mut low = usize::MAX;
        let moves = order_player_moves(self.engine, s, self.engine.legal_moves_player(s)?);
        for mv in moves {
            let (next, _) = self.engine.apply_move(s, &mv)?;
            match self.node(&next, path)? {
                Some(l) => low = low.min(l),
                None => return Ok(None),
            }
        }
        Ok(Some(low))
    }
}

fn with_policy(engine: &Engine, lim: &SearchLimits) -> Engine {
    Engine::new(std::sync::Arc::new(engine.signature().clone()), lim.policy())
}

/// Solves the game of a closed normal formula within the limits.
pub fn solve(engine: &Engine, f: &Formula, lim: &SearchLimits) -> Result<Verdict, GameError> {
    let e = with_policy(engine, lim);
    let s = e.init(f)?;
    solve_state(&e, &s, lim)
}

/// Solves the game from an arbitrary position.
///
/// Narrow searches that follow the move ranking come first, then the trap
/// search, then a search over every player move. Each phase has its own
/// share of the state budget.
pub fn solve_state(engine: &Engine, s: &GameState, lim: &SearchLimits) -> Result<Verdict, GameError> {
    let share = (lim.max_states / 8).max(1);
    let mut prover = Prover::new(engine, share);
    let mut proved = prover.prove_narrow(s, lim.max_depth, 1)?;
    let mut stats = SearchStats::default();
    if !proved {
        let mut refuter = Refuter::new(engine, 2 * share, lim.max_depth);
        let trapped = refuter.node(s, &mut Vec::new())?.is_some();
        stats.states += refuter.expanded;
        stats.depth = refuter.depth_seen;
        if trapped {
            stats.states += prover.expanded;
            stats.depth = stats.depth.max(prover.depth_seen);
            let mut certificate = Certificate::new(Mover::Opponent);
            certificate.moves = refuter.choices;
            return Ok(Verdict::Invalid { certificate, stats });
        }
        stats.limit_hit = refuter.limit_hit;
        for width in 2..=3 {
            prover.max_states = prover.expanded + share;
            if prover.prove_narrow(s, lim.max_depth, width)? {
                proved = true;
                break;
            }
        }
        if !proved {
            prover.max_states = lim.max_states.saturating_sub(stats.states);
            proved = prover.prove(s, lim.max_depth)?;
            stats.limit_hit |= prover.limit_hit;
        }
    }
    stats.states += prover.expanded;
    stats.depth = stats.depth.max(prover.depth_seen);
    if proved {
        stats.limit_hit = false;
        return Ok(Verdict::Valid { certificate: prover.certificate(), stats });
    }
    Ok(Verdict::Unknown { stats })
}

/// Solves the subgames where the opponent's first move picks each of the
/// given integers for the integer coordinates of the root prefix.
pub fn check_omega_instances(
    engine: &Engine,
    f: &Formula,
    n_values: &[u64],
    lim: &SearchLimits,
) -> Result<Vec<(u64, Verdict)>, GameError> {
    let e = with_policy(engine, lim);
    let s = e.init(f)?;
    let nf = NormalFormula::from_formula(&s.root).expect("normal root");
    let mut out = Vec::new();
    for &n in n_values {
        let mut taken = Vec::new();
        let values = nf
            .prefix
            .iter()
            .map(|b| match b.sort {
                crate::formula::Sort::Int => Value::Nat(n),
                crate::formula::Sort::Ack => {
                    let c = fresh_constant(&s.pool, &taken);
                    taken.push(c.clone());
                    Value::Const(c)
                }
            })
            .collect();
        let (next, _) = e.apply_move(&s, &Move::new(Mover::Opponent, s.root.clone(), values))?;
        out.push((n, solve_state(&e, &next, lim)?));
    }
    Ok(out)
}

/// A closing move: a formula without non-guard premises whose conclusion
/// is in `A`.
pub fn closing_move(engine: &Engine, s: &GameState) -> Result<Option<Move>, GameError> {
    Ok(engine.legal_moves_player(s)?.into_iter().find(|m| {
        NormalFormula::from_formula(&m.formula)
            .map(|nf| nf.premises.iter().all(|p| matches!(p, Premise::Equation(..))))
            .unwrap_or(false)
    }))
}

/// Limits used by the greedy player's look-ahead.
pub const GREEDY_LIMITS: SearchLimits = SearchLimits { max_states: 20_000, max_depth: 48, int_bound: 3, fresh_bound: 4 };

/// Player move that closes the session as soon as possible.
pub fn greedy_player(engine: &Engine, s: &GameState) -> Result<Move, GameError> {
    if let Some(m) = closing_move(engine, s)? {
        return Ok(m);
    }
    let mut prover = Prover::new(engine, GREEDY_LIMITS.max_states / 4);
    let mut won = prover.prove_narrow(s, GREEDY_LIMITS.max_depth, 1)?;
    if !won {
        // a lost position is not worth a full search
        let mut refuter = Refuter::new(engine, GREEDY_LIMITS.max_states / 4, GREEDY_LIMITS.max_depth);
        if refuter.node(s, &mut Vec::new())?.is_some() {
            let moves = order_player_moves(engine, s, engine.legal_moves_player(s)?);
            return Ok(moves.into_iter().next().expect("the root negation is always playable"));
        }
        prover.max_states = GREEDY_LIMITS.max_states;
        won = prover.prove(s, GREEDY_LIMITS.max_depth)?;
    }
    if won {
        let r = Renaming::of(s);
        if let Some(Some(m)) = prover.wins.get(&r.key(s)) {
            if let Some(m) = r.from_key_move(s, m) {
                return Ok(m);
            }
        }
    }
    let moves = order_player_moves(engine, s, engine.legal_moves_player(s)?);
    Ok(moves.into_iter().next().expect("the root negation is always playable"))
}

/// The greedy player as a strategy.
#[derive(Debug, Clone, Default)]
pub struct Greedy;

impl Strategy for Greedy {
    fn choose(&mut self, engine: &Engine, state: &GameState) -> Result<Move, String> {
        greedy_player(engine, state).map_err(|e| e.to_string())
    }
}

/// Follows a certificate; positions it does not cover are solved on the
/// spot, and failing that a default move is played.
#[derive(Debug, Clone)]
pub struct CertificateStrategy {
    pub certificate: Certificate,
    pub limits: SearchLimits,
}

impl CertificateStrategy {
    pub fn new(certificate: Certificate) -> Self {
        CertificateStrategy { certificate, limits: GREEDY_LIMITS }
    }
}

impl Strategy for CertificateStrategy {
    fn choose(&mut self, engine: &Engine, state: &GameState) -> Result<Move, String> {
        if let Some(m) = self.certificate.lookup(state) {
            return Ok(m);
        }
        let err = |e: GameError| e.to_string();
        match state.turn {
            Mover::Player => greedy_player(engine, state).map_err(err),
            Mover::Opponent => {
                if let Verdict::Invalid { certificate, .. } = solve_state(engine, state, &self.limits).map_err(err)? {
                    if let Some(m) = certificate.lookup(state) {
                        self.certificate.moves.extend(certificate.moves);
                        return Ok(m);
                    }
                }
                let moves = engine.legal_moves_opponent(state).map_err(err)?;
                let pick = moves.iter().find(|m| !m.loses).or(moves.first()).ok_or("no legal move")?;
                Ok(pick.mv.clone())
            }
        }
    }
}

/// Asks an external chooser, e.g. a user at a prompt.
pub struct Interactive<F>(pub F);

impl<F> Strategy for Interactive<F>
where
    F: FnMut(&GameState, &[Move]) -> Option<Move>,
{
    fn choose(&mut self, engine: &Engine, state: &GameState) -> Result<Move, String> {
        let moves = match state.turn {
            Mover::Player => engine.legal_moves_player(state),
            Mover::Opponent => engine.legal_moves_opponent(state).map(|ms| ms.into_iter().map(|m| m.mv).collect()),
        }
        .map_err(|e| e.to_string())?;
        (self.0)(state, &moves).ok_or_else(|| "no move chosen".to_string())
    }
}

/// Checks a player certificate against every opponent reply of the pool
/// policy, reused constants included. The certificate only covers fresh
/// replies, so the check plays it in a mirror game where every opponent
/// constant is fresh and maps the mirror moves back: identifying constants
/// keeps player moves legal and wins won.
pub fn verify_player_certificate(engine: &Engine, f: &Formula, cert: &Certificate, max_depth: usize) -> Result<bool, GameError> {
    let s = engine.init(f)?;
    Mirror { engine, cert }.go(&s, &s, &HashMap::new(), max_depth)
}

struct Mirror<'a> {
    engine: &'a Engine,
    cert: &'a Certificate,
}

impl Mirror<'_> {
    /// `sigma` maps mirror constants to real ones.
    fn go(&self, real: &GameState, mirror: &GameState, sigma: &HashMap<String, String>, left: usize) -> Result<bool, GameError> {
        if real.outcome.player_won() {
            return Ok(true);
        }
        if left == 0 || real.outcome.is_over() {
            return Ok(false);
        }
        let map = |f: &Formula| f.map_constants(&|c: &str| sigma.get(c).cloned().unwrap_or_else(|| c.to_string()));
        match real.turn {
            Mover::Player => {
                let Some(m) = self.cert.lookup(mirror) else { return Ok(false) };
                let mut sigma = sigma.clone();
                let mut taken = Vec::new();
                let values = m
                    .values
                    .iter()
                    .map(|v| match v {
                        Value::Const(c) => Value::Const(
                            sigma
                                .entry(c.clone())
                                .or_insert_with(|| {
                                    let name = fresh_constant(&real.pool, &taken);
                                    taken.push(name.clone());
                                    name
                                })
                                .clone(),
                        ),
                        n => n.clone(),
                    })
                    .collect();
                let Some(formula) = find_alpha(&real.u, &map(&m.formula)).cloned() else { return Ok(false) };
                let Ok((real_next, _)) = self.engine.apply_move(real, &Move::new(Mover::Player, formula, values)) else {
                    return Ok(false);
                };
                let (mirror_next, _) = self.engine.apply_move(mirror, &m)?;
                self.go(&real_next, &mirror_next, &sigma, left - 1)
            }
            Mover::Opponent => {
                for LegalMove { mv, loses } in self.engine.opponent_moves(real, AckChoice::Pool)? {
                    if loses {
                        continue;
                    }
                    let Some(member) = mirror.v.iter().find(|v| crate::formula::alpha_equal(&map(v), &mv.formula)) else {
                        return Ok(false);
                    };
                    let mut sigma = sigma.clone();
                    let mut taken = Vec::new();
                    let values = mv
                        .values
                        .iter()
                        .map(|v| match v {
                            Value::Const(c) => {
                                let name = fresh_constant(&mirror.pool, &taken);
                                taken.push(name.clone());
                                sigma.insert(name.clone(), c.clone());
                                Value::Const(name)
                            }
                            n => n.clone(),
                        })
                        .collect();
                    let (real_next, _) = self.engine.apply_move(real, &mv)?;
                    let (mirror_next, _) = self.engine.apply_move(mirror, &Move::new(Mover::Opponent, member.clone(), values))?;
                    if !self.go(&real_next, &mirror_next, &sigma, left - 1)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
}

/// Checks an opponent certificate: following it, no sequence of player
/// moves reaches a player win. Explores at most `max_states` positions.
pub fn verify_opponent_certificate(engine: &Engine, f: &Formula, cert: &Certificate, max_states: usize) -> Result<bool, GameError> {
    let s = engine.init(f)?;
    let mut seen = HashSet::new();
    let mut stack = vec![s];
    while let Some(s) = stack.pop() {
        if s.outcome.player_won() {
            return Ok(false);
        }
        if !seen.insert(canonical_state(&s)) {
            continue;
        }
        if seen.len() > max_states {
            return Ok(false);
        }
        match s.turn {
            Mover::Opponent => {
                let Some(m) = cert.lookup(&s) else { return Ok(false) };
                stack.push(engine.apply_move(&s, &m)?.0);
            }
            Mover::Player => {
                for m in engine.legal_moves_player(&s)? {
                    stack.push(engine.apply_move(&s, &m)?.0);
                }
            }
        }
    }
    Ok(true)
}
