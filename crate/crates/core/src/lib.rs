//! Predicate-calculus formulas read as network protocols.
//!
//! A closed formula in normal form defines a two-player game between a
//! sender (the opponent) and a receiver (the player). Plays of the game are
//! communication sessions; a formula is valid when the receiver has a
//! winning strategy.

pub mod compose;
pub mod formula;
pub mod game;
pub mod netsim;

pub mod normal;
pub mod syntax;
pub mod validity;

pub use compose::{compose, final_occurrences};
pub use formula::{
    alpha_equal, evaluate_term, expand_sugar, free_vars, make_ack_chain, occurrences, substitute,
    AtomicOccurrence, CoreError, Formula, Sign, Signature, Sort, SurfaceFormula, Term,
};
pub use game::{Engine, GameError, GameState, Move, Mover, Outcome, PoolPolicy, Transcript, Value};
pub use netsim::{annotate, preview, sender_choice, simulate, EventKind, LossModel, NetEvent, SessionTrace};
pub use normal::{is_normal, normalize, NormalFormula, Premise};
pub use syntax::{parse_formula, parse_program, parse_signature, print_formula, print_surface, Program};
pub use validity::{solve, SearchLimits, Verdict};
