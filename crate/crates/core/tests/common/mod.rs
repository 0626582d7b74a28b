#![allow(dead_code)]

use std::sync::Arc;

use protogame::game::{Engine, Pick, PoolPolicy, ScriptStep, Scripted, Transcript, Value};
use protogame::syntax::SourceText;
use protogame::{expand_sugar, normalize, parse_program, Formula, Program, Term};

pub const CORPUS: &str = include_str!("../../corpus/examples.lp");

pub fn corpus() -> Program {
    parse_program(&SourceText::new(CORPUS, "examples.lp")).expect("corpus parses")
}

/// Normal form of a named corpus formula.
pub fn root(prog: &Program, name: &str) -> Formula {
    let f = prog.get(name).unwrap_or_else(|| panic!("no formula {name}"));
    normalize(&expand_sugar(f, &prog.signature).unwrap()).to_formula()
}

pub fn engine(prog: &Program) -> Engine {
    Engine::new(Arc::new(prog.signature.clone()), PoolPolicy::default())
}

pub fn text(f: &Formula) -> String {
    protogame::print_formula(f)
}

pub fn texts(fs: &[Formula]) -> Vec<String> {
    fs.iter().map(text).collect()
}

pub fn c(name: &str) -> Value {
    Value::constant(name)
}

pub fn step(pick: Pick, values: Vec<Value>) -> ScriptStep {
    ScriptStep::new(pick, values)
}

pub fn atom(p: &str, args: Vec<Term>) -> Formula {
    Formula::atom(p, args)
}

pub fn play(e: &Engine, f: &Formula, player: Vec<ScriptStep>, opponent: Vec<ScriptStep>) -> Transcript {
    e.run_play(f, &mut Scripted::new(player), &mut Scripted::new(opponent), 100).expect("legal script")
}
