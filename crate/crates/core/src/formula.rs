//! Two-sorted formulas and terms.
//!
//! Formulas use only implication, falsum, the universal quantifier and
//! equality guards on integer terms. Everything else (negation, the binary
//! connectives, the existential quantifier) lives in [`SurfaceFormula`] and is
//! expanded into the core constructors by [`expand_sugar`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normal::is_normal;

/// Default number of function applications allowed per term evaluation.
pub const DEFAULT_EVAL_BUDGET: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    /// Acknowledgement sort: header fields, only variables and constants.
    Ack,
    /// Integer sort: built from `0`, `s` and registered functions.
    Int,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Ack => f.write_str("ack"),
            Sort::Int => f.write_str("int"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("name `{0}` is already declared")]
    DuplicateName(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{name}` expects {expected} argument(s), got {found}")]
    ArityMismatch { name: String, expected: usize, found: usize },
    #[error("sort mismatch at {path:?}: {detail}")]
    SortMismatch { path: Vec<usize>, detail: String },
    #[error("term contains free variable `{0}`")]
    FreeVariable(String),
    #[error("evaluation budget of {0} steps exceeded")]
    EvalBudget(u64),
    #[error("function `{0}` is undefined on its arguments")]
    EvalUndefined(String),
    #[error("formula is not in normal form")]
    NotNormal,
    #[error("an ack-chain needs at least one predicate")]
    EmptyChain,
}

/// The built-in integer functions available to signature files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Builtin {
    Zero,
    Succ,
    Add,
    Mul,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Builtin> {
        match name {
            "zero" => Some(Builtin::Zero),
            "succ" => Some(Builtin::Succ),
            "add" => Some(Builtin::Add),
            "mul" => Some(Builtin::Mul),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Zero => "zero",
            Builtin::Succ => "succ",
            Builtin::Add => "add",
            Builtin::Mul => "mul",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Zero => 0,
            Builtin::Succ => 1,
            Builtin::Add | Builtin::Mul => 2,
        }
    }

    fn apply(self, args: &[u64]) -> Option<u64> {
        match self {
            Builtin::Zero => Some(0),
            Builtin::Succ => args[0].checked_add(1),
            Builtin::Add => args[0].checked_add(args[1]),
            Builtin::Mul => args[0].checked_mul(args[1]),
        }
    }
}

/// A total function on naturals. Returning `None` signals overflow.
pub type Evaluator = Arc<dyn Fn(&[u64]) -> Option<u64> + Send + Sync>;

#[derive(Clone)]
pub struct FunctionDef {
    pub arity: usize,
    pub builtin: Option<Builtin>,
    eval: Evaluator,
}

impl fmt::Debug for FunctionDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionDef")
            .field("arity", &self.arity)
            .field("builtin", &self.builtin)
            .finish()
    }
}

/// Predicate, function and constant declarations.
///
/// Names are unique across the three categories. The function table always
/// holds `0` and the successor `s`.
#[derive(Clone, Debug)]
pub struct Signature {
    predicates: BTreeMap<String, Vec<Sort>>,
    functions: BTreeMap<String, FunctionDef>,
    constants: BTreeSet<String>,
    eval_budget: u64,
}

impl Default for Signature {
    fn default() -> Self {
        Self::new()
    }
}

impl Signature {
    pub fn new() -> Self {
        let mut sig = Signature {
            predicates: BTreeMap::new(),
            functions: BTreeMap::new(),
            constants: BTreeSet::new(),
            eval_budget: DEFAULT_EVAL_BUDGET,
        };
        sig.insert_builtin("0", Builtin::Zero);
        sig.insert_builtin("s", Builtin::Succ);
        sig
    }

    fn insert_builtin(&mut self, name: &str, b: Builtin) {
        self.functions.insert(
            name.to_string(),
            FunctionDef { arity: b.arity(), builtin: Some(b), eval: Arc::new(move |a| b.apply(a)) },
        );
    }

    pub fn with_eval_budget(mut self, budget: u64) -> Self {
        self.eval_budget = budget;
        self
    }

    pub fn eval_budget(&self) -> u64 {
        self.eval_budget
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.predicates.contains_key(name)
            || self.functions.contains_key(name)
            || self.constants.contains(name)
    }

    fn check_fresh(&self, name: &str) -> Result<(), CoreError> {
        if self.is_declared(name) {
            Err(CoreError::DuplicateName(name.to_string()))
        } else {
            Ok(())
        }
    }

    pub fn declare_predicate(&mut self, name: &str, sorts: Vec<Sort>) -> Result<(), CoreError> {
        self.check_fresh(name)?;
        self.predicates.insert(name.to_string(), sorts);
        Ok(())
    }

    pub fn declare_builtin(&mut self, name: &str, builtin: Builtin) -> Result<(), CoreError> {
        self.check_fresh(name)?;
        self.insert_builtin(name, builtin);
        Ok(())
    }

    /// Registers a user-supplied total function.
    pub fn register_function<F>(&mut self, name: &str, arity: usize, f: F) -> Result<(), CoreError>
    where
        F: Fn(&[u64]) -> Option<u64> + Send + Sync + 'static,
    {
        self.check_fresh(name)?;
        self.functions
            .insert(name.to_string(), FunctionDef { arity, builtin: None, eval: Arc::new(f) });
        Ok(())
    }

    pub fn declare_constant(&mut self, name: &str) -> Result<(), CoreError> {
        self.check_fresh(name)?;
        self.constants.insert(name.to_string());
        Ok(())
    }

    pub fn predicate(&self, name: &str) -> Option<&[Sort]> {
        self.predicates.get(name).map(Vec::as_slice)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.get(name)
    }

    pub fn is_constant(&self, name: &str) -> bool {
        self.constants.contains(name)
    }

    pub fn predicates(&self) -> impl Iterator<Item = (&str, &[Sort])> {
        self.predicates.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn functions(&self) -> impl Iterator<Item = (&str, &FunctionDef)> {
        self.functions.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn constants(&self) -> impl Iterator<Item = &str> {
        self.constants.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    AckVar(String),
    AckConst(String),
    IntVar(String),
    /// An evaluated integer literal.
    Nat(u64),
    App(String, Vec<Term>),
}

impl Term {
    pub fn ack_var(name: &str) -> Term {
        Term::AckVar(name.to_string())
    }

    pub fn constant(name: &str) -> Term {
        Term::AckConst(name.to_string())
    }

    pub fn int_var(name: &str) -> Term {
        Term::IntVar(name.to_string())
    }

    pub fn app(name: &str, args: Vec<Term>) -> Term {
        Term::App(name.to_string(), args)
    }

    pub fn succ(t: Term) -> Term {
        Term::App("s".to_string(), vec![t])
    }

    pub fn sort(&self) -> Sort {
        match self {
            Term::AckVar(_) | Term::AckConst(_) => Sort::Ack,
            Term::IntVar(_) | Term::Nat(_) | Term::App(..) => Sort::Int,
        }
    }

    pub fn is_closed(&self) -> bool {
        match self {
            Term::AckVar(_) | Term::IntVar(_) => false,
            Term::AckConst(_) | Term::Nat(_) => true,
            Term::App(_, args) => args.iter().all(Term::is_closed),
        }
    }

    fn collect_vars(&self, out: &mut Vec<(String, Sort)>) {
        match self {
            Term::AckVar(n) => out.push((n.clone(), Sort::Ack)),
            Term::IntVar(n) => out.push((n.clone(), Sort::Int)),
            Term::AckConst(_) | Term::Nat(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub(crate) fn var_name(&self) -> Option<&str> {
        match self {
            Term::AckVar(n) | Term::IntVar(n) => Some(n),
            _ => None,
        }
    }

    fn map_vars(&self, f: &mut impl FnMut(&str, Sort) -> Option<Term>) -> Term {
        match self {
            Term::AckVar(n) => f(n, Sort::Ack).unwrap_or_else(|| self.clone()),
            Term::IntVar(n) => f(n, Sort::Int).unwrap_or_else(|| self.clone()),
            Term::AckConst(_) | Term::Nat(_) => self.clone(),
            Term::App(g, args) => Term::App(g.clone(), args.iter().map(|a| a.map_vars(f)).collect()),
        }
    }

    /// Applies `f` to every ack constant.
    pub fn map_constants(&self, f: &impl Fn(&str) -> String) -> Term {
        match self {
            Term::AckConst(c) => Term::AckConst(f(c)),
            Term::App(g, args) => Term::App(g.clone(), args.iter().map(|a| a.map_constants(f)).collect()),
            _ => self.clone(),
        }
    }

    fn eval_closed(&self, sig: &Signature) -> Result<Term, CoreError> {
        match self {
            Term::App(..) if self.is_closed() => Ok(Term::Nat(evaluate_term(self, sig)?)),
            Term::App(g, args) => Ok(Term::App(
                g.clone(),
                args.iter().map(|a| a.eval_closed(sig)).collect::<Result<_, _>>()?,
            )),
            _ => Ok(self.clone()),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::AckVar(n) | Term::AckConst(n) | Term::IntVar(n) => f.write_str(n),
            Term::Nat(k) => write!(f, "{k}"),
            Term::App(g, args) if args.is_empty() => f.write_str(g),
            Term::App(g, args) => {
                write!(f, "{g}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Evaluates a closed integer term bottom-up through the function table.
pub fn evaluate_term(t: &Term, sig: &Signature) -> Result<u64, CoreError> {
    let mut steps = 0u64;
    eval_inner(t, sig, &mut steps)
}

fn eval_inner(t: &Term, sig: &Signature, steps: &mut u64) -> Result<u64, CoreError> {
    match t {
        Term::Nat(k) => Ok(*k),
        Term::AckVar(n) | Term::IntVar(n) => Err(CoreError::FreeVariable(n.clone())),
        Term::AckConst(c) => Err(CoreError::SortMismatch {
            path: vec![],
            detail: format!("ack constant `{c}` in integer position"),
        }),
        Term::App(g, args) => {
            let def = sig.function(g).ok_or_else(|| CoreError::UnknownFunction(g.clone()))?;
            if def.arity != args.len() {
                return Err(CoreError::ArityMismatch {
                    name: g.clone(),
                    expected: def.arity,
                    found: args.len(),
                });
            }
            let vals = args.iter().map(|a| eval_inner(a, sig, steps)).collect::<Result<Vec<_>, _>>()?;
            *steps += 1;
            if *steps > sig.eval_budget {
                return Err(CoreError::EvalBudget(sig.eval_budget));
            }
            (def.eval)(&vals).ok_or_else(|| CoreError::EvalUndefined(g.clone()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Binder {
    pub name: String,
    pub sort: Sort,
}

impl Binder {
    pub fn new(name: &str, sort: Sort) -> Binder {
        Binder { name: name.to_string(), sort }
    }

    pub(crate) fn var_term(&self) -> Term {
        match self.sort {
            Sort::Ack => Term::AckVar(self.name.clone()),
            Sort::Int => Term::IntVar(self.name.clone()),
        }
    }
}

/// Core formula syntax.
///
/// `Guard(t, u, body)` stands for `t = u -> body`; a bare equation is not a
/// formula.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Formula {
    Falsum,
    Atom(String, Vec<Term>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(Binder, Box<Formula>),
    Guard(Term, Term, Box<Formula>),
}

impl Formula {
    pub fn atom(pred: &str, args: Vec<Term>) -> Formula {
        Formula::Atom(pred.to_string(), args)
    }

    pub fn prop(pred: &str) -> Formula {
        Formula::Atom(pred.to_string(), vec![])
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    /// `A1, ..., An -> B`.
    pub fn chain(premises: Vec<Formula>, conclusion: Formula) -> Formula {
        premises.into_iter().rev().fold(conclusion, |acc, p| Formula::implies(p, acc))
    }

    pub fn forall(name: &str, sort: Sort, body: Formula) -> Formula {
        Formula::Forall(Binder::new(name, sort), Box::new(body))
    }

    pub fn guard(t: Term, u: Term, body: Formula) -> Formula {
        Formula::Guard(t, u, Box::new(body))
    }

    pub fn not(f: Formula) -> Formula {
        Formula::implies(f, Formula::Falsum)
    }

    /// `exists x. f`, i.e. `forall x. (f -> false) -> false`.
    pub fn exists(name: &str, sort: Sort, f: Formula) -> Formula {
        Formula::not(Formula::forall(name, sort, Formula::not(f)))
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Formula::Falsum | Formula::Atom(..))
    }

    pub fn is_closed(&self) -> bool {
        free_vars(self).is_empty()
    }

    /// Every variable name occurring in the formula, bound or free.
    pub fn var_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| match f {
            Formula::Atom(_, args) => args.iter().for_each(|t| collect_term_names(t, &mut out)),
            Formula::Forall(b, _) => {
                out.insert(b.name.clone());
            }
            Formula::Guard(t, u, _) => {
                collect_term_names(t, &mut out);
                collect_term_names(u, &mut out);
            }
            _ => {}
        });
        out
    }

    /// Ack constants in order of first appearance, without repetition.
    pub fn constants(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |t: &Term| collect_constants(t, &mut out);
        self.walk(&mut |f| match f {
            Formula::Atom(_, args) => args.iter().for_each(&mut push),
            Formula::Guard(t, u, _) => {
                push(t);
                push(u);
            }
            _ => {}
        });
        out
    }

    /// Integer literals occurring anywhere in the formula.
    pub fn naturals(&self) -> BTreeSet<u64> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| match f {
            Formula::Atom(_, args) => args.iter().for_each(|t| collect_nats(t, &mut out)),
            Formula::Guard(t, u, _) => {
                collect_nats(t, &mut out);
                collect_nats(u, &mut out);
            }
            _ => {}
        });
        out
    }

    fn walk(&self, visit: &mut impl FnMut(&Formula)) {
        visit(self);
        match self {
            Formula::Falsum | Formula::Atom(..) => {}
            Formula::Implies(a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
            Formula::Forall(_, body) | Formula::Guard(_, _, body) => body.walk(visit),
        }
    }

    /// Applies `f` to every ack constant.
    pub fn map_constants(&self, f: &impl Fn(&str) -> String) -> Formula {
        match self {
            Formula::Falsum => Formula::Falsum,
            Formula::Atom(p, args) => {
                Formula::Atom(p.clone(), args.iter().map(|t| t.map_constants(f)).collect())
            }
            Formula::Implies(a, b) => Formula::implies(a.map_constants(f), b.map_constants(f)),
            Formula::Forall(b, body) => Formula::Forall(b.clone(), Box::new(body.map_constants(f))),
            Formula::Guard(t, u, body) => {
                Formula::guard(t.map_constants(f), u.map_constants(f), body.map_constants(f))
            }
        }
    }

    /// Replaces closed integer subterms by their values.
    pub fn eval_closed_terms(&self, sig: &Signature) -> Result<Formula, CoreError> {
        Ok(match self {
            Formula::Falsum => Formula::Falsum,
            Formula::Atom(p, args) => Formula::Atom(
                p.clone(),
                args.iter().map(|t| t.eval_closed(sig)).collect::<Result<_, _>>()?,
            ),
            Formula::Implies(a, b) => Formula::implies(a.eval_closed_terms(sig)?, b.eval_closed_terms(sig)?),
            Formula::Forall(b, body) => Formula::Forall(b.clone(), Box::new(body.eval_closed_terms(sig)?)),
            Formula::Guard(t, u, body) => {
                Formula::guard(t.eval_closed(sig)?, u.eval_closed(sig)?, body.eval_closed_terms(sig)?)
            }
        })
    }

    /// Canonical nameless form: every binder is renamed after its depth.
    ///
    /// Two formulas are alpha-equivalent iff their canonical forms are equal.
    /// Free variable names are kept, so they must not start with `%`.
    pub fn canonical(&self) -> Formula {
        fn go(f: &Formula, env: &mut Vec<(String, String)>) -> Formula {
            let rename = |n: &str, env: &Vec<(String, String)>| {
                env.iter().rev().find(|(from, _)| from == n).map(|(_, to)| to.clone())
            };
            let map_term = |t: &Term, env: &Vec<(String, String)>| {
                t.map_vars(&mut |n, sort| {
                    rename(n, env).map(|to| match sort {
                        Sort::Ack => Term::AckVar(to),
                        Sort::Int => Term::IntVar(to),
                    })
                })
            };
            match f {
                Formula::Falsum => Formula::Falsum,
                Formula::Atom(p, args) => {
                    Formula::Atom(p.clone(), args.iter().map(|t| map_term(t, env)).collect())
                }
                Formula::Implies(a, b) => Formula::implies(go(a, env), go(b, env)),
                Formula::Forall(b, body) => {
                    let level = format!("%{}", env.len());
                    env.push((b.name.clone(), level.clone()));
                    let body = go(body, env);
                    env.pop();
                    Formula::Forall(Binder { name: level, sort: b.sort }, Box::new(body))
                }
                Formula::Guard(t, u, body) => {
                    Formula::guard(map_term(t, env), map_term(u, env), go(body, env))
                }
            }
        }
        go(self, &mut Vec::new())
    }

    /// Renames every bound variable to a name outside `avoid`, updating
    /// `avoid` with the names it picks.
    pub fn rename_bound_apart(&self, avoid: &mut BTreeSet<String>) -> Formula {
        match self {
            Formula::Falsum | Formula::Atom(..) => self.clone(),
            Formula::Implies(a, b) => {
                Formula::implies(a.rename_bound_apart(avoid), b.rename_bound_apart(avoid))
            }
            Formula::Forall(b, body) => {
                let fresh = fresh_name(b.sort, avoid);
                avoid.insert(fresh.clone());
                let renamed = rename_free(body, &b.name, &fresh, b.sort);
                Formula::forall(&fresh, b.sort, renamed.rename_bound_apart(avoid))
            }
            Formula::Guard(t, u, body) => Formula::guard(t.clone(), u.clone(), body.rename_bound_apart(avoid)),
        }
    }
}

fn collect_term_names(t: &Term, out: &mut BTreeSet<String>) {
    let mut v = Vec::new();
    t.collect_vars(&mut v);
    out.extend(v.into_iter().map(|(n, _)| n));
}

fn collect_constants(t: &Term, out: &mut Vec<String>) {
    match t {
        Term::AckConst(c) if !out.contains(c) => out.push(c.clone()),
        Term::App(_, args) => args.iter().for_each(|a| collect_constants(a, out)),
        _ => {}
    }
}

fn collect_nats(t: &Term, out: &mut BTreeSet<u64>) {
    match t {
        Term::Nat(k) => {
            out.insert(*k);
        }
        Term::App(_, args) => args.iter().for_each(|a| collect_nats(a, out)),
        _ => {}
    }
}

/// Renames free occurrences of `from` (of the given sort) to `to`.
///
/// `to` must not be bound anywhere inside `f`.
pub(crate) fn rename_free(f: &Formula, from: &str, to: &str, sort: Sort) -> Formula {
    let mut binding = BTreeMap::new();
    binding.insert(from.to_string(), Binder::new(to, sort).var_term());
    subst_unchecked(f, &binding)
}

const ACK_NAMES: [&str; 3] = ["x", "y", "z"];
const INT_NAMES: [&str; 6] = ["i", "j", "k", "l", "m", "n"];

/// First name of the given sort's sequence (`x, y, z, x1, ...` or
/// `i, j, ..., n, i1, ...`) that is not in `avoid`.
pub fn fresh_name(sort: Sort, avoid: &BTreeSet<String>) -> String {
    let base: &[&str] = match sort {
        Sort::Ack => &ACK_NAMES,
        Sort::Int => &INT_NAMES,
    };
    (0..)
        .flat_map(|round: usize| {
            base.iter().map(move |b| if round == 0 { b.to_string() } else { format!("{b}{round}") })
        })
        .find(|n| !avoid.contains(n))
        .expect("name sequence is infinite")
}

/// Variables with at least one free occurrence.
pub fn free_vars(f: &Formula) -> BTreeSet<(String, Sort)> {
    fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<(String, Sort)>) {
        let mut add = |t: &Term, bound: &Vec<String>| {
            let mut v = Vec::new();
            t.collect_vars(&mut v);
            for (n, s) in v {
                if !bound.contains(&n) {
                    out.insert((n, s));
                }
            }
        };
        match f {
            Formula::Falsum => {}
            Formula::Atom(_, args) => args.iter().for_each(|t| add(t, bound)),
            Formula::Implies(a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
            Formula::Forall(b, body) => {
                bound.push(b.name.clone());
                go(body, bound, out);
                bound.pop();
            }
            Formula::Guard(t, u, body) => {
                add(t, bound);
                add(u, bound);
                go(body, bound, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(f, &mut Vec::new(), &mut out);
    out
}

/// Replaces free occurrences of the bound variables by closed terms.
pub fn substitute(f: &Formula, binding: &BTreeMap<String, Term>) -> Result<Formula, CoreError> {
    for t in binding.values() {
        if !t.is_closed() {
            let mut v = Vec::new();
            t.collect_vars(&mut v);
            return Err(CoreError::FreeVariable(v[0].0.clone()));
        }
    }
    check_subst_sorts(f, binding, &mut Vec::new())?;
    Ok(subst_unchecked(f, binding))
}

fn check_subst_sorts(
    f: &Formula,
    binding: &BTreeMap<String, Term>,
    path: &mut Vec<usize>,
) -> Result<(), CoreError> {
    let check_term = |t: &Term, path: &Vec<usize>| -> Result<(), CoreError> {
        let mut v = Vec::new();
        t.collect_vars(&mut v);
        for (n, s) in v {
            if let Some(val) = binding.get(&n) {
                if val.sort() != s {
                    return Err(CoreError::SortMismatch {
                        path: path.clone(),
                        detail: format!("`{n}` has sort {s} but is bound to {val} of sort {}", val.sort()),
                    });
                }
            }
        }
        Ok(())
    };
    match f {
        Formula::Falsum => Ok(()),
        Formula::Atom(_, args) => args.iter().try_for_each(|t| check_term(t, path)),
        Formula::Implies(a, b) => {
            path.push(0);
            check_subst_sorts(a, binding, path)?;
            path.pop();
            path.push(1);
            check_subst_sorts(b, binding, path)?;
            path.pop();
            Ok(())
        }
        Formula::Forall(b, body) => {
            if binding.contains_key(&b.name) {
                let mut inner = binding.clone();
                inner.remove(&b.name);
                path.push(0);
                let r = check_subst_sorts(body, &inner, path);
                path.pop();
                r
            } else {
                path.push(0);
                let r = check_subst_sorts(body, binding, path);
                path.pop();
                r
            }
        }
        Formula::Guard(t, u, body) => {
            check_term(t, path)?;
            check_term(u, path)?;
            path.push(0);
            let r = check_subst_sorts(body, binding, path);
            path.pop();
            r
        }
    }
}

pub(crate) fn subst_unchecked(f: &Formula, binding: &BTreeMap<String, Term>) -> Formula {
    if binding.is_empty() {
        return f.clone();
    }
    let map = |t: &Term| t.map_vars(&mut |n, _| binding.get(n).cloned());
    match f {
        Formula::Falsum => Formula::Falsum,
        Formula::Atom(p, args) => Formula::Atom(p.clone(), args.iter().map(map).collect()),
        Formula::Implies(a, b) => {
            Formula::implies(subst_unchecked(a, binding), subst_unchecked(b, binding))
        }
        Formula::Forall(b, body) => {
            if binding.contains_key(&b.name) {
                let mut inner = binding.clone();
                inner.remove(&b.name);
                Formula::Forall(b.clone(), Box::new(subst_unchecked(body, &inner)))
            } else {
                Formula::Forall(b.clone(), Box::new(subst_unchecked(body, binding)))
            }
        }
        Formula::Guard(t, u, body) => Formula::guard(map(t), map(u), subst_unchecked(body, binding)),
    }
}

/// Alpha-equivalence through the canonical nameless form.
pub fn alpha_equal(f: &Formula, g: &Formula) -> bool {
    f.canonical() == g.canonical()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

/// One place where an atomic formula appears inside a normal formula.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicOccurrence {
    /// Child indices from the root: `Implies` has children 0 and 1,
    /// `Forall` and `Guard` have their body at 0.
    pub path: Vec<usize>,
    pub atom: Formula,
    pub sign: Sign,
    /// Premise count of the enclosing `forall xs. (P1, ..., Pk -> A)`.
    pub hypothesis_count: usize,
}

impl AtomicOccurrence {
    /// Negative and without hypothesis: the end of a play.
    pub fn is_final(&self) -> bool {
        self.sign == Sign::Negative && self.hypothesis_count == 0
    }
}

/// Lists every atomic occurrence of a normal formula with its sign and
/// number of hypotheses.
pub fn occurrences(f: &Formula) -> Result<Vec<AtomicOccurrence>, CoreError> {
    if !is_normal(f) {
        return Err(CoreError::NotNormal);
    }
    let mut out = Vec::new();
    collect_occurrences(f, &mut Vec::new(), Sign::Positive, &mut out);
    Ok(out)
}

fn collect_occurrences(f: &Formula, path: &mut Vec<usize>, sign: Sign, out: &mut Vec<AtomicOccurrence>) {
    let depth = path.len();
    let mut cur = f;
    while let Formula::Forall(_, body) = cur {
        path.push(0);
        cur = body;
    }
    let mut hyps = 0;
    loop {
        match cur {
            Formula::Implies(p, rest) => {
                path.push(0);
                collect_occurrences(p, path, sign.flip(), out);
                path.pop();
                path.push(1);
                hyps += 1;
                cur = rest;
            }
            Formula::Guard(_, _, body) => {
                path.push(0);
                hyps += 1;
                cur = body;
            }
            _ => break,
        }
    }
    out.push(AtomicOccurrence { path: path.clone(), atom: cur.clone(), sign, hypothesis_count: hyps });
    path.truncate(depth);
}

/// Formula syntax extended with the derived connectives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurfaceFormula {
    Falsum,
    Atom(String, Vec<Term>),
    Implies(Box<SurfaceFormula>, Box<SurfaceFormula>),
    Forall(Binder, Box<SurfaceFormula>),
    Guard(Term, Term, Box<SurfaceFormula>),
    Not(Box<SurfaceFormula>),
    And(Box<SurfaceFormula>, Box<SurfaceFormula>),
    Or(Box<SurfaceFormula>, Box<SurfaceFormula>),
    Iff(Box<SurfaceFormula>, Box<SurfaceFormula>),
    Xor(Box<SurfaceFormula>, Box<SurfaceFormula>),
    Exists(Binder, Box<SurfaceFormula>),
}

impl From<&Formula> for SurfaceFormula {
    fn from(f: &Formula) -> Self {
        match f {
            Formula::Falsum => SurfaceFormula::Falsum,
            Formula::Atom(p, a) => SurfaceFormula::Atom(p.clone(), a.clone()),
            Formula::Implies(a, b) => {
                SurfaceFormula::Implies(Box::new(a.as_ref().into()), Box::new(b.as_ref().into()))
            }
            Formula::Forall(b, body) => SurfaceFormula::Forall(b.clone(), Box::new(body.as_ref().into())),
            Formula::Guard(t, u, body) => {
                SurfaceFormula::Guard(t.clone(), u.clone(), Box::new(body.as_ref().into()))
            }
        }
    }
}

impl SurfaceFormula {
    /// Checks atoms, function applications and guards against `sig`.
    pub fn check_sorts(&self, sig: &Signature) -> Result<(), CoreError> {
        self.check_at(sig, &mut Vec::new())
    }

    fn check_at(&self, sig: &Signature, path: &mut Vec<usize>) -> Result<(), CoreError> {
        use SurfaceFormula as S;
        let child = |i: usize, f: &S, path: &mut Vec<usize>| {
            path.push(i);
            let r = f.check_at(sig, path);
            path.pop();
            r
        };
        match self {
            S::Falsum => Ok(()),
            S::Atom(p, args) => {
                let sorts = sig.predicate(p).ok_or_else(|| CoreError::UnknownPredicate(p.clone()))?;
                if sorts.len() != args.len() {
                    return Err(CoreError::ArityMismatch {
                        name: p.clone(),
                        expected: sorts.len(),
                        found: args.len(),
                    });
                }
                for (k, (t, s)) in args.iter().zip(sorts).enumerate() {
                    check_term(t, *s, sig, path)
                        .map_err(|e| relabel(e, &format!("argument {} of `{p}`", k + 1)))?;
                }
                Ok(())
            }
            S::Guard(t, u, body) => {
                check_term(t, Sort::Int, sig, path)?;
                check_term(u, Sort::Int, sig, path)?;
                child(0, body, path)
            }
            S::Forall(_, body) | S::Exists(_, body) | S::Not(body) => child(0, body, path),
            S::Implies(a, b) | S::And(a, b) | S::Or(a, b) | S::Iff(a, b) | S::Xor(a, b) => {
                child(0, a, path)?;
                child(1, b, path)
            }
        }
    }
}

fn relabel(e: CoreError, ctx: &str) -> CoreError {
    match e {
        CoreError::SortMismatch { path, detail } => {
            CoreError::SortMismatch { path, detail: format!("{ctx}: {detail}") }
        }
        other => other,
    }
}

fn check_term(t: &Term, expected: Sort, sig: &Signature, path: &[usize]) -> Result<(), CoreError> {
    if t.sort() != expected {
        return Err(CoreError::SortMismatch {
            path: path.to_vec(),
            detail: format!("`{t}` has sort {} where {expected} is required", t.sort()),
        });
    }
    if let Term::App(g, args) = t {
        let def = sig.function(g).ok_or_else(|| CoreError::UnknownFunction(g.clone()))?;
        if def.arity != args.len() {
            return Err(CoreError::ArityMismatch { name: g.clone(), expected: def.arity, found: args.len() });
        }
        for a in args {
            check_term(a, Sort::Int, sig, path)?;
        }
    }
    Ok(())
}

/// Expands the derived connectives into implication, falsum and `forall`.
pub fn expand_sugar(f: &SurfaceFormula, sig: &Signature) -> Result<Formula, CoreError> {
    f.check_sorts(sig)?;
    Ok(expand(f))
}

fn expand(f: &SurfaceFormula) -> Formula {
    use SurfaceFormula as S;
    match f {
        S::Falsum => Formula::Falsum,
        S::Atom(p, a) => Formula::Atom(p.clone(), a.clone()),
        S::Implies(a, b) => Formula::implies(expand(a), expand(b)),
        S::Forall(b, body) => Formula::Forall(b.clone(), Box::new(expand(body))),
        S::Guard(t, u, body) => Formula::guard(t.clone(), u.clone(), expand(body)),
        S::Not(a) => Formula::not(expand(a)),
        S::And(a, b) => conj(expand(a), expand(b)),
        S::Or(a, b) => Formula::chain(vec![Formula::not(expand(a)), Formula::not(expand(b))], Formula::Falsum),
        S::Iff(a, b) => iff(expand(a), expand(b)),
        S::Xor(a, b) => iff(Formula::not(expand(a)), expand(b)),
        S::Exists(b, body) => Formula::not(Formula::Forall(b.clone(), Box::new(Formula::not(expand(body))))),
    }
}

fn conj(a: Formula, b: Formula) -> Formula {
    Formula::not(Formula::chain(vec![a, b], Formula::Falsum))
}

fn iff(a: Formula, b: Formula) -> Formula {
    conj(Formula::implies(a.clone(), b.clone()), Formula::implies(b, a))
}

/// Builds the formula for acknowledging `preds.len()` packets in order:
/// `F1 = exists x. forall y. (P1(x) -> P1(y))` and
/// `F(k+1) = exists x. forall y. ((Fk -> P(k+1)(x)) -> P(k+1)(y))`.
pub fn make_ack_chain(sig: &Signature, preds: &[&str]) -> Result<Formula, CoreError> {
    let (first, rest) = preds.split_first().ok_or(CoreError::EmptyChain)?;
    for p in preds {
        match sig.predicate(p) {
            None => return Err(CoreError::UnknownPredicate(p.to_string())),
            Some([Sort::Ack]) => {}
            Some(sorts) => {
                return Err(CoreError::SortMismatch {
                    path: vec![],
                    detail: format!("`{p}` must take one ack argument, declared {sorts:?}"),
                })
            }
        }
    }
    let packet = |p: &str, v: &str| Formula::atom(p, vec![Term::ack_var(v)]);
    let step = |premise: Formula, p: &str| {
        Formula::exists("x", Sort::Ack, Formula::forall("y", Sort::Ack, Formula::implies(premise, packet(p, "y"))))
    };
    let mut f = step(packet(first, "x"), first);
    for p in rest {
        f = step(Formula::implies(f, packet(p, "x")), p);
    }
    Ok(f)
}
