//! Normal forms `forall xs. (P1, ..., Pn -> A)`: the fragment the game is
//! played on.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::formula::{fresh_name, subst_unchecked, Binder, Formula, Sort, Term};

/// A premise of a normal formula: a normal formula or an integer equation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Premise {
    Formula(NormalFormula),
    Equation(Term, Term),
}

/// Structured view of a normal formula.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NormalFormula {
    pub prefix: Vec<Binder>,
    pub premises: Vec<Premise>,
    /// `Falsum` or an `Atom`.
    pub conclusion: Formula,
}

impl NormalFormula {
    /// Reads a formula as a normal formula, or `None` if it is not normal.
    pub fn from_formula(f: &Formula) -> Option<NormalFormula> {
        let mut prefix: Vec<Binder> = Vec::new();
        let mut cur = f;
        while let Formula::Forall(b, body) = cur {
            if prefix.iter().any(|p| p.name == b.name) {
                return None;
            }
            prefix.push(b.clone());
            cur = body;
        }
        let mut premises = Vec::new();
        loop {
            match cur {
                Formula::Implies(p, rest) => {
                    premises.push(Premise::Formula(NormalFormula::from_formula(p)?));
                    cur = rest;
                }
                Formula::Guard(t, u, rest) => {
                    premises.push(Premise::Equation(t.clone(), u.clone()));
                    cur = rest;
                }
                Formula::Falsum | Formula::Atom(..) => break,
                Formula::Forall(..) => return None,
            }
        }
        Some(NormalFormula { prefix, premises, conclusion: cur.clone() })
    }

    pub fn to_formula(&self) -> Formula {
        let matrix = self.premises.iter().rev().fold(self.conclusion.clone(), |acc, p| match p {
            Premise::Formula(n) => Formula::implies(n.to_formula(), acc),
            Premise::Equation(t, u) => Formula::guard(t.clone(), u.clone(), acc),
        });
        self.prefix
            .iter()
            .rev()
            .fold(matrix, |acc, b| Formula::Forall(b.clone(), Box::new(acc)))
    }

    /// Substitutes `values` for the prefix and returns the instantiated
    /// premises and conclusion. `values` must match the prefix length.
    pub fn instantiate(&self, values: &[Term]) -> (Vec<Premise>, Formula) {
        assert_eq!(values.len(), self.prefix.len(), "value vector must match the prefix");
        let binding: BTreeMap<String, Term> =
            self.prefix.iter().map(|b| b.name.clone()).zip(values.iter().cloned()).collect();
        let premises = self
            .premises
            .iter()
            .map(|p| match p {
                Premise::Formula(n) => Premise::Formula(
                    NormalFormula::from_formula(&subst_unchecked(&n.to_formula(), &binding))
                        .expect("substitution preserves normal form"),
                ),
                Premise::Equation(t, u) => {
                    let eq = subst_unchecked(&Formula::guard(t.clone(), u.clone(), Formula::Falsum), &binding);
                    match eq {
                        Formula::Guard(t, u, _) => Premise::Equation(t, u),
                        _ => unreachable!(),
                    }
                }
            })
            .collect();
        (premises, subst_unchecked(&self.conclusion, &binding))
    }

    /// Number of premises that are formulas rather than equations.
    pub fn formula_premise_count(&self) -> usize {
        self.premises.iter().filter(|p| matches!(p, Premise::Formula(_))).count()
    }

    fn matrix_names(&self) -> BTreeSet<String> {
        self.to_formula().var_names()
    }

    /// Renames prefix variable `from` to `to`, which must not occur anywhere.
    fn rename_prefix(&mut self, from: &str, to: &str) {
        let sort = self
            .prefix
            .iter()
            .find(|b| b.name == from)
            .map(|b| b.sort)
            .expect("variable is in the prefix");
        let body = NormalFormula { prefix: vec![], premises: self.premises.clone(), conclusion: self.conclusion.clone() };
        let term = match sort {
            Sort::Ack => Term::AckVar(to.to_string()),
            Sort::Int => Term::IntVar(to.to_string()),
        };
        let mut binding = BTreeMap::new();
        binding.insert(from.to_string(), term);
        let renamed = NormalFormula::from_formula(&subst_unchecked(&body.to_formula(), &binding))
            .expect("renaming preserves normal form");
        self.premises = renamed.premises;
        self.conclusion = renamed.conclusion;
        for b in &mut self.prefix {
            if b.name == from {
                b.name = to.to_string();
            }
        }
    }

    /// Renames prefix variables that occur in `names` to fresh ones.
    fn rename_prefix_away(&mut self, names: &BTreeSet<String>) {
        let mut avoid: BTreeSet<String> = names.union(&self.matrix_names()).cloned().collect();
        let clashing: Vec<Binder> = self.prefix.iter().filter(|b| names.contains(&b.name)).cloned().collect();
        for b in clashing {
            let fresh = fresh_name(b.sort, &avoid);
            avoid.insert(fresh.clone());
            self.rename_prefix(&b.name, &fresh);
        }
    }
}

/// True iff `f` is generated by the normal-form rules.
pub fn is_normal(f: &Formula) -> bool {
    NormalFormula::from_formula(f).is_some()
}

/// Computes the normal form.
///
/// Atomic formulas are unchanged; `forall x. G` becomes `forall x. Ĝ`; for
/// `G -> H` the prefix of `Ĥ` is renamed away from every variable name that
/// appears in `Ĝ`, then `Ĝ` is prepended to the premises of `Ĥ`. Guards are
/// carried as equation premises the same way.
pub fn normalize(f: &Formula) -> NormalFormula {
    match f {
        Formula::Falsum | Formula::Atom(..) => {
            NormalFormula { prefix: vec![], premises: vec![], conclusion: f.clone() }
        }
        Formula::Forall(b, body) => {
            let mut inner = normalize(body);
            if inner.prefix.iter().any(|p| p.name == b.name) {
                // the inner binder shadows the outer one; rename it apart
                let mut avoid = inner.matrix_names();
                avoid.insert(b.name.clone());
                let fresh = fresh_name(b.sort, &avoid);
                let shadowed = b.name.clone();
                inner.rename_prefix(&shadowed, &fresh);
            }
            inner.prefix.insert(0, b.clone());
            inner
        }
        Formula::Implies(g, h) => {
            let g_hat = normalize(g);
            let mut h_hat = normalize(h);
            h_hat.rename_prefix_away(&g_hat.to_formula().var_names());
            h_hat.premises.insert(0, Premise::Formula(g_hat));
            h_hat
        }
        Formula::Guard(t, u, h) => {
            let mut h_hat = normalize(h);
            let names = Formula::guard(t.clone(), u.clone(), Formula::Falsum).var_names();
            h_hat.rename_prefix_away(&names);
            h_hat.premises.insert(0, Premise::Equation(t.clone(), u.clone()));
            h_hat
        }
    }
}
