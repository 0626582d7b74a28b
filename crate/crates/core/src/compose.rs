//! Sequential composition of protocols.

use std::collections::BTreeSet;

use crate::formula::{free_vars, occurrences, AtomicOccurrence, CoreError, Formula};
use crate::normal::{normalize, NormalFormula};

/// Final atomic occurrences of a normal formula: negative and without
/// hypothesis. These are the places where a play ends.
pub fn final_occurrences(f: &Formula) -> Result<Vec<AtomicOccurrence>, CoreError> {
    Ok(occurrences(f)?.into_iter().filter(AtomicOccurrence::is_final).collect())
}

/// The protocol "`f` then `g`": every final occurrence `A` of `f` becomes
/// `g -> A`, each time with a copy of `g` whose bound variables are renamed
/// apart from everything else.
pub fn compose(f: &Formula, g: &Formula) -> Result<NormalFormula, CoreError> {
    for h in [f, g] {
        if let Some((name, _)) = free_vars(h).into_iter().next() {
            return Err(CoreError::FreeVariable(name));
        }
    }
    let finals = final_occurrences(f)?;
    if !crate::normal::is_normal(g) {
        return Err(CoreError::NotNormal);
    }
    let mut avoid: BTreeSet<String> = f.var_names();
    let mut out = f.clone();
    for occ in &finals {
        let copy = g.rename_bound_apart(&mut avoid);
        out = replace_at(&out, &occ.path, &|a| Formula::implies(copy.clone(), a.clone()));
    }
    Ok(normalize(&out))
}

fn replace_at(f: &Formula, path: &[usize], with: &dyn Fn(&Formula) -> Formula) -> Formula {
    let Some((&i, rest)) = path.split_first() else {
        return with(f);
    };
    match (f, i) {
        (Formula::Implies(a, b), 0) => Formula::implies(replace_at(a, rest, with), (**b).clone()),
        (Formula::Implies(a, b), 1) => Formula::implies((**a).clone(), replace_at(b, rest, with)),
        (Formula::Forall(b, body), 0) => Formula::forall(&b.name, b.sort, replace_at(body, rest, with)),
        (Formula::Guard(t, u, body), 0) => Formula::guard(t.clone(), u.clone(), replace_at(body, rest, with)),
        _ => panic!("occurrence path does not fit the formula"),
    }
}
