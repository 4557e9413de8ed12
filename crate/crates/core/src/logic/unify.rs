use std::collections::BTreeMap;

use super::{Atom, Substitution, Term, VarId};
use crate::error::{Error, Result};

/// How variable names in the two atoms relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnifyMode {
    /// Equal variable ids in both atoms denote the same variable. Triplet
    /// labels are defined this way.
    SharedNames,
    /// The second atom's variables are renamed apart first, see
    /// [`rename_apart`]. This is what a reasoner does.
    StandardizeApart,
}

/// Renames `b`'s variables to ids above every variable of `a`, in order of
/// first occurrence. In [`UnifyMode::StandardizeApart`] the returned
/// substitution refers to this renamed atom.
pub fn rename_apart(a: &Atom, b: &Atom) -> Atom {
    let base = a.max_var().map_or(0, |m| m + 1);
    let map: BTreeMap<VarId, VarId> = b
        .variables()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, base + i as VarId))
        .collect();
    b.rename(&map)
}

/// Most general unifier of two atoms, or `Ok(None)` if none exists.
///
/// Atoms with different predicates simply fail to unify. The same predicate
/// used with two different argument counts is malformed input.
pub fn unify(a: &Atom, b: &Atom, mode: UnifyMode) -> Result<Option<Substitution>> {
    if a.predicate == b.predicate && a.arity() != b.arity() {
        return Err(Error::Malformed(format!(
            "predicate p{} used with arities {} and {}",
            a.predicate,
            a.arity(),
            b.arity()
        )));
    }
    Ok(match mode {
        UnifyMode::SharedNames => unify_args(a, b),
        UnifyMode::StandardizeApart => unify_args(a, &rename_apart(a, b)),
    })
}

pub(crate) fn unify_args(a: &Atom, b: &Atom) -> Option<Substitution> {
    if a.predicate != b.predicate || a.args.len() != b.args.len() {
        return None;
    }
    let mut s = Substitution::new();
    for (x, y) in a.args.iter().zip(&b.args) {
        let x = s.resolve(*x);
        let y = s.resolve(*y);
        if x == y {
            continue;
        }
        match (x, y) {
            (Term::Var(v), t) | (t, Term::Var(v)) => s.bind(v, t),
            (Term::Const(_), Term::Const(_)) => return None,
        }
    }
    Some(s)
}
