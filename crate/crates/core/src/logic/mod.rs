//! Terms, atoms, Horn clauses and substitutions.
//!
//! Symbols are interned as small integer ids: predicate `i` prints as `p{i}`,
//! constant `i` as `c{i}` and variable `i` as `V{i}`. Terms are flat (no
//! function symbols), so unification never needs an occurs check.

mod syntax;
mod unify;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use syntax::{
    parse_atom, parse_clause, parse_clauses, parse_term, SymbolTable,
};
pub use unify::{rename_apart, unify, UnifyMode};

pub type PredicateId = u32;
pub type ConstId = u32;
pub type VarId = u32;

/// A variable or a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(VarId),
    Const(ConstId),
}

impl Term {
    pub fn is_var(self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_const(self) -> bool {
        matches!(self, Term::Const(_))
    }
}

/// A predicate applied to an ordered list of terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: PredicateId,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: PredicateId, args: Vec<Term>) -> Self {
        Atom { predicate, args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| t.is_const())
    }

    /// Variables in order of first occurrence, without repeats.
    pub fn variables(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        for t in &self.args {
            if let Term::Var(v) = *t {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    pub fn constants(&self) -> Vec<ConstId> {
        let mut out = Vec::new();
        for t in &self.args {
            if let Term::Const(c) = *t {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        out
    }

    pub fn max_var(&self) -> Option<VarId> {
        self.args
            .iter()
            .filter_map(|t| match t {
                Term::Var(v) => Some(*v),
                Term::Const(_) => None,
            })
            .max()
    }

    /// Renumbers variables 0, 1, 2, ... by order of first occurrence.
    ///
    /// Two atoms are equal up to a bijective variable renaming exactly when
    /// their canonical forms are identical.
    pub fn canonical(&self) -> Atom {
        let mut seen: Vec<VarId> = Vec::with_capacity(self.args.len());
        let args = self
            .args
            .iter()
            .map(|t| match *t {
                Term::Var(v) => {
                    let idx = match seen.iter().position(|&s| s == v) {
                        Some(i) => i,
                        None => {
                            seen.push(v);
                            seen.len() - 1
                        }
                    };
                    Term::Var(idx as VarId)
                }
                c => c,
            })
            .collect();
        Atom::new(self.predicate, args)
    }

    /// Renames the variables with `map`; unmapped variables are left alone.
    pub fn rename(&self, map: &BTreeMap<VarId, VarId>) -> Atom {
        let args = self
            .args
            .iter()
            .map(|t| match *t {
                Term::Var(v) => Term::Var(map.get(&v).copied().unwrap_or(v)),
                c => c,
            })
            .collect();
        Atom::new(self.predicate, args)
    }
}

/// Free-function form of [`Atom::canonical`].
pub fn canonical_rename(atom: &Atom) -> Atom {
    atom.canonical()
}

/// A Horn clause. An empty body makes it a fact.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Clause {
    pub fn fact(head: Atom) -> Self {
        Clause {
            head,
            body: Vec::new(),
        }
    }

    pub fn rule(head: Atom, body: Vec<Atom>) -> Self {
        Clause { head, body }
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    /// Every head variable also occurs in the body; a fact must be ground.
    pub fn is_safe(&self) -> bool {
        if self.body.is_empty() {
            return self.head.is_ground();
        }
        let body_vars: BTreeSet<VarId> = self
            .body
            .iter()
            .flat_map(|a| a.variables())
            .collect();
        self.head.variables().iter().all(|v| body_vars.contains(v))
    }

    pub fn variables(&self) -> Vec<VarId> {
        let mut out = self.head.variables();
        for a in &self.body {
            for v in a.variables() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    pub fn max_var(&self) -> Option<VarId> {
        std::iter::once(&self.head)
            .chain(&self.body)
            .filter_map(Atom::max_var)
            .max()
    }

    /// Variables renumbered by first occurrence across head then body.
    pub fn canonical(&self) -> Clause {
        let map: BTreeMap<VarId, VarId> = self
            .variables()
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, i as VarId))
            .collect();
        self.rename(&map)
    }

    pub fn rename(&self, map: &BTreeMap<VarId, VarId>) -> Clause {
        Clause {
            head: self.head.rename(map),
            body: self.body.iter().map(|a| a.rename(map)).collect(),
        }
    }
}

/// Issues variable ids that have never been handed out before.
///
/// One counter is owned per reasoning task.
#[derive(Debug, Clone)]
pub struct FreshVars {
    next: VarId,
}

impl FreshVars {
    /// Starts issuing ids at `first`. Callers pick `first` above every id
    /// already in use.
    pub fn starting_at(first: VarId) -> Self {
        FreshVars { next: first }
    }

    pub fn next_id(&mut self) -> VarId {
        let v = self.next;
        self.next += 1;
        v
    }

    pub fn peek(&self) -> VarId {
        self.next
    }
}

/// Replaces every variable of the clause with a fresh id.
pub fn standardize_apart(clause: &Clause, fresh: &mut FreshVars) -> Clause {
    let map: BTreeMap<VarId, VarId> = clause
        .variables()
        .into_iter()
        .map(|v| (v, fresh.next_id()))
        .collect();
    clause.rename(&map)
}

/// Variable bindings produced by unification.
///
/// Kept idempotent: no bound variable occurs in any binding's value, and no
/// variable is bound to itself.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Substitution {
    bindings: BTreeMap<VarId, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn get(&self, v: VarId) -> Option<Term> {
        self.bindings.get(&v).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, Term)> + '_ {
        self.bindings.iter().map(|(v, t)| (*v, *t))
    }

    pub fn resolve(&self, t: Term) -> Term {
        match t {
            Term::Var(v) => self.bindings.get(&v).copied().unwrap_or(t),
            c => c,
        }
    }

    /// Binds `v` to `t`, substituting the new binding into existing values.
    ///
    /// `v` must be unbound and `t` already resolved against `self`.
    pub(crate) fn bind(&mut self, v: VarId, t: Term) {
        debug_assert!(!self.bindings.contains_key(&v));
        if t == Term::Var(v) {
            return;
        }
        for value in self.bindings.values_mut() {
            if *value == Term::Var(v) {
                *value = t;
            }
        }
        self.bindings.insert(v, t);
    }

    /// Builds a substitution from raw pairs, dropping identity bindings.
    /// Idempotence is the caller's responsibility; see [`Self::is_idempotent`].
    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarId, Term)>) -> Self {
        let bindings = pairs
            .into_iter()
            .filter(|(v, t)| *t != Term::Var(*v))
            .collect();
        Substitution { bindings }
    }

    pub fn apply(&self, atom: &Atom) -> Atom {
        if self.bindings.is_empty() {
            return atom.clone();
        }
        Atom::new(
            atom.predicate,
            atom.args.iter().map(|t| self.resolve(*t)).collect(),
        )
    }

    pub fn apply_clause(&self, clause: &Clause) -> Clause {
        Clause {
            head: self.apply(&clause.head),
            body: clause.body.iter().map(|a| self.apply(a)).collect(),
        }
    }

    /// The substitution equivalent to applying `self` and then `other`.
    ///
    /// The result is idempotent whenever `other` binds nothing that occurs in
    /// the range of `self`, which holds when `other` was computed on atoms
    /// already instantiated by `self`.
    pub fn compose(&self, other: &Substitution) -> Substitution {
        let mut bindings: BTreeMap<VarId, Term> = self
            .bindings
            .iter()
            .map(|(v, t)| (*v, other.resolve(*t)))
            .filter(|(v, t)| *t != Term::Var(*v))
            .collect();
        for (v, t) in &other.bindings {
            bindings.entry(*v).or_insert(*t);
        }
        Substitution { bindings }
    }

    pub fn is_idempotent(&self) -> bool {
        self.bindings.iter().all(|(v, t)| {
            *t != Term::Var(*v)
                && match t {
                    Term::Var(w) => !self.bindings.contains_key(w),
                    Term::Const(_) => true,
                }
        })
    }

    /// Restricts the substitution to the given variables.
    pub fn restrict(&self, vars: &[VarId]) -> Substitution {
        Substitution {
            bindings: self
                .bindings
                .iter()
                .filter(|(v, _)| vars.contains(v))
                .map(|(v, t)| (*v, *t))
                .collect(),
        }
    }
}

/// Free-function form of [`Substitution::apply`].
pub fn apply(s: &Substitution, atom: &Atom) -> Atom {
    s.apply(atom)
}

/// Free-function form of [`Substitution::compose`].
pub fn compose(s1: &Substitution, s2: &Substitution) -> Substitution {
    s1.compose(s2)
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (v, t)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}→{}", Term::Var(*v), t)?;
        }
        write!(f, "}}")
    }
}

/// Predicates with their arities plus the sizes of the constant and variable
/// pools.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    arities: Vec<usize>,
    num_constants: usize,
    num_variables: usize,
    max_arity: usize,
}

impl Vocabulary {
    pub fn new(
        arities: Vec<usize>,
        num_constants: usize,
        num_variables: usize,
        max_arity: usize,
    ) -> Result<Self> {
        if arities.is_empty() {
            return Err(Error::Vocabulary("at least one predicate is required".into()));
        }
        if num_constants == 0 || num_variables == 0 {
            return Err(Error::Vocabulary(
                "constant and variable pools must be non-empty".into(),
            ));
        }
        if let Some((i, a)) = arities
            .iter()
            .enumerate()
            .find(|(_, &a)| a == 0 || a > max_arity)
        {
            return Err(Error::Vocabulary(format!(
                "predicate p{i} has arity {a}, outside 1..={max_arity}"
            )));
        }
        if !arities.contains(&max_arity) {
            return Err(Error::Vocabulary(format!(
                "no predicate has the maximum arity {max_arity}"
            )));
        }
        Ok(Vocabulary {
            arities,
            num_constants,
            num_variables,
            max_arity,
        })
    }

    /// Draws each arity uniformly from `1..=max_arity`, resampling until at
    /// least one predicate has the maximum arity.
    pub fn generate<R: Rng + ?Sized>(
        num_predicates: usize,
        num_constants: usize,
        num_variables: usize,
        max_arity: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if num_predicates == 0 || max_arity == 0 {
            return Err(Error::Vocabulary(
                "need at least one predicate and max arity >= 1".into(),
            ));
        }
        loop {
            let arities: Vec<usize> = (0..num_predicates)
                .map(|_| rng.gen_range(1..=max_arity))
                .collect();
            if arities.contains(&max_arity) {
                return Vocabulary::new(arities, num_constants, num_variables, max_arity);
            }
        }
    }

    pub fn num_predicates(&self) -> usize {
        self.arities.len()
    }

    pub fn num_constants(&self) -> usize {
        self.num_constants
    }

    pub fn num_variables(&self) -> usize {
        self.num_variables
    }

    pub fn max_arity(&self) -> usize {
        self.max_arity
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn arity(&self, p: PredicateId) -> Option<usize> {
        self.arities.get(p as usize).copied()
    }

    pub fn predicates_with_arity(&self, arity: usize) -> Vec<PredicateId> {
        (0..self.arities.len() as PredicateId)
            .filter(|&p| self.arities[p as usize] == arity)
            .collect()
    }

    /// `np * (nc + nv)^ma`, the number of distinct atoms the vocabulary can
    /// express when every predicate has the maximum arity. Saturates.
    pub fn max_unique_atoms(&self) -> u128 {
        let base = (self.num_constants + self.num_variables) as u128;
        let mut pow: u128 = 1;
        for _ in 0..self.max_arity {
            pow = pow.saturating_mul(base);
        }
        (self.arities.len() as u128).saturating_mul(pow)
    }

    /// Exact count of distinct atoms given the real arity of each predicate.
    pub fn atom_count(&self) -> u128 {
        let base = (self.num_constants + self.num_variables) as u128;
        self.arities
            .iter()
            .map(|&a| base.saturating_pow(a as u32))
            .fold(0u128, |acc, x| acc.saturating_add(x))
    }

    /// Checks predicate, arity and pool bounds. Variables are allowed
    /// outside the pool only when `allow_fresh_vars` is set.
    pub fn check_atom(&self, atom: &Atom, allow_fresh_vars: bool) -> Result<()> {
        let arity = self.arity(atom.predicate).ok_or_else(|| {
            Error::Vocabulary(format!("unknown predicate p{}", atom.predicate))
        })?;
        if arity != atom.arity() {
            return Err(Error::Vocabulary(format!(
                "p{} has arity {arity}, atom has {} arguments",
                atom.predicate,
                atom.arity()
            )));
        }
        for t in &atom.args {
            match *t {
                Term::Const(c) if c as usize >= self.num_constants => {
                    return Err(Error::Vocabulary(format!("constant c{c} out of range")));
                }
                Term::Var(v) if !allow_fresh_vars && v as usize >= self.num_variables => {
                    return Err(Error::Vocabulary(format!("variable V{v} out of range")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn check_clause(&self, clause: &Clause) -> Result<()> {
        self.check_atom(&clause.head, false)?;
        for a in &clause.body {
            self.check_atom(a, false)?;
        }
        Ok(())
    }

    /// Short stable digest identifying the vocabulary.
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.describe().as_bytes());
        hex::encode(h.finalize())[..16].to_string()
    }

    /// Header-style description: `np=.. nc=.. nv=.. ma=.. arities=1,2,..`.
    pub fn describe(&self) -> String {
        let arities: Vec<String> = self.arities.iter().map(|a| a.to_string()).collect();
        format!(
            "np={} nc={} nv={} ma={} arities={}",
            self.arities.len(),
            self.num_constants,
            self.num_variables,
            self.max_arity,
            arities.join(",")
        )
    }

    /// Inverse of [`Self::describe`].
    pub fn from_description(text: &str) -> Result<Self> {
        let mut nc = None;
        let mut nv = None;
        let mut ma = None;
        let mut arities = None;
        for part in text.split_whitespace() {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Vocabulary(format!("bad vocabulary field `{part}`")))?;
            let num = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::Vocabulary(format!("bad number `{v}`")))
            };
            match k {
                "np" => {}
                "nc" => nc = Some(num(v)?),
                "nv" => nv = Some(num(v)?),
                "ma" => ma = Some(num(v)?),
                "arities" => {
                    arities = Some(
                        v.split(',')
                            .map(num)
                            .collect::<Result<Vec<usize>>>()?,
                    )
                }
                _ => {}
            }
        }
        match (arities, nc, nv, ma) {
            (Some(a), Some(c), Some(v), Some(m)) => Vocabulary::new(a, c, v, m),
            _ => Err(Error::Vocabulary(format!(
                "incomplete vocabulary description `{text}`"
            ))),
        }
    }
}

/// A vocabulary together with its facts and rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    pub vocabulary: Vocabulary,
    pub clauses: Vec<Clause>,
}

impl KnowledgeBase {
    pub fn new(vocabulary: Vocabulary, clauses: Vec<Clause>) -> Result<Self> {
        for c in &clauses {
            vocabulary.check_clause(c)?;
        }
        Ok(KnowledgeBase {
            vocabulary,
            clauses,
        })
    }

    pub fn facts(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| c.is_fact())
    }

    pub fn rules(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| !c.is_fact())
    }

    /// Clause indices grouped by head predicate, each group in KB order.
    pub fn predicate_index(&self) -> Vec<Vec<usize>> {
        let mut index = vec![Vec::new(); self.vocabulary.num_predicates()];
        for (i, c) in self.clauses.iter().enumerate() {
            index[c.head.predicate as usize].push(i);
        }
        index
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32) -> Term {
        Term::Var(i)
    }
    fn c(i: u32) -> Term {
        Term::Const(i)
    }

    #[test]
    fn canonical_examples() {
        let a = Atom::new(6, vec![v(7), v(7)]);
        assert_eq!(a.canonical(), Atom::new(6, vec![v(0), v(0)]));
        let x = Atom::new(6, vec![v(3), c(1)]);
        let y = Atom::new(6, vec![v(9), c(1)]);
        assert_eq!(x.canonical(), y.canonical());
        assert_eq!(x.canonical().canonical(), x.canonical());
    }

    #[test]
    fn apply_examples() {
        let s = Substitution::from_pairs([(1, c(1))]);
        assert_eq!(
            s.apply(&Atom::new(6, vec![v(1), v(1)])),
            Atom::new(6, vec![c(1), c(1)])
        );
        let a = Atom::new(2, vec![v(0), c(3)]);
        assert_eq!(Substitution::new().apply(&a), a);
    }

    #[test]
    fn compose_examples() {
        let s = Substitution::from_pairs([(0, v(1))]);
        assert_eq!(Substitution::new().compose(&s), s);
        let s2 = Substitution::from_pairs([(1, c(1))]);
        let composed = s.compose(&s2);
        assert_eq!(composed, Substitution::from_pairs([(0, c(1)), (1, c(1))]));
        assert!(composed.is_idempotent());
    }

    #[test]
    fn standardize_apart_examples() {
        let fact = Clause::fact(Atom::new(6, vec![c(1), c(2)]));
        let mut fresh = FreshVars::starting_at(17);
        assert_eq!(standardize_apart(&fact, &mut fresh), fact);

        let rule = Clause::rule(
            Atom::new(0, vec![v(0)]),
            vec![Atom::new(1, vec![v(0), v(1)])],
        );
        let r1 = standardize_apart(&rule, &mut fresh);
        assert_eq!(r1.head, Atom::new(0, vec![v(17)]));
        assert_eq!(r1.body[0], Atom::new(1, vec![v(17), v(18)]));
        let r2 = standardize_apart(&rule, &mut fresh);
        let vars1 = r1.variables();
        assert!(r2.variables().iter().all(|x| !vars1.contains(x)));
    }

    #[test]
    fn safety() {
        let unsafe_rule = Clause::rule(
            Atom::new(0, vec![v(0), v(2)]),
            vec![Atom::new(1, vec![v(0)])],
        );
        assert!(!unsafe_rule.is_safe());
        assert!(!Clause::fact(Atom::new(0, vec![v(0)])).is_safe());
        assert!(Clause::fact(Atom::new(0, vec![c(0)])).is_safe());
    }

    #[test]
    fn vocabulary_invariants() {
        assert!(Vocabulary::new(vec![1, 1], 3, 2, 2).is_err());
        assert!(Vocabulary::new(vec![1, 3], 3, 2, 2).is_err());
        assert!(Vocabulary::new(vec![1, 2], 0, 2, 2).is_err());
        let vocab = Vocabulary::new(vec![1, 2], 3, 2, 2).unwrap();
        assert_eq!(Vocabulary::from_description(&vocab.describe()).unwrap(), vocab);
    }

    #[test]
    fn max_unique_atoms_formula() {
        let vocab = Vocabulary::new(vec![2; 20], 200, 10, 2).unwrap();
        assert_eq!(vocab.max_unique_atoms(), 882_000);
    }

    #[test]
    fn generated_vocabulary() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let vocab = Vocabulary::generate(20, 200, 10, 2, &mut rng).unwrap();
        assert_eq!(vocab.num_predicates(), 20);
        assert!(vocab.arities().iter().all(|&a| a == 1 || a == 2));
        assert!(vocab.arities().contains(&2));
        let single = Vocabulary::generate(1, 1, 1, 1, &mut rng).unwrap();
        assert_eq!(single.arities(), &[1]);
    }
}
