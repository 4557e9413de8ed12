//! Anchor taxonomy and the transformation policies that turn an anchor into
//! positive (unifiable) or negative (non-unifiable) examples.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::logic::{Atom, ConstId, Term, VarId, Vocabulary};

/// Structural type of a unary or binary anchor atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnchorType {
    /// `p(c1, c2)`
    Binary2Consts,
    /// `p(v1, c1)` or `p(c1, v1)`
    BinaryVarConst,
    /// `p(v1, v2)`
    Binary2Vars,
    /// `p(v1, v1)`
    BinaryDupVar,
    /// `p(c1, c1)`
    BinaryDupConst,
    /// `p(c1)`
    UnaryConst,
    /// `p(v1)`
    UnaryVar,
}

impl AnchorType {
    pub const ALL: [AnchorType; 7] = [
        AnchorType::Binary2Consts,
        AnchorType::BinaryVarConst,
        AnchorType::Binary2Vars,
        AnchorType::BinaryDupVar,
        AnchorType::BinaryDupConst,
        AnchorType::UnaryConst,
        AnchorType::UnaryVar,
    ];
}

/// Classifies an anchor. Only arities 1 and 2 have policy tables.
pub fn classify_anchor(a: &Atom) -> Result<AnchorType> {
    use Term::*;
    Ok(match a.args.as_slice() {
        [Const(_)] => AnchorType::UnaryConst,
        [Var(_)] => AnchorType::UnaryVar,
        [Const(x), Const(y)] if x == y => AnchorType::BinaryDupConst,
        [Const(_), Const(_)] => AnchorType::Binary2Consts,
        [Var(x), Var(y)] if x == y => AnchorType::BinaryDupVar,
        [Var(_), Var(_)] => AnchorType::Binary2Vars,
        [Var(_), Const(_)] | [Const(_), Var(_)] => AnchorType::BinaryVarConst,
        _ => {
            return Err(Error::Contract(format!(
                "unsupported anchor {a}: policies are defined for arity 1 and 2 only"
            )))
        }
    })
}

/// Whether an example must unify with its anchor (+) or not (–).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
    /// Used for either, depending on the anchor type.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Easy,
    Hard,
}

/// One of the four example roles: easy/hard × positive/negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Role {
    pub level: Level,
    pub positive: bool,
}

impl Role {
    pub const EASY_POS: Role = Role { level: Level::Easy, positive: true };
    pub const HARD_POS: Role = Role { level: Level::Hard, positive: true };
    pub const EASY_NEG: Role = Role { level: Level::Easy, positive: false };
    pub const HARD_NEG: Role = Role { level: Level::Hard, positive: false };
    pub const ALL: [Role; 4] = [Role::EASY_POS, Role::HARD_POS, Role::EASY_NEG, Role::HARD_NEG];
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = match self.level {
            Level::Easy => 'E',
            Level::Hard => 'H',
        };
        write!(f, "{l}{}", if self.positive { '+' } else { '-' })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Policy {
    /// one const → one var
    Ocnv,
    /// one const → new const
    Ocnc,
    /// one arg → duplicate of another
    Oada,
    /// one var → new const
    Ovnc,
    /// one var → new var
    Ovnv,
    /// predicate → new predicate of a different arity, new args
    NpAr,
    /// predicate and args → new, same arity
    NpAg,
    /// all args → new consts/vars
    NAllAg,
    /// predicate → new predicate of the same arity
    Np,
    /// two args → two new vars
    Tnv,
    /// two args → two new consts
    Tnc,
    /// two args → one new var, duplicated
    Tndv,
    /// two args → one new const, duplicated
    Tndc,
    /// two args → new var + new const
    Tnvc,
    /// swap the two args
    Swa,
}

impl Policy {
    pub const ALL: [Policy; 15] = [
        Policy::Ocnv,
        Policy::Ocnc,
        Policy::Oada,
        Policy::Ovnc,
        Policy::Ovnv,
        Policy::NpAr,
        Policy::NpAg,
        Policy::NAllAg,
        Policy::Np,
        Policy::Tnv,
        Policy::Tnc,
        Policy::Tndv,
        Policy::Tndc,
        Policy::Tnvc,
        Policy::Swa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Ocnv => "OCNV",
            Policy::Ocnc => "OCNC",
            Policy::Oada => "OADA",
            Policy::Ovnc => "OVNC",
            Policy::Ovnv => "OVNV",
            Policy::NpAr => "NPAr",
            Policy::NpAg => "NPAg",
            Policy::NAllAg => "NAllAg",
            Policy::Np => "NP",
            Policy::Tnv => "TNV",
            Policy::Tnc => "TNC",
            Policy::Tndv => "TNDV",
            Policy::Tndc => "TNDC",
            Policy::Tnvc => "TNVC",
            Policy::Swa => "SWA",
        }
    }

    pub fn polarity(self) -> Polarity {
        match self {
            Policy::Ocnv
            | Policy::Ovnc
            | Policy::Ovnv
            | Policy::Tnv
            | Policy::Tndv
            | Policy::Tndc
            | Policy::Tnvc
            | Policy::Swa => Polarity::Positive,
            Policy::Ocnc | Policy::NpAr | Policy::NpAg | Policy::NAllAg | Policy::Np => {
                Polarity::Negative
            }
            Policy::Oada | Policy::Tnc => Polarity::Both,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("unknown policy `{s}`"),
            })
    }
}

/// Policies listed for an anchor type in a role; empty when the cell is ∅.
pub fn policies_for(anchor: AnchorType, role: Role) -> &'static [Policy] {
    use AnchorType::*;
    use Policy::*;
    match (anchor, role.level, role.positive) {
        (Binary2Consts, Level::Easy, true) => &[Ocnv],
        (Binary2Consts, Level::Hard, true) => &[Tnv],
        (Binary2Consts, Level::Easy, false) => &[NpAr, NpAg, NAllAg],
        (Binary2Consts, Level::Hard, false) => &[Ocnc, Oada, Np],

        (BinaryVarConst, Level::Easy, true) => &[Ocnv, Oada, Ovnc, Ovnv],
        // The source table's second entry here is "TSNV", which names no
        // defined policy; its worked example (p6(v1,c1)→p6(v2,v2)) is TNDV.
        (BinaryVarConst, Level::Hard, true) => &[Tnv, Tndv],
        (BinaryVarConst, Level::Easy, false) => &[NpAr, NpAg, NAllAg],
        (BinaryVarConst, Level::Hard, false) => &[Ocnc, Np],

        (Binary2Vars, Level::Easy, true) => &[Oada, Ovnc, Ovnv],
        (Binary2Vars, Level::Hard, true) => &[Tnv, Tnc, Tndv, Tndc, Swa],
        (Binary2Vars, Level::Easy, false) => &[NpAr, NpAg],
        (Binary2Vars, Level::Hard, false) => &[Np],

        (BinaryDupVar, Level::Easy, true) => &[Ovnc, Ovnv],
        (BinaryDupVar, Level::Hard, true) => &[Tndv, Tndc, Tnvc],
        (BinaryDupVar, Level::Easy, false) => &[NpAr, NpAg],
        (BinaryDupVar, Level::Hard, false) => &[Tnc],

        (BinaryDupConst, Level::Easy, true) => &[Ocnv],
        (BinaryDupConst, Level::Hard, true) => &[Tndv, Tnv],
        (BinaryDupConst, Level::Easy, false) => &[NpAr, NpAg, NAllAg],
        (BinaryDupConst, Level::Hard, false) => &[Ocnc, Np],

        (UnaryConst, Level::Easy, true) => &[Ocnv],
        (UnaryConst, Level::Hard, true) => &[],
        (UnaryConst, Level::Easy, false) => &[NpAr, NpAg],
        (UnaryConst, Level::Hard, false) => &[Ocnc, Np],

        (UnaryVar, Level::Easy, true) => &[Ovnc, Ovnv],
        (UnaryVar, Level::Hard, true) => &[],
        (UnaryVar, Level::Easy, false) => &[NpAr, NpAg],
        (UnaryVar, Level::Hard, false) => &[Np],
    }
}

/// The role a policy plays for an anchor type, if it is listed at all.
pub fn role_of(anchor: AnchorType, policy: Policy) -> Option<Role> {
    Role::ALL
        .into_iter()
        .find(|&r| policies_for(anchor, r).contains(&policy))
}

fn new_vars(anchor: &Atom, vocab: &Vocabulary) -> Vec<VarId> {
    let used = anchor.variables();
    (0..vocab.num_variables() as VarId)
        .filter(|v| !used.contains(v))
        .collect()
}

fn new_consts(anchor: &Atom, vocab: &Vocabulary) -> Vec<ConstId> {
    let used = anchor.constants();
    (0..vocab.num_constants() as ConstId)
        .filter(|c| !used.contains(c))
        .collect()
}

fn other_predicates(anchor: &Atom, vocab: &Vocabulary, same_arity: bool) -> Vec<u32> {
    (0..vocab.num_predicates() as u32)
        .filter(|&p| p != anchor.predicate)
        .filter(|&p| (vocab.arities()[p as usize] == anchor.arity()) == same_arity)
        .collect()
}

fn positions(anchor: &Atom, want_var: bool) -> Vec<usize> {
    (0..anchor.arity())
        .filter(|&i| anchor.args[i].is_var() == want_var)
        .collect()
}

fn random_term<R: Rng + ?Sized>(vocab: &Vocabulary, rng: &mut R) -> Term {
    if rng.gen_bool(0.5) {
        Term::Var(rng.gen_range(0..vocab.num_variables()) as VarId)
    } else {
        Term::Const(rng.gen_range(0..vocab.num_constants()) as ConstId)
    }
}

fn pick_two<T: Copy, R: Rng + ?Sized>(pool: &[T], rng: &mut R) -> Option<(T, T)> {
    if pool.len() < 2 {
        return None;
    }
    let mut it = pool.choose_multiple(rng, 2);
    Some((*it.next()?, *it.next()?))
}

/// Applies a policy to an anchor.
///
/// "New" symbols are drawn uniformly from those not already in the anchor,
/// and new predicates differ from the anchor's. Returns `Ok(None)` when the
/// pool a policy draws from is empty (e.g. OCNC with a single constant).
/// Applying a policy that is not listed for the anchor's type is a contract
/// violation.
pub fn apply_policy<R: Rng + ?Sized>(
    anchor: &Atom,
    policy: Policy,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<Option<Atom>> {
    let kind = classify_anchor(anchor)?;
    if role_of(kind, policy).is_none() {
        return Err(Error::Contract(format!(
            "policy {policy} is not applicable to {kind:?} anchor {anchor}"
        )));
    }
    Ok(transform(anchor, policy, vocab, rng))
}

fn transform<R: Rng + ?Sized>(
    anchor: &Atom,
    policy: Policy,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Option<Atom> {
    let mut out = anchor.clone();
    match policy {
        Policy::Ocnv => {
            let i = *positions(anchor, false).choose(rng)?;
            out.args[i] = Term::Var(rng.gen_range(0..vocab.num_variables()) as VarId);
        }
        Policy::Ocnc => {
            let i = *positions(anchor, false).choose(rng)?;
            out.args[i] = Term::Const(*new_consts(anchor, vocab).choose(rng)?);
        }
        Policy::Oada => {
            if anchor.arity() != 2 || anchor.args[0] == anchor.args[1] {
                return None;
            }
            let i = rng.gen_range(0..2);
            out.args[i] = anchor.args[1 - i];
        }
        Policy::Ovnc => {
            let i = *positions(anchor, true).choose(rng)?;
            out.args[i] = Term::Const(*new_consts(anchor, vocab).choose(rng)?);
        }
        Policy::Ovnv => {
            let i = *positions(anchor, true).choose(rng)?;
            out.args[i] = Term::Var(*new_vars(anchor, vocab).choose(rng)?);
        }
        Policy::NpAr | Policy::NpAg => {
            let p = *other_predicates(anchor, vocab, policy == Policy::NpAg).choose(rng)?;
            let arity = vocab.arities()[p as usize];
            out = Atom::new(p, (0..arity).map(|_| random_term(vocab, rng)).collect());
        }
        Policy::NAllAg => {
            let vars = new_vars(anchor, vocab);
            let consts = new_consts(anchor, vocab);
            let const_slots = positions(anchor, false);
            if consts.is_empty() || const_slots.is_empty() {
                return None;
            }
            for slot in out.args.iter_mut() {
                *slot = if vars.is_empty() || rng.gen_bool(0.5) {
                    Term::Const(*consts.choose(rng)?)
                } else {
                    Term::Var(*vars.choose(rng)?)
                };
            }
            // A new constant where the anchor has a constant can never unify.
            if !const_slots.iter().any(|&i| out.args[i].is_const()) {
                let i = *const_slots.choose(rng)?;
                out.args[i] = Term::Const(*consts.choose(rng)?);
            }
        }
        Policy::Np => {
            out.predicate = *other_predicates(anchor, vocab, true).choose(rng)?;
        }
        Policy::Tnv => {
            if anchor.arity() != 2 {
                return None;
            }
            let (a, b) = pick_two(&new_vars(anchor, vocab), rng)?;
            out.args = vec![Term::Var(a), Term::Var(b)];
        }
        Policy::Tnc => {
            if anchor.arity() != 2 {
                return None;
            }
            let (a, b) = pick_two(&new_consts(anchor, vocab), rng)?;
            out.args = vec![Term::Const(a), Term::Const(b)];
        }
        Policy::Tndv => {
            if anchor.arity() != 2 {
                return None;
            }
            let v = Term::Var(*new_vars(anchor, vocab).choose(rng)?);
            out.args = vec![v, v];
        }
        Policy::Tndc => {
            if anchor.arity() != 2 {
                return None;
            }
            let c = Term::Const(*new_consts(anchor, vocab).choose(rng)?);
            out.args = vec![c, c];
        }
        Policy::Tnvc => {
            if anchor.arity() != 2 {
                return None;
            }
            let v = Term::Var(*new_vars(anchor, vocab).choose(rng)?);
            let c = Term::Const(*new_consts(anchor, vocab).choose(rng)?);
            out.args = if rng.gen_bool(0.5) { vec![v, c] } else { vec![c, v] };
        }
        Policy::Swa => {
            if anchor.arity() != 2 || anchor.args[0] == anchor.args[1] {
                return None;
            }
            out.args.swap(0, 1);
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_atom, unify, UnifyMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vocab() -> Vocabulary {
        // p0..p4 unary, p5..p9 binary
        let mut arities = vec![1; 5];
        arities.extend(vec![2; 5]);
        Vocabulary::new(arities, 10, 5, 2).unwrap()
    }

    #[test]
    fn classification() {
        let cases = [
            ("p6(c1, c2)", AnchorType::Binary2Consts),
            ("p6(V1, c1)", AnchorType::BinaryVarConst),
            ("p6(c1, V1)", AnchorType::BinaryVarConst),
            ("p6(V1, V2)", AnchorType::Binary2Vars),
            ("p6(V1, V1)", AnchorType::BinaryDupVar),
            ("p6(c1, c1)", AnchorType::BinaryDupConst),
            ("p2(c1)", AnchorType::UnaryConst),
            ("p2(V1)", AnchorType::UnaryVar),
        ];
        for (text, kind) in cases {
            assert_eq!(classify_anchor(&parse_atom(text).unwrap()).unwrap(), kind, "{text}");
        }
        assert!(classify_anchor(&parse_atom("p1(c0, c1, c2)").unwrap()).is_err());
    }

    #[test]
    fn worked_examples() {
        let v = vocab();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = apply_policy(&parse_atom("p2(c1)").unwrap(), Policy::Ocnv, &v, &mut rng)
            .unwrap()
            .unwrap();
        assert!(out.args[0].is_var() && out.predicate == 2);

        let out = apply_policy(&parse_atom("p6(V1, V2)").unwrap(), Policy::Swa, &v, &mut rng)
            .unwrap()
            .unwrap();
        assert_eq!(out, parse_atom("p6(V2, V1)").unwrap());

        for _ in 0..50 {
            let out = apply_policy(&parse_atom("p6(c1, c2)").unwrap(), Policy::Ocnc, &v, &mut rng)
                .unwrap()
                .unwrap();
            let changed: Vec<_> = out.args.iter().filter(|t| !matches!(t, Term::Const(1) | Term::Const(2))).collect();
            assert_eq!(changed.len(), 1);
            assert!(out.args.contains(&Term::Const(1)) || out.args.contains(&Term::Const(2)));
        }
    }

    #[test]
    fn empty_pool_gives_none() {
        let v = Vocabulary::new(vec![1], 1, 1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            apply_policy(&parse_atom("p0(c0)").unwrap(), Policy::Ocnc, &v, &mut rng).unwrap(),
            None
        );
    }

    #[test]
    fn inapplicable_pair_is_contract_violation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = apply_policy(&parse_atom("p2(V1)").unwrap(), Policy::Swa, &vocab(), &mut rng);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn every_listed_policy_has_the_right_label() {
        let v = vocab();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let anchors = ["p6(c1, c2)", "p6(V1, c1)", "p6(c1, V1)", "p6(V1, V2)", "p6(V1, V1)", "p6(c1, c1)", "p2(c1)", "p2(V1)"];
        for text in anchors {
            let anchor = parse_atom(text).unwrap();
            let kind = classify_anchor(&anchor).unwrap();
            for role in Role::ALL {
                for &policy in policies_for(kind, role) {
                    for _ in 0..200 {
                        let out = apply_policy(&anchor, policy, &v, &mut rng).unwrap().unwrap();
                        let unifies = unify(&anchor, &out, UnifyMode::SharedNames).unwrap().is_some();
                        assert_eq!(unifies, role.positive, "{text} {policy} {role} -> {out}");
                    }
                }
            }
        }
    }

    #[test]
    fn table_polarities_agree_with_policy_polarity() {
        for kind in AnchorType::ALL {
            for role in Role::ALL {
                for &p in policies_for(kind, role) {
                    match p.polarity() {
                        Polarity::Positive => assert!(role.positive, "{kind:?} {p}"),
                        Polarity::Negative => assert!(!role.positive, "{kind:?} {p}"),
                        Polarity::Both => {}
                    }
                }
            }
        }
        assert_eq!(Policy::ALL.len(), 15);
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
    }
}
