mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use horn_embed::logic::{
    canonical_rename, compose, rename_apart, unify, Atom, Substitution, Term, UnifyMode, Vocabulary,
};

#[test]
fn unification_matches_the_grounding_oracle() {
    for arities in [vec![1, 2], vec![2, 2]] {
        let vocab = Vocabulary::new(arities, 3, 2, 2).unwrap();
        let r = common::unification_oracle(&vocab);
        assert_eq!(r.mismatches, 0, "{r:?}");
        assert!(r.unifiable > 100);
    }
}

#[test]
fn mixed_arity_for_one_predicate_is_malformed() {
    let a = Atom::new(0, vec![Term::Const(0)]);
    let b = Atom::new(0, vec![Term::Const(0), Term::Const(1)]);
    assert!(matches!(
        unify(&a, &b, UnifyMode::SharedNames),
        Err(horn_embed::Error::Malformed(_))
    ));
}

fn term() -> impl Strategy<Value = Term> {
    prop_oneof![(0u32..4).prop_map(Term::Var), (0u32..4).prop_map(Term::Const)]
}

fn atom() -> impl Strategy<Value = Atom> {
    (0u32..2, prop::collection::vec(term(), 2)).prop_map(|(p, args)| Atom::new(p, args))
}

fn substitution() -> impl Strategy<Value = Substitution> {
    prop::collection::vec((0u32..6, term()), 0..4).prop_map(|pairs| {
        let mut seen = BTreeMap::new();
        for (v, t) in pairs {
            seen.entry(v).or_insert(t);
        }
        Substitution::from_pairs(seen)
    })
}

proptest! {
    #[test]
    fn unifiability_is_symmetric(a in atom(), b in atom()) {
        for mode in [UnifyMode::SharedNames, UnifyMode::StandardizeApart] {
            prop_assert_eq!(
                unify(&a, &b, mode).unwrap().is_some(),
                unify(&b, &a, mode).unwrap().is_some()
            );
        }
    }

    #[test]
    fn unifiers_are_sound_and_idempotent(a in atom(), b in atom()) {
        if let Some(s) = unify(&a, &b, UnifyMode::SharedNames).unwrap() {
            prop_assert_eq!(s.apply(&a), s.apply(&b));
            prop_assert!(s.is_idempotent());
        }
        if let Some(s) = unify(&a, &b, UnifyMode::StandardizeApart).unwrap() {
            prop_assert_eq!(s.apply(&a), s.apply(&rename_apart(&a, &b)));
        }
    }

    #[test]
    fn composition_applies_in_order(s1 in substitution(), s2 in substitution(), a in atom()) {
        prop_assert_eq!(compose(&s1, &s2).apply(&a), s2.apply(&s1.apply(&a)));
    }

    #[test]
    fn composition_is_associative_on_atoms(
        s1 in substitution(), s2 in substitution(), s3 in substitution(), a in atom()
    ) {
        prop_assert_eq!(
            compose(&compose(&s1, &s2), &s3).apply(&a),
            compose(&s1, &compose(&s2, &s3)).apply(&a)
        );
    }

    #[test]
    fn canonical_form_ignores_variable_names(a in atom(), shift in 1u32..50) {
        let map: BTreeMap<u32, u32> = a.variables().into_iter().map(|v| (v, v * 7 + shift)).collect();
        let renamed = a.rename(&map);
        prop_assert_eq!(canonical_rename(&renamed), canonical_rename(&a));
        prop_assert_eq!(canonical_rename(&canonical_rename(&a)), canonical_rename(&a));
    }

    #[test]
    fn canonical_forms_differ_when_patterns_differ(a in atom(), b in atom()) {
        // Equal canonical forms mean each atom is an instance of the other.
        if canonical_rename(&a) == canonical_rename(&b) {
            let s = unify(&a, &b, UnifyMode::StandardizeApart).unwrap();
            prop_assert!(s.is_some());
        }
    }
}
