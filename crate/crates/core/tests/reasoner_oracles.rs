//! Reasoner behaviour checked against brute-force oracles on small KBs.

use std::collections::{BTreeSet, HashSet};
use std::hash::{Hash, Hasher};

use horn_embed::logic::{parse_atom, parse_clauses, Atom, Clause, KnowledgeBase, Term, Vocabulary};
use horn_embed::reasoner::{
    collect_training_data, run_query_set, run_query_set_serial, solve, ClauseScorer, GoalStrategy,
    Mode, Outcome, SearchConfig,
};
use horn_embed::synth::{gen_kb, KbGenConfig};

type Steps = Vec<(Vec<usize>, usize)>;

fn small_kbs() -> Vec<KnowledgeBase> {
    (0..12)
        .filter_map(|seed| {
            gen_kb(&KbGenConfig {
                kb_size: 10,
                num_predicates: 3,
                num_constants: 3,
                num_variables: 3,
                max_arity: 2,
                fact_fraction: 0.5,
                max_body_len: 2,
                singleton_vars: false,
                rng_seed: seed,
            })
            .ok()
        })
        .collect()
}

/// Every assignment of constants to `vars`.
fn assignments(vars: &[u32], nc: usize) -> Vec<Vec<(u32, u32)>> {
    let mut out = vec![Vec::new()];
    for &v in vars {
        out = out
            .into_iter()
            .flat_map(|a| {
                (0..nc as u32).map(move |c| {
                    let mut b = a.clone();
                    b.push((v, c));
                    b
                })
            })
            .collect();
    }
    out
}

fn ground(atom: &Atom, a: &[(u32, u32)]) -> Atom {
    let args = atom
        .args
        .iter()
        .map(|t| match *t {
            Term::Var(v) => Term::Const(a.iter().find(|(x, _)| *x == v).expect("bound").1),
            c => c,
        })
        .collect();
    Atom::new(atom.predicate, args)
}

fn instances(q: &Atom, nc: usize) -> Vec<Atom> {
    assignments(&q.variables(), nc).iter().map(|a| ground(q, a)).collect()
}

/// `levels[k]` holds the ground atoms with a proof tree of height at most `k + 1`.
fn bottom_up(kb: &KnowledgeBase, height: usize) -> Vec<HashSet<Atom>> {
    let nc = kb.vocabulary.num_constants();
    let mut levels = vec![kb.facts().map(|c| c.head.clone()).collect::<HashSet<_>>()];
    for _ in 1..height {
        let prev = levels.last().unwrap().clone();
        let mut next = prev.clone();
        for r in kb.rules() {
            for a in assignments(&r.variables(), nc) {
                if r.body.iter().all(|b| prev.contains(&ground(b, &a))) {
                    next.insert(ground(&r.head, &a));
                }
            }
        }
        levels.push(next);
    }
    levels
}

/// All ground proof trees of `goal` with height at most `h`, as step sets.
fn proof_trees(kb: &KnowledgeBase, goal: &Atom, h: usize) -> Vec<Steps> {
    if h == 0 {
        return Vec::new();
    }
    let nc = kb.vocabulary.num_constants();
    let mut out = Vec::new();
    for (ci, c) in kb.clauses.iter().enumerate() {
        if c.head.predicate != goal.predicate {
            continue;
        }
        for a in assignments(&c.variables(), nc) {
            if ground(&c.head, &a) != *goal {
                continue;
            }
            let mut partial: Vec<Steps> = vec![vec![(Vec::new(), ci)]];
            for (j, b) in c.body.iter().enumerate() {
                let subs = proof_trees(kb, &ground(b, &a), h - 1);
                partial = partial
                    .iter()
                    .flat_map(|p| {
                        subs.iter().map(move |s| {
                            let mut t = p.clone();
                            t.extend(s.iter().map(|(path, k)| {
                                let mut q = vec![j];
                                q.extend(path);
                                (q, *k)
                            }));
                            t
                        })
                    })
                    .collect();
            }
            out.extend(partial);
        }
    }
    out
}

/// Queries over the vocabulary using constants and the variables V0, V1.
fn all_queries(vocab: &Vocabulary) -> Vec<Atom> {
    let mut terms: Vec<Term> = (0..vocab.num_constants() as u32).map(Term::Const).collect();
    terms.extend([Term::Var(0), Term::Var(1)]);
    let mut out = Vec::new();
    for (p, &arity) in vocab.arities().iter().enumerate() {
        let mut args: Vec<Vec<Term>> = vec![Vec::new()];
        for _ in 0..arity {
            args = args
                .into_iter()
                .flat_map(|a| {
                    terms.iter().map(move |t| {
                        let mut b = a.clone();
                        b.push(*t);
                        b
                    })
                })
                .collect();
        }
        out.extend(args.into_iter().map(|a| Atom::new(p as u32, a)));
    }
    out
}

fn is_instance(answer: &Atom, query: &Atom) -> bool {
    answer.predicate == query.predicate
        && horn_embed::logic::unify(query, answer, horn_embed::logic::UnifyMode::SharedNames)
            .unwrap()
            .is_some_and(|s| s.apply(query) == *answer)
}

fn cfg(mode: Mode, depth: usize) -> SearchConfig {
    SearchConfig {
        depth_limit: depth,
        node_cap: 1_000_000,
        mode,
        ..SearchConfig::default()
    }
}

/// Deterministic pseudo-random clause scores.
struct HashScorer(u64);

impl ClauseScorer for HashScorer {
    fn scores(&self, goal: &Atom, bucket: &[usize]) -> Vec<f64> {
        bucket
            .iter()
            .map(|ci| {
                let mut h = std::collections::hash_map::DefaultHasher::new();
                (self.0, goal.to_string(), ci).hash(&mut h);
                (h.finish() % 10_000) as f64 / 10_000.0
            })
            .collect()
    }
}

/// An increasing transform of another scorer's output.
struct Rescaled<S>(S);

impl<S: ClauseScorer> ClauseScorer for Rescaled<S> {
    fn scores(&self, goal: &Atom, bucket: &[usize]) -> Vec<f64> {
        self.0.scores(goal, bucket).into_iter().map(|s| 7.0 * s.powi(3) - 2.0).collect()
    }
}

#[test]
fn standard_search_matches_the_bottom_up_fixpoint() {
    let kbs = small_kbs();
    assert!(kbs.len() >= 8);
    for kb in &kbs {
        let nc = kb.vocabulary.num_constants();
        for depth in 1..=3 {
            let d = bottom_up(kb, depth);
            let derivable = d.last().unwrap();
            for q in all_queries(&kb.vocabulary) {
                let r = solve(kb, &q, &cfg(Mode::Standard, depth), None).unwrap();
                let expected = instances(&q, nc).iter().any(|g| derivable.contains(g));
                assert_eq!(r.outcome.is_proved(), expected, "{q} at depth {depth}");
                if let Outcome::Proved { answer } = &r.outcome {
                    assert!(derivable.contains(answer), "unsound answer {answer}");
                    assert!(is_instance(answer, &q));
                }
            }
        }
    }
}

#[test]
fn exhaustive_proofs_match_the_tree_enumerator() {
    let mut multi_step = 0;
    for kb in small_kbs() {
        let nc = kb.vocabulary.num_constants();
        let depth = 3;
        for q in all_queries(&kb.vocabulary) {
            let c = SearchConfig {
                record_proofs: true,
                ..cfg(Mode::Exhaustive, depth)
            };
            let r = solve(&kb, &q, &c, None).unwrap();
            let mut got: Vec<(String, Steps)> = r
                .proofs
                .iter()
                .map(|p| {
                    let mut s: Steps = p.steps.iter().map(|s| (s.path.clone(), s.clause)).collect();
                    s.sort();
                    (p.answer.to_string(), s)
                })
                .collect();
            let mut want: Vec<(String, Steps)> = instances(&q, nc)
                .iter()
                .flat_map(|g| {
                    proof_trees(&kb, g, depth).into_iter().map(move |mut s| {
                        s.sort();
                        (g.to_string(), s)
                    })
                })
                .collect();
            got.sort();
            want.sort();
            assert_eq!(got, want, "proofs of {q}");
            multi_step += want.iter().filter(|(_, s)| s.len() > 2).count();
        }
    }
    assert!(multi_step > 20, "only {multi_step} proofs use more than one rule step");
}

#[test]
fn hand_built_kb_has_the_expected_proofs() {
    let clauses = parse_clauses("p0(c0).\np0(c1).\np1(V0, V1) :- p0(V0), p0(V1).").unwrap();
    let kb = KnowledgeBase::new(Vocabulary::new(vec![1, 2], 2, 2, 2).unwrap(), clauses).unwrap();
    let c = SearchConfig {
        record_proofs: true,
        ..cfg(Mode::Exhaustive, 2)
    };
    let r = solve(&kb, &parse_atom("p1(V0, V1)").unwrap(), &c, None).unwrap();
    let answers: BTreeSet<String> = r.proofs.iter().map(|p| p.answer.to_string()).collect();
    let want: BTreeSet<String> = ["p1(c0, c0)", "p1(c0, c1)", "p1(c1, c0)", "p1(c1, c1)"]
        .into_iter()
        .map(String::from)
        .collect();
    assert_eq!(answers, want);
    let r = solve(&kb, &parse_atom("p1(c1, V0)").unwrap(), &c, None).unwrap();
    assert_eq!(r.proofs.len(), 2);
    // Depth 1 admits only facts.
    let r = solve(&kb, &parse_atom("p1(c1, V0)").unwrap(), &cfg(Mode::Standard, 1), None).unwrap();
    assert_eq!(r.outcome, Outcome::Exhausted);
}

#[test]
fn positive_training_labels_cover_exactly_the_clauses_on_proofs() {
    for kb in small_kbs().into_iter().take(6) {
        let nc = kb.vocabulary.num_constants();
        let depth = 3;
        for q in all_queries(&kb.vocabulary) {
            let samples = collect_training_data(&kb, std::slice::from_ref(&q), depth, 1_000_000, 3).unwrap();
            let labelled: BTreeSet<usize> = samples
                .iter()
                .filter(|s| s.score == 1)
                .map(|s| kb.clauses.iter().position(|c| *c == s.rule).unwrap())
                .collect();
            let on_proofs: BTreeSet<usize> = instances(&q, nc)
                .iter()
                .flat_map(|g| proof_trees(&kb, g, depth))
                .flatten()
                .map(|(_, ci)| ci)
                .collect();
            assert_eq!(labelled, on_proofs, "clauses on proofs of {q}");
        }
    }
}

#[test]
fn guidance_never_changes_what_is_provable() {
    for kb in small_kbs() {
        let queries = all_queries(&kb.vocabulary);
        let std = run_query_set(&kb, &queries, &cfg(Mode::Standard, 3), None).unwrap();
        for strategy in [GoalStrategy::MinGoal, GoalStrategy::Leftmost] {
            for salt in 0..3 {
                let c = SearchConfig {
                    goal_strategy: strategy,
                    ..cfg(Mode::Guided, 3)
                };
                let g = run_query_set(&kb, &queries, &c, Some(&HashScorer(salt))).unwrap();
                for ((q, a), b) in queries.iter().zip(&std).zip(&g) {
                    assert_eq!(a.outcome.is_proved(), b.outcome.is_proved(), "{q} {strategy:?}");
                }
            }
        }
    }
}

#[test]
fn increasing_score_transforms_do_not_change_the_search() {
    for kb in small_kbs() {
        let queries = all_queries(&kb.vocabulary);
        for strategy in [GoalStrategy::MinGoal, GoalStrategy::Leftmost] {
            let c = SearchConfig {
                goal_strategy: strategy,
                ..cfg(Mode::Guided, 3)
            };
            let a = run_query_set(&kb, &queries, &c, Some(&HashScorer(9))).unwrap();
            let b = run_query_set(&kb, &queries, &c, Some(&Rescaled(HashScorer(9)))).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn raising_the_node_cap_is_monotone() {
    for kb in small_kbs() {
        for q in all_queries(&kb.vocabulary) {
            let full = solve(&kb, &q, &cfg(Mode::Standard, 3), None).unwrap();
            let mut was_proved = false;
            for cap in [1u64, 2, 3, 5, 8, 13, 21, 34, 1_000_000] {
                let c = SearchConfig {
                    node_cap: cap,
                    ..cfg(Mode::Standard, 3)
                };
                let r = solve(&kb, &q, &c, None).unwrap();
                assert!(r.nodes_explored <= cap);
                if was_proved {
                    assert!(r.outcome.is_proved());
                }
                if r.outcome.is_proved() {
                    assert_eq!(r.nodes_explored, full.nodes_explored);
                    assert_eq!(r.outcome, full.outcome);
                    was_proved = true;
                }
                if cap >= full.nodes_explored {
                    assert_eq!(r.outcome.is_proved(), full.outcome.is_proved(), "{q} cap {cap}");
                }
            }
        }
    }
}

#[test]
fn parallel_runs_equal_serial_runs() {
    let scorer = HashScorer(4);
    for kb in small_kbs().into_iter().take(4) {
        let queries = all_queries(&kb.vocabulary);
        for mode in [Mode::Standard, Mode::Exhaustive, Mode::Guided] {
            let c = SearchConfig {
                record_steps: true,
                ..cfg(mode, 3)
            };
            let s: Option<&dyn ClauseScorer> = (mode == Mode::Guided).then_some(&scorer as _);
            assert_eq!(
                run_query_set(&kb, &queries, &c, s).unwrap(),
                run_query_set_serial(&kb, &queries, &c, s).unwrap()
            );
        }
    }
}

#[test]
fn a_cap_hit_is_reported_as_failed_at_cap() {
    let clauses: Vec<Clause> = parse_clauses("p0(V0) :- p0(V0).\np0(c0).").unwrap();
    let kb = KnowledgeBase::new(Vocabulary::new(vec![1], 2, 1, 1).unwrap(), clauses).unwrap();
    let c = SearchConfig {
        node_cap: 3,
        ..cfg(Mode::Standard, 50)
    };
    let r = solve(&kb, &parse_atom("p0(c1)").unwrap(), &c, None).unwrap();
    assert_eq!(r.outcome, Outcome::FailedAtCap);
    assert_eq!(r.nodes_explored, 3);
}
