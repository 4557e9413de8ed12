//! Synthetic vocabularies, knowledge bases, forward chaining and query sets.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::logic::{Atom, Clause, KnowledgeBase, Term, VarId, Vocabulary};

/// Parameters of one generated knowledge base.
#[derive(Debug, Clone, PartialEq)]
pub struct KbGenConfig {
    pub kb_size: usize,
    pub num_predicates: usize,
    pub num_constants: usize,
    pub num_variables: usize,
    pub max_arity: usize,
    pub fact_fraction: f64,
    pub max_body_len: usize,
    /// Admit rules in which some variable occurs only once.
    pub singleton_vars: bool,
    pub rng_seed: u64,
}

impl Default for KbGenConfig {
    fn default() -> Self {
        KbGenConfig {
            kb_size: 250,
            num_predicates: 20,
            num_constants: 200,
            num_variables: 10,
            max_arity: 2,
            fact_fraction: 0.8,
            max_body_len: 2,
            singleton_vars: false,
            rng_seed: 0,
        }
    }
}

impl KbGenConfig {
    fn validate(&self) -> Result<()> {
        if self.kb_size == 0 {
            return Err(Error::Config("kb_size must be at least 1".into()));
        }
        if self.max_body_len == 0 {
            return Err(Error::Config("max_body_len must be at least 1".into()));
        }
        if !(self.fact_fraction > 0.0 && self.fact_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "fact_fraction {} outside (0, 1]",
                self.fact_fraction
            )));
        }
        Ok(())
    }
}

/// Uniform arities in `1..=ma`, at least one predicate of arity `ma`.
pub fn gen_vocabulary<R: Rng + ?Sized>(
    num_predicates: usize,
    num_constants: usize,
    num_variables: usize,
    max_arity: usize,
    rng: &mut R,
) -> Result<Vocabulary> {
    Vocabulary::generate(num_predicates, num_constants, num_variables, max_arity, rng)
}

/// Generates the vocabulary and then the knowledge base from `config.rng_seed`.
pub fn gen_kb(config: &KbGenConfig) -> Result<KnowledgeBase> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let vocab = gen_vocabulary(
        config.num_predicates,
        config.num_constants,
        config.num_variables,
        config.max_arity,
        &mut rng,
    )?;
    gen_kb_with_vocabulary(&vocab, config, &mut rng)
}

const RULE_VAR_PROB: f64 = 0.8;
const HEAD_VAR_PROB: f64 = 0.9;

fn random_term<R: Rng + ?Sized>(vocab: &Vocabulary, rng: &mut R) -> Term {
    Term::Const(rng.gen_range(0..vocab.num_constants()) as u32)
}

fn random_fact<R: Rng + ?Sized>(vocab: &Vocabulary, rng: &mut R) -> Atom {
    let p = rng.gen_range(0..vocab.num_predicates()) as u32;
    let arity = vocab.arities()[p as usize];
    Atom::new(p, (0..arity).map(|_| random_term(vocab, rng)).collect())
}

/// Rule variables come from a small slice of the variable pool so that body
/// atoms share variables and form joins.
fn random_rule<R: Rng + ?Sized>(vocab: &Vocabulary, max_body_len: usize, rng: &mut R) -> Clause {
    let var_pool = vocab.num_variables().min(vocab.max_arity() + 1).max(1);
    let body_len = rng.gen_range(1..=max_body_len);
    let body: Vec<Atom> = (0..body_len)
        .map(|_| {
            let p = rng.gen_range(0..vocab.num_predicates()) as u32;
            let arity = vocab.arities()[p as usize];
            let args = (0..arity)
                .map(|_| {
                    if rng.gen_bool(RULE_VAR_PROB) {
                        Term::Var(rng.gen_range(0..var_pool) as VarId)
                    } else {
                        random_term(vocab, rng)
                    }
                })
                .collect();
            Atom::new(p, args)
        })
        .collect();
    let body_vars: Vec<VarId> = Clause::rule(body[0].clone(), body.clone()).variables();
    let hp = rng.gen_range(0..vocab.num_predicates()) as u32;
    let harity = vocab.arities()[hp as usize];
    let head_args = (0..harity)
        .map(|_| {
            if !body_vars.is_empty() && rng.gen_bool(HEAD_VAR_PROB) {
                Term::Var(*body_vars.choose(rng).unwrap())
            } else {
                random_term(vocab, rng)
            }
        })
        .collect();
    Clause::rule(Atom::new(hp, head_args), body)
}

/// Generates `config.kb_size` distinct clauses over an existing vocabulary.
///
/// `⌈fact_fraction · kb_size⌉` of them are ground facts, the rest are safe
/// rules whose body length is uniform in `1..=max_body_len`. Facts and rules
/// are shuffled together, so KB order (which the unguided reasoner follows)
/// carries no structure.
pub fn gen_kb_with_vocabulary<R: Rng + ?Sized>(
    vocab: &Vocabulary,
    config: &KbGenConfig,
    rng: &mut R,
) -> Result<KnowledgeBase> {
    config.validate()?;
    let n_facts = ((config.fact_fraction * config.kb_size as f64).ceil() as usize).min(config.kb_size);
    let n_rules = config.kb_size - n_facts;
    let ground_atoms = {
        let nc = vocab.num_constants() as u128;
        vocab
            .arities()
            .iter()
            .map(|&a| nc.saturating_pow(a as u32))
            .fold(0u128, |x, y| x.saturating_add(y))
    };
    if n_facts as u128 > ground_atoms {
        return Err(Error::Generation(format!(
            "{n_facts} distinct facts requested but the vocabulary has only {ground_atoms} ground atoms"
        )));
    }
    let max_attempts = 1000 * config.kb_size + 10_000;
    let mut seen: HashSet<Clause> = HashSet::new();
    let mut clauses = Vec::with_capacity(config.kb_size);

    let mut attempts = 0;
    while clauses.len() < n_facts {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Generation(format!(
                "could not draw {n_facts} distinct facts after {max_attempts} attempts"
            )));
        }
        let fact = Clause::fact(random_fact(vocab, rng));
        if seen.insert(fact.canonical()) {
            clauses.push(fact);
        }
    }
    attempts = 0;
    while clauses.len() < n_facts + n_rules {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Generation(format!(
                "could not draw {n_rules} distinct safe rules after {max_attempts} attempts"
            )));
        }
        let rule = random_rule(vocab, config.max_body_len, rng);
        if !rule.is_safe()
            || rule.body.contains(&rule.head)
            || (!config.singleton_vars && has_singleton(&rule))
        {
            continue;
        }
        if seen.insert(rule.canonical()) {
            clauses.push(rule);
        }
    }
    clauses.shuffle(rng);
    KnowledgeBase::new(vocab.clone(), clauses)
}

fn has_singleton(rule: &Clause) -> bool {
    let mut counts: HashMap<VarId, usize> = HashMap::new();
    for atom in std::iter::once(&rule.head).chain(&rule.body) {
        for t in &atom.args {
            if let Term::Var(v) = t {
                *counts.entry(*v).or_default() += 1;
            }
        }
    }
    counts.values().any(|&n| n == 1)
}

/// A fact found by forward chaining, with the round that derived it.
///
/// Round `r` facts have a proof tree of height `r + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedFact {
    pub atom: Atom,
    pub round: usize,
}

fn match_ground(pattern: &Atom, fact: &Atom, binding: &mut Vec<(VarId, u32)>) -> bool {
    let mark = binding.len();
    for (t, g) in pattern.args.iter().zip(&fact.args) {
        let Term::Const(gc) = *g else { unreachable!("facts are ground") };
        match *t {
            Term::Const(c) => {
                if c != gc {
                    binding.truncate(mark);
                    return false;
                }
            }
            Term::Var(v) => match binding.iter().find(|(bv, _)| *bv == v) {
                Some(&(_, bc)) if bc != gc => {
                    binding.truncate(mark);
                    return false;
                }
                Some(_) => {}
                None => binding.push((v, gc)),
            },
        }
    }
    true
}

fn instantiate(atom: &Atom, binding: &[(VarId, u32)]) -> Atom {
    Atom::new(
        atom.predicate,
        atom.args
            .iter()
            .map(|t| match *t {
                Term::Var(v) => Term::Const(
                    binding
                        .iter()
                        .find(|(bv, _)| *bv == v)
                        .map(|(_, c)| *c)
                        .expect("safe rule binds every head variable"),
                ),
                c => c,
            })
            .collect(),
    )
}

/// Facts of one predicate, split by age for semi-naive joins.
struct FactIndex {
    old: HashMap<u32, Vec<Atom>>,
    delta: HashMap<u32, Vec<Atom>>,
}

impl FactIndex {
    fn source(&self, pred: u32, which: Source) -> impl Iterator<Item = &Atom> {
        let empty: &[Atom] = &[];
        let old = self.old.get(&pred).map_or(empty, |v| v.as_slice());
        let delta = self.delta.get(&pred).map_or(empty, |v| v.as_slice());
        match which {
            Source::Old => old.iter().chain(empty.iter()),
            Source::Delta => delta.iter().chain(empty.iter()),
            Source::All => old.iter().chain(delta.iter()),
        }
    }
}

#[derive(Clone, Copy)]
enum Source {
    Old,
    Delta,
    All,
}

fn join(
    body: &[Atom],
    pos: usize,
    delta_pos: usize,
    index: &FactIndex,
    binding: &mut Vec<(VarId, u32)>,
    head: &Atom,
    out: &mut Vec<Atom>,
) {
    if pos == body.len() {
        out.push(instantiate(head, binding));
        return;
    }
    let which = match pos.cmp(&delta_pos) {
        std::cmp::Ordering::Less => Source::Old,
        std::cmp::Ordering::Equal => Source::Delta,
        std::cmp::Ordering::Greater => Source::All,
    };
    for fact in index.source(body[pos].predicate, which) {
        let mark = binding.len();
        if match_ground(&body[pos], fact, binding) {
            join(body, pos + 1, delta_pos, index, binding, head, out);
            binding.truncate(mark);
        }
    }
}

/// Semi-naive bottom-up evaluation to the least fixpoint.
///
/// Returns only facts not already in the KB, round by round, sorted within a
/// round, truncated once `max_new_facts` have been found.
pub fn forward_chain(kb: &KnowledgeBase, max_new_facts: usize) -> Vec<DerivedFact> {
    let rules: Vec<&Clause> = kb.rules().collect();
    let mut known: HashSet<Atom> = kb.facts().map(|c| c.head.clone()).collect();
    let mut index = FactIndex {
        old: HashMap::new(),
        delta: HashMap::new(),
    };
    let mut initial: Vec<Atom> = known.iter().cloned().collect();
    initial.sort();
    for a in initial {
        index.delta.entry(a.predicate).or_default().push(a);
    }
    let mut derived = Vec::new();
    let mut round = 0;
    while !index.delta.is_empty() && derived.len() < max_new_facts {
        round += 1;
        let mut fresh: Vec<Atom> = Vec::new();
        let mut binding = Vec::new();
        for rule in &rules {
            for delta_pos in 0..rule.body.len() {
                join(
                    &rule.body,
                    0,
                    delta_pos,
                    &index,
                    &mut binding,
                    &rule.head,
                    &mut fresh,
                );
            }
        }
        fresh.sort();
        fresh.dedup();
        fresh.retain(|a| !known.contains(a));
        fresh.truncate(max_new_facts - derived.len());
        for (pred, atoms) in std::mem::take(&mut index.delta) {
            index.old.entry(pred).or_default().extend(atoms);
        }
        for a in &fresh {
            known.insert(a.clone());
            index.delta.entry(a.predicate).or_default().push(a.clone());
            derived.push(DerivedFact {
                atom: a.clone(),
                round,
            });
        }
    }
    derived
}

/// Training and test queries; disjoint as canonical forms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySet {
    pub train: Vec<Atom>,
    pub test: Vec<Atom>,
}

/// Replaces each distinct constant by a variable with probability
/// `var_sub_prob`; repeated occurrences of one constant share the variable.
pub fn generalize_fact<R: Rng + ?Sized>(fact: &Atom, var_sub_prob: f64, rng: &mut R) -> Atom {
    let mut map: BTreeMap<u32, Option<VarId>> = BTreeMap::new();
    let mut next_var = 0;
    let args = fact
        .args
        .iter()
        .map(|t| match *t {
            Term::Const(c) => {
                let slot = map.entry(c).or_insert_with(|| {
                    if rng.gen_bool(var_sub_prob) {
                        next_var += 1;
                        Some(next_var - 1)
                    } else {
                        None
                    }
                });
                match slot {
                    Some(v) => Term::Var(*v),
                    None => Term::Const(c),
                }
            }
            v => v,
        })
        .collect();
    Atom::new(fact.predicate, args)
}

/// Samples distinct derived facts, generalizes them and splits the result.
pub fn gen_queries<R: Rng + ?Sized>(
    derived: &[Atom],
    n_train: usize,
    n_test: usize,
    var_sub_prob: f64,
    rng: &mut R,
) -> Result<QuerySet> {
    let needed = n_train + n_test;
    if derived.len() < needed {
        return Err(Error::Generation(format!(
            "only {} derived facts for {needed} queries; use a larger KB or deeper forward chaining",
            derived.len()
        )));
    }
    let mut order: Vec<usize> = (0..derived.len()).collect();
    order.shuffle(rng);
    let mut seen = HashSet::new();
    let mut queries = Vec::with_capacity(needed);
    for i in order {
        let q = generalize_fact(&derived[i], var_sub_prob, rng);
        if seen.insert(q.canonical()) {
            queries.push(q);
            if queries.len() == needed {
                break;
            }
        }
    }
    if queries.len() < needed {
        return Err(Error::Generation(format!(
            "only {} distinct queries after generalization, {needed} needed; use a larger KB",
            queries.len()
        )));
    }
    let test = queries.split_off(n_train);
    Ok(QuerySet {
        train: queries,
        test,
    })
}

/// KB file: a `%` header block followed by one clause per line.
pub fn format_kb(kb: &KnowledgeBase, header: &[(&str, String)]) -> String {
    let mut out = String::new();
    writeln!(out, "% vocab: {}", kb.vocabulary.describe()).unwrap();
    for (k, v) in header {
        writeln!(out, "% {k}: {v}").unwrap();
    }
    for c in &kb.clauses {
        writeln!(out, "{c}").unwrap();
    }
    out
}

/// Reads `% key: value` header lines from any of the text artifacts.
pub fn read_header(text: &str, comment: &str) -> BTreeMap<String, String> {
    text.lines()
        .map_while(|l| l.strip_prefix(comment))
        .filter_map(|l| l.split_once(':'))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

pub fn parse_kb(text: &str) -> Result<KnowledgeBase> {
    let header = read_header(text, "%");
    let vocab = header
        .get("vocab")
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "KB file has no `% vocab:` header".into(),
        })
        .and_then(|d| Vocabulary::from_description(d))?;
    KnowledgeBase::new(vocab, crate::logic::parse_clauses(text)?)
}

/// Query file: header comments, then `# train` and `# test` sections.
pub fn format_queries(qs: &QuerySet, header: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in header {
        writeln!(out, "% {k}: {v}").unwrap();
    }
    writeln!(out, "# train").unwrap();
    for q in &qs.train {
        writeln!(out, "{q}").unwrap();
    }
    writeln!(out, "# test").unwrap();
    for q in &qs.test {
        writeln!(out, "{q}").unwrap();
    }
    out
}

pub fn parse_queries(text: &str) -> Result<QuerySet> {
    let mut qs = QuerySet {
        train: Vec::new(),
        test: Vec::new(),
    };
    let mut section: Option<bool> = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        match line {
            "# train" => section = Some(true),
            "# test" => section = Some(false),
            _ => {
                let atom = crate::logic::parse_atom(line).map_err(|e| match e {
                    Error::Parse { message, .. } => Error::Parse {
                        line: i + 1,
                        message,
                    },
                    other => other,
                })?;
                match section {
                    Some(true) => qs.train.push(atom),
                    Some(false) => qs.test.push(atom),
                    None => {
                        return Err(Error::Parse {
                            line: i + 1,
                            message: "query before `# train` / `# test` marker".into(),
                        })
                    }
                }
            }
        }
    }
    Ok(qs)
}
