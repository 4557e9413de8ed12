//! Anchor sampling and triplet dataset generation.
//!
//! Two generators are provided. [`gen_dataset`] builds difficulty-balanced
//! triplets by transforming anchors with the policies in [`policy`];
//! [`gen_dataset_legacy`] draws a pool of random atoms and pairs each anchor
//! with a unifying and a non-unifying member of the pool.

pub mod policy;

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::logic::{parse_atom, unify, Atom, ConstId, Term, UnifyMode, VarId, Vocabulary};

pub use policy::{
    apply_policy, classify_anchor, policies_for, role_of, AnchorType, Level, Polarity, Policy,
    Role,
};

/// Draws one atom. The first slot is a variable or a constant with equal
/// probability; every later slot repeats a uniformly chosen earlier slot with
/// probability `repeat_chance` and is otherwise drawn like the first.
pub fn sample_atom<R: Rng + ?Sized>(vocab: &Vocabulary, repeat_chance: f64, rng: &mut R) -> Atom {
    let p = rng.gen_range(0..vocab.num_predicates()) as u32;
    let arity = vocab.arities()[p as usize];
    let mut args: Vec<Term> = Vec::with_capacity(arity);
    for k in 0..arity {
        if k > 0 && repeat_chance > 0.0 && rng.gen_bool(repeat_chance.min(1.0)) {
            let prev = args[rng.gen_range(0..k)];
            args.push(prev);
        } else if rng.gen_bool(0.5) {
            args.push(Term::Var(rng.gen_range(0..vocab.num_variables()) as VarId));
        } else {
            args.push(Term::Const(rng.gen_range(0..vocab.num_constants()) as ConstId));
        }
    }
    Atom::new(p, args)
}

/// Requested triplet difficulty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TripletClass {
    Easy,
    Medium,
    Hard,
}

/// Realized difficulty of an emitted triplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Difficulty {
    Easy,
    /// easy positive, hard negative
    MediumEpHn,
    /// hard positive, easy negative
    MediumHpEn,
    Hard,
    /// Produced by the legacy pool-based generator.
    Legacy,
}

impl Difficulty {
    pub fn class(self) -> Option<TripletClass> {
        match self {
            Difficulty::Easy => Some(TripletClass::Easy),
            Difficulty::MediumEpHn | Difficulty::MediumHpEn => Some(TripletClass::Medium),
            Difficulty::Hard => Some(TripletClass::Hard),
            Difficulty::Legacy => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::MediumEpHn => "medium-EP-HN",
            Difficulty::MediumHpEn => "medium-HP-EN",
            Difficulty::Hard => "hard",
            Difficulty::Legacy => "legacy",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Difficulty::Easy,
            Difficulty::MediumEpHn,
            Difficulty::MediumHpEn,
            Difficulty::Hard,
            Difficulty::Legacy,
        ]
        .into_iter()
        .find(|d| d.name() == s)
        .ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("unknown triplet class `{s}`"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub anchor: Atom,
    pub positive: Atom,
    pub negative: Atom,
    pub difficulty: Difficulty,
    /// What was asked for; differs from `difficulty` after a fallback.
    pub requested: Option<TripletClass>,
    pub positive_policy: Option<Policy>,
    pub negative_policy: Option<Policy>,
}

impl Triplet {
    pub fn fell_back(&self) -> bool {
        self.requested.is_some() && self.requested != self.difficulty.class()
    }

    /// Both labels hold under shared-name unification.
    pub fn labels_hold(&self) -> bool {
        let pos = unify(&self.anchor, &self.positive, UnifyMode::SharedNames);
        let neg = unify(&self.anchor, &self.negative, UnifyMode::SharedNames);
        matches!(pos, Ok(Some(_))) && matches!(neg, Ok(None))
    }
}

/// Counts of easy / medium / hard triplets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub easy: usize,
    pub medium: usize,
    pub hard: usize,
}

impl ClassCounts {
    fn add(&mut self, c: TripletClass) {
        match c {
            TripletClass::Easy => self.easy += 1,
            TripletClass::Medium => self.medium += 1,
            TripletClass::Hard => self.hard += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.easy + self.medium + self.hard
    }

    pub fn fractions(&self) -> (f64, f64, f64) {
        let n = self.total().max(1) as f64;
        (self.easy as f64 / n, self.medium as f64 / n, self.hard as f64 / n)
    }
}

impl fmt::Display for ClassCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "easy={} medium={} hard={}", self.easy, self.medium, self.hard)
    }
}

impl FromStr for ClassCounts {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut c = ClassCounts::default();
        for part in s.split_whitespace() {
            let (k, v) = part.split_once('=').ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("bad class count `{part}`"),
            })?;
            let n: usize = v.parse().map_err(|_| Error::Parse {
                line: 0,
                message: format!("bad class count `{part}`"),
            })?;
            match k {
                "easy" => c.easy = n,
                "medium" => c.medium = n,
                "hard" => c.hard = n,
                _ => {}
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Balanced,
    Legacy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletDataset {
    pub triplets: Vec<Triplet>,
    pub vocabulary: Vocabulary,
    pub generator: Generator,
    pub tpa: usize,
    pub mix: (f64, f64, f64),
    pub repeat_chance: f64,
    pub seed: u64,
    pub requested: ClassCounts,
    pub realized: ClassCounts,
}

impl TripletDataset {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn distinct_anchors(&self) -> usize {
        self.triplets
            .iter()
            .map(|t| &t.anchor)
            .collect::<HashSet<_>>()
            .len()
    }

    /// Splits off the last `fraction` of anchors (whole anchor groups) as a
    /// held-out set.
    pub fn split_holdout(&self, fraction: f64) -> (TripletDataset, TripletDataset) {
        let mut order: Vec<&Atom> = Vec::new();
        let mut seen = HashSet::new();
        for t in &self.triplets {
            if seen.insert(&t.anchor) {
                order.push(&t.anchor);
            }
        }
        let keep = ((1.0 - fraction) * order.len() as f64).round() as usize;
        let held: HashSet<&Atom> = order[keep..].iter().copied().collect();
        let (a, b): (Vec<Triplet>, Vec<Triplet>) = self
            .triplets
            .iter()
            .cloned()
            .partition(|t| !held.contains(&t.anchor));
        let mk = |triplets: Vec<Triplet>| TripletDataset {
            triplets,
            ..self.clone_empty()
        };
        (mk(a), mk(b))
    }

    fn clone_empty(&self) -> TripletDataset {
        TripletDataset {
            triplets: Vec::new(),
            vocabulary: self.vocabulary.clone(),
            generator: self.generator,
            tpa: self.tpa,
            mix: self.mix,
            repeat_chance: self.repeat_chance,
            seed: self.seed,
            requested: self.requested,
            realized: self.realized,
        }
    }
}

/// Picks uniformly among the listed policies for the anchor's type in the
/// given role, falling through to the others when one cannot be realized.
/// Returns `None` when the cell is empty or nothing applies.
pub fn gen_example<R: Rng + ?Sized>(
    anchor: &Atom,
    role: Role,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<Option<(Atom, Policy)>> {
    let kind = classify_anchor(anchor)?;
    let mut candidates = policies_for(kind, role).to_vec();
    candidates.shuffle(rng);
    for policy in candidates {
        if let Some(atom) = apply_policy(anchor, policy, vocab, rng)? {
            let unifies = unify(anchor, &atom, UnifyMode::SharedNames)?.is_some();
            if unifies == role.positive {
                return Ok(Some((atom, policy)));
            }
            debug_assert!(false, "{policy} gave a mislabeled example {atom} for {anchor}");
        }
    }
    Ok(None)
}

fn assemble<R: Rng + ?Sized>(
    anchor: &Atom,
    pos: Role,
    neg: Role,
    difficulty: Difficulty,
    requested: TripletClass,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<Option<Triplet>> {
    let Some((positive, pp)) = gen_example(anchor, pos, vocab, rng)? else {
        return Ok(None);
    };
    let Some((negative, np)) = gen_example(anchor, neg, vocab, rng)? else {
        return Ok(None);
    };
    Ok(Some(Triplet {
        anchor: anchor.clone(),
        positive,
        negative,
        difficulty,
        requested: Some(requested),
        positive_policy: Some(pp),
        negative_policy: Some(np),
    }))
}

fn try_medium<R: Rng + ?Sized>(
    anchor: &Atom,
    requested: TripletClass,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<Option<Triplet>> {
    let mut forms = [
        (Role::EASY_POS, Role::HARD_NEG, Difficulty::MediumEpHn),
        (Role::HARD_POS, Role::EASY_NEG, Difficulty::MediumHpEn),
    ];
    forms.shuffle(rng);
    for (p, n, d) in forms {
        if let Some(t) = assemble(anchor, p, n, d, requested, vocab, rng)? {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// Builds one triplet of the requested class.
///
/// Hard falls back to medium when no hard positive or negative exists for
/// the anchor, and medium falls back to easy. An anchor without even an easy
/// triplet is an error; callers resample the anchor.
pub fn gen_triplet<R: Rng + ?Sized>(
    anchor: &Atom,
    class: TripletClass,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<Triplet> {
    let hard = match class {
        TripletClass::Hard => assemble(
            anchor,
            Role::HARD_POS,
            Role::HARD_NEG,
            Difficulty::Hard,
            class,
            vocab,
            rng,
        )?,
        _ => None,
    };
    let medium = match (class, hard) {
        (_, Some(t)) => return Ok(t),
        (TripletClass::Easy, None) => None,
        (_, None) => try_medium(anchor, class, vocab, rng)?,
    };
    if let Some(t) = medium {
        return Ok(t);
    }
    let easy = assemble(
        anchor,
        Role::EASY_POS,
        Role::EASY_NEG,
        Difficulty::Easy,
        class,
        vocab,
        rng,
    )?;
    let t = easy.ok_or_else(|| {
        Error::Generation(format!("no easy triplet is realizable for anchor {anchor}"))
    })?;
    debug_assert!(t.labels_hold());
    Ok(t)
}

/// Knobs of the balanced generator.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetParams {
    pub n_triplets: usize,
    pub tpa: usize,
    pub mix: (f64, f64, f64),
    pub repeat_chance: f64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        DatasetParams {
            n_triplets: 20_000,
            tpa: 20,
            mix: (0.40, 0.50, 0.10),
            repeat_chance: 0.15,
        }
    }
}

fn anchor_stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn draw_class<R: Rng + ?Sized>(mix: (f64, f64, f64), rng: &mut R) -> TripletClass {
    let total = mix.0 + mix.1 + mix.2;
    let x = rng.gen::<f64>() * total;
    if x < mix.0 {
        TripletClass::Easy
    } else if x < mix.0 + mix.1 {
        TripletClass::Medium
    } else {
        TripletClass::Hard
    }
}

/// Whether the anchor can produce at least an easy triplet. Uses a
/// throwaway random stream so the caller's stream is untouched.
fn easy_realizable(anchor: &Atom, vocab: &Vocabulary) -> bool {
    let mut probe = ChaCha8Rng::seed_from_u64(0);
    Role::ALL[..]
        .iter()
        .filter(|r| r.level == Level::Easy)
        .all(|&role| {
            let kind = match classify_anchor(anchor) {
                Ok(k) => k,
                Err(_) => return false,
            };
            policies_for(kind, role).iter().any(|&p| {
                (0..4).any(|_| {
                    matches!(apply_policy(anchor, p, vocab, &mut probe), Ok(Some(_)))
                })
            })
        })
}

/// Balanced triplet generation.
///
/// Samples `⌈n/tpa⌉` distinct anchors, then emits `tpa` triplets per anchor
/// (the last anchor may get fewer, so exactly `n` triplets come out) with
/// classes drawn i.i.d. from `mix`. Each anchor's triplets come from their
/// own random stream derived from `(seed, anchor index)`, so generation is
/// parallel yet independent of scheduling.
pub fn gen_dataset(vocab: &Vocabulary, params: &DatasetParams, seed: u64) -> Result<TripletDataset> {
    if params.tpa == 0 {
        return Err(Error::Config("tpa must be at least 1".into()));
    }
    if vocab.max_arity() > 2 {
        return Err(Error::Config(
            "balanced triplets are defined for predicates of arity 1 and 2 only".into(),
        ));
    }
    let n_anchors = params.n_triplets.div_ceil(params.tpa);
    let capacity = vocab.max_unique_atoms();
    if n_anchors as u128 > capacity {
        return Err(Error::Generation(format!(
            "{n_anchors} distinct anchors needed but np*(nc+nv)^ma = {capacity}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Atom> = HashSet::with_capacity(n_anchors);
    let mut anchors = Vec::with_capacity(n_anchors);
    let max_attempts = 50 * n_anchors + 10_000;
    let mut attempts = 0;
    let mut realizable: HashMap<Atom, bool> = HashMap::new();
    while anchors.len() < n_anchors {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Generation(format!(
                "anchor space exhausted after {max_attempts} draws: {} of {n_anchors} distinct \
                 anchors found (np*(nc+nv)^ma = {capacity})",
                anchors.len()
            )));
        }
        let a = sample_atom(vocab, params.repeat_chance, &mut rng);
        if seen.contains(&a) {
            continue;
        }
        let ok = *realizable
            .entry(a.canonical())
            .or_insert_with(|| easy_realizable(&a, vocab));
        if ok {
            seen.insert(a.clone());
            anchors.push(a);
        }
    }

    let per_anchor: Vec<Result<Vec<Triplet>>> = anchors
        .par_iter()
        .enumerate()
        .map(|(i, anchor)| {
            let mut rng = anchor_stream(seed, i);
            let count = params.tpa.min(params.n_triplets - i * params.tpa);
            (0..count)
                .map(|_| {
                    let class = draw_class(params.mix, &mut rng);
                    gen_triplet(anchor, class, vocab, &mut rng)
                })
                .collect()
        })
        .collect();
    let mut triplets = Vec::with_capacity(params.n_triplets);
    for group in per_anchor {
        triplets.extend(group?);
    }
    let mut requested = ClassCounts::default();
    let mut realized = ClassCounts::default();
    for t in &triplets {
        if let Some(r) = t.requested {
            requested.add(r);
        }
        if let Some(c) = t.difficulty.class() {
            realized.add(c);
        }
    }
    Ok(TripletDataset {
        triplets,
        vocabulary: vocab.clone(),
        generator: Generator::Balanced,
        tpa: params.tpa,
        mix: params.mix,
        repeat_chance: params.repeat_chance,
        seed,
        requested,
        realized,
    })
}

/// Pool-based generation: a pool of `n_triplets` random atoms, each used as
/// an anchor paired with a unifying and a non-unifying pool member. Anchors
/// without a unifying partner are skipped. The original recipe uses
/// `repeat_chance = 0`.
pub fn gen_dataset_legacy(
    vocab: &Vocabulary,
    n_triplets: usize,
    repeat_chance: f64,
    seed: u64,
) -> Result<TripletDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<Atom> = (0..n_triplets)
        .map(|_| sample_atom(vocab, repeat_chance, &mut rng))
        .collect();
    let mut by_predicate: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, a) in pool.iter().enumerate() {
        by_predicate.entry(a.predicate).or_default().push(i);
    }
    let mut triplets = Vec::new();
    for (i, anchor) in pool.iter().enumerate() {
        // Only same-predicate atoms can unify, so scanning a shuffled bucket
        // finds the same partner distribution as scanning the shuffled pool.
        let mut bucket = by_predicate[&anchor.predicate].clone();
        bucket.shuffle(&mut rng);
        let positive = bucket
            .iter()
            .filter(|&&j| j != i)
            .find(|&&j| matches!(unify(anchor, &pool[j], UnifyMode::SharedNames), Ok(Some(_))));
        let Some(&pj) = positive else { continue };
        let mut negative = None;
        for _ in 0..(4 * pool.len()).max(16) {
            let j = rng.gen_range(0..pool.len());
            if j != i && matches!(unify(anchor, &pool[j], UnifyMode::SharedNames), Ok(None)) {
                negative = Some(j);
                break;
            }
        }
        let Some(nj) = negative else { continue };
        triplets.push(Triplet {
            anchor: anchor.clone(),
            positive: pool[pj].clone(),
            negative: pool[nj].clone(),
            difficulty: Difficulty::Legacy,
            requested: None,
            positive_policy: None,
            negative_policy: None,
        });
    }
    Ok(TripletDataset {
        triplets,
        vocabulary: vocab.clone(),
        generator: Generator::Legacy,
        tpa: 1,
        mix: (0.0, 0.0, 0.0),
        repeat_chance,
        seed,
        requested: ClassCounts::default(),
        realized: ClassCounts::default(),
    })
}

/// Tab-separated triplet file with a `%` header.
pub fn format_dataset(ds: &TripletDataset, extra_header: &[(&str, String)]) -> String {
    let mut out = String::new();
    writeln!(out, "% vocab: {}", ds.vocabulary.describe()).unwrap();
    let generator = match ds.generator {
        Generator::Balanced => "balanced",
        Generator::Legacy => "legacy",
    };
    writeln!(out, "% generator: {generator}").unwrap();
    writeln!(out, "% seed: {}", ds.seed).unwrap();
    writeln!(out, "% tpa: {}", ds.tpa).unwrap();
    writeln!(out, "% mix: {},{},{}", ds.mix.0, ds.mix.1, ds.mix.2).unwrap();
    writeln!(out, "% repeat_chance: {}", ds.repeat_chance).unwrap();
    writeln!(out, "% requested: {}", ds.requested).unwrap();
    writeln!(out, "% realized: {}", ds.realized).unwrap();
    for (k, v) in extra_header {
        writeln!(out, "% {k}: {v}").unwrap();
    }
    let policy = |p: Option<Policy>| p.map_or("-", Policy::name);
    for t in &ds.triplets {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            t.anchor,
            t.positive,
            t.negative,
            t.difficulty,
            policy(t.positive_policy),
            policy(t.negative_policy)
        )
        .unwrap();
    }
    out
}

pub fn parse_dataset(text: &str) -> Result<TripletDataset> {
    let header = crate::synth::read_header(text, "%");
    let get = |k: &str| {
        header.get(k).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("triplet file has no `% {k}:` header"),
        })
    };
    let bad = |k: &str| Error::Parse {
        line: 1,
        message: format!("bad `{k}` header"),
    };
    let vocabulary = Vocabulary::from_description(get("vocab")?)?;
    let generator = match get("generator")?.as_str() {
        "legacy" => Generator::Legacy,
        _ => Generator::Balanced,
    };
    let seed = get("seed")?.parse().map_err(|_| bad("seed"))?;
    let tpa = get("tpa")?.parse().map_err(|_| bad("tpa"))?;
    let mix: Vec<f64> = get("mix")?
        .split(',')
        .map(|x| x.parse().map_err(|_| bad("mix")))
        .collect::<Result<_>>()?;
    if mix.len() != 3 {
        return Err(bad("mix"));
    }
    let repeat_chance = get("repeat_chance")?.parse().map_err(|_| bad("repeat_chance"))?;
    let requested = get("requested")?.parse()?;
    let realized = get("realized")?.parse()?;
    let mut triplets = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('%') || line.trim().is_empty() {
            continue;
        }
        let at = |e: Error| match e {
            Error::Parse { message, .. } => Error::Parse {
                line: i + 1,
                message,
            },
            other => other,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 6 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 6 tab-separated columns, found {}", cols.len()),
            });
        }
        let policy = |s: &str| -> Result<Option<Policy>> {
            if s == "-" {
                Ok(None)
            } else {
                s.parse().map(Some)
            }
        };
        let difficulty: Difficulty = cols[3].parse().map_err(at)?;
        triplets.push(Triplet {
            anchor: parse_atom(cols[0]).map_err(at)?,
            positive: parse_atom(cols[1]).map_err(at)?,
            negative: parse_atom(cols[2]).map_err(at)?,
            difficulty,
            requested: difficulty.class(),
            positive_policy: policy(cols[4]).map_err(at)?,
            negative_policy: policy(cols[5]).map_err(at)?,
        });
    }
    Ok(TripletDataset {
        triplets,
        vocabulary,
        generator,
        tpa,
        mix: (mix[0], mix[1], mix[2]),
        repeat_chance,
        seed,
        requested,
        realized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        Vocabulary::generate(20, 200, 10, 2, &mut rng).unwrap()
    }

    #[test]
    fn full_repeat_chance_copies_first_slot() {
        let v = Vocabulary::new(vec![2], 200, 10, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let a = sample_atom(&v, 1.0, &mut rng);
            assert_eq!(a.args[0], a.args[1]);
        }
    }

    #[test]
    fn hard_request_on_unary_anchor_falls_back_to_medium() {
        let v = vocab();
        let unary = v.predicates_with_arity(1)[0];
        let anchor = Atom::new(unary, vec![Term::Var(1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = gen_triplet(&anchor, TripletClass::Hard, &v, &mut rng).unwrap();
        assert_eq!(t.difficulty, Difficulty::MediumEpHn);
        assert!(t.fell_back());
        assert!(t.labels_hold());
    }

    #[test]
    fn easy_binary_consts_uses_listed_policies() {
        let v = vocab();
        let binary = v.predicates_with_arity(2)[0];
        let anchor = Atom::new(binary, vec![Term::Const(1), Term::Const(2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let t = gen_triplet(&anchor, TripletClass::Easy, &v, &mut rng).unwrap();
            assert_eq!(t.positive_policy, Some(Policy::Ocnv));
            assert!(matches!(
                t.negative_policy,
                Some(Policy::NpAr | Policy::NpAg | Policy::NAllAg)
            ));
            assert!(t.labels_hold());
        }
    }

    #[test]
    fn anchor_count_and_tpa() {
        let v = vocab();
        let params = DatasetParams {
            n_triplets: 1_001,
            tpa: 20,
            ..DatasetParams::default()
        };
        let ds = gen_dataset(&v, &params, 4).unwrap();
        assert_eq!(ds.len(), 1_001);
        assert_eq!(ds.distinct_anchors(), 51);
        let mut per_anchor: HashMap<&Atom, usize> = HashMap::new();
        for t in &ds.triplets {
            *per_anchor.entry(&t.anchor).or_default() += 1;
        }
        assert!(per_anchor.values().all(|&n| n <= 20));
    }

    #[test]
    fn easy_only_mix() {
        let v = vocab();
        let params = DatasetParams {
            n_triplets: 500,
            mix: (1.0, 0.0, 0.0),
            ..DatasetParams::default()
        };
        let ds = gen_dataset(&v, &params, 5).unwrap();
        assert_eq!(ds.requested, ds.realized);
        assert_eq!(ds.realized.easy, 500);
    }

    #[test]
    fn anchor_space_exhaustion() {
        let v = Vocabulary::new(vec![1], 2, 1, 1).unwrap();
        let params = DatasetParams {
            n_triplets: 100,
            tpa: 1,
            ..DatasetParams::default()
        };
        assert!(matches!(gen_dataset(&v, &params, 0), Err(Error::Generation(_))));
    }

    #[test]
    fn legacy_single_atom_pool() {
        let ds = gen_dataset_legacy(&vocab(), 1, 0.0, 0).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn dataset_file_round_trip() {
        let v = vocab();
        let params = DatasetParams {
            n_triplets: 200,
            ..DatasetParams::default()
        };
        let ds = gen_dataset(&v, &params, 6).unwrap();
        let text = format_dataset(&ds, &[]);
        let back = parse_dataset(&text).unwrap();
        assert_eq!(format_dataset(&back, &[]), text);
        assert_eq!(back.triplets.len(), ds.triplets.len());
    }

    #[test]
    fn generation_is_deterministic() {
        let v = vocab();
        let params = DatasetParams {
            n_triplets: 300,
            ..DatasetParams::default()
        };
        assert_eq!(gen_dataset(&v, &params, 8).unwrap(), gen_dataset(&v, &params, 8).unwrap());
    }
}
