//! Depth-bounded backward chaining with node accounting.
//!
//! A *node* is one attempted resolution of an open goal against one clause
//! of the goal's predicate, whether or not the unification succeeds. The
//! query sits at depth 1 and a rule's body goals sit one level below the goal
//! they replace; goals deeper than the depth limit are never expanded.
//!
//! Three modes share the same search loop:
//!
//! * standard: clauses in knowledge-base order, leftmost goal first;
//! * exhaustive: clause and subgoal order shuffled at every expansion, no
//!   stop at the first proof (used to label training data);
//! * guided: clauses ordered by a learned score, goal chosen by a
//!   [`GoalStrategy`].

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::rc::Rc;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::encoder::fit_to_pool;
use crate::error::{Error, Result};
use crate::logic::{
    parse_atom, parse_clause, standardize_apart, unify, Atom, Clause, FreshVars, KnowledgeBase,
    UnifyMode,
};
use crate::neural::{goal_vector, rule_vector, EmbeddingModel, ScoringModel, TrainingSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Standard,
    Exhaustive,
    Guided,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Standard => "standard",
            Mode::Exhaustive => "exhaustive",
            Mode::Guided => "guided",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Mode::Standard),
            "exhaustive" => Ok(Mode::Exhaustive),
            "guided" => Ok(Mode::Guided),
            _ => Err(Error::Config(format!("unknown search mode `{s}`"))),
        }
    }
}

/// Which open goal guided search expands next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GoalStrategy {
    /// The goal whose best candidate clause scores lowest (fail first).
    /// Goals with no candidate clause, or too deep to expand, come first.
    /// Ties go to the earlier goal.
    #[default]
    MinGoal,
    /// The first open goal.
    Leftmost,
}

impl GoalStrategy {
    pub fn name(self) -> &'static str {
        match self {
            GoalStrategy::MinGoal => "min-goal",
            GoalStrategy::Leftmost => "leftmost",
        }
    }
}

impl FromStr for GoalStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-goal" => Ok(GoalStrategy::MinGoal),
            "leftmost" => Ok(GoalStrategy::Leftmost),
            _ => Err(Error::Config(format!("unknown goal strategy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub depth_limit: usize,
    pub node_cap: u64,
    pub mode: Mode,
    pub goal_strategy: GoalStrategy,
    pub rng_seed: u64,
    /// Keep every completed proof (exhaustive mode).
    pub record_proofs: bool,
    /// Keep the distinct (goal, clause) pairs that unified.
    pub record_steps: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            depth_limit: 5,
            node_cap: 1_000_000,
            mode: Mode::Standard,
            goal_strategy: GoalStrategy::MinGoal,
            rng_seed: 0,
            record_proofs: false,
            record_steps: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth_limit == 0 {
            return Err(Error::Config("depth_limit must be at least 1".into()));
        }
        if self.node_cap == 0 {
            return Err(Error::Config("node_cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// `answer` is the query with the answer substitution applied.
    Proved { answer: Atom },
    Exhausted,
    FailedAtCap,
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Proved { .. } => "proved",
            Outcome::Exhausted => "exhausted",
            Outcome::FailedAtCap => "failed-at-cap",
        }
    }

    pub fn is_proved(&self) -> bool {
        matches!(self, Outcome::Proved { .. })
    }
}

/// One resolution step of a proof: the clause used for the goal at `path`,
/// where `path` lists body positions from the query down.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProofStep {
    pub path: Vec<usize>,
    pub clause: usize,
}

/// A completed proof tree, steps sorted by path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Proof {
    pub answer: Atom,
    pub steps: Vec<ProofStep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProofResult {
    pub outcome: Outcome,
    pub nodes_explored: u64,
    /// Depth of the proof found, or the deepest goal expanded otherwise.
    pub depth_reached: usize,
    pub proofs: Vec<Proof>,
    /// Distinct (goal, clause index) pairs that unified, in discovery order.
    pub steps: Vec<(Atom, usize)>,
}

/// A trained embedding and scoring model bound to one knowledge base.
pub struct Guidance<'a> {
    em: &'a EmbeddingModel,
    sm: &'a ScoringModel,
    rule_vectors: Vec<Vec<f64>>,
}

impl<'a> Guidance<'a> {
    pub fn new(kb: &KnowledgeBase, em: &'a EmbeddingModel, sm: &'a ScoringModel) -> Result<Self> {
        em.check_vocabulary(&kb.vocabulary)?;
        sm.check_embedding(em)?;
        let rule_vectors = kb
            .clauses
            .iter()
            .map(|c| rule_vector(em, c, sm.rule_repr))
            .collect::<Result<_>>()?;
        Ok(Guidance {
            em,
            sm,
            rule_vectors,
        })
    }

    /// Scores of `goal` against each clause in `bucket`.
    pub fn scores(&self, goal: &Atom, bucket: &[usize]) -> Vec<f64> {
        if bucket.is_empty() {
            return Vec::new();
        }
        let g = goal_vector(self.em, goal).expect("goal fitted to the vocabulary");
        let rules: Vec<Vec<f64>> = bucket.iter().map(|&i| self.rule_vectors[i].clone()).collect();
        self.sm.score_many(&g, &rules)
    }
}

/// Source of clause scores for guided search. Lets tests substitute
/// hand-written scores for trained models.
pub trait ClauseScorer: Sync {
    fn scores(&self, goal: &Atom, bucket: &[usize]) -> Vec<f64>;
}

impl ClauseScorer for Guidance<'_> {
    fn scores(&self, goal: &Atom, bucket: &[usize]) -> Vec<f64> {
        Guidance::scores(self, goal, bucket)
    }
}

#[derive(Clone)]
struct OpenGoal {
    atom: Atom,
    depth: usize,
    path: Vec<usize>,
}

struct CapHit {
    found: bool,
}

struct Searcher<'k> {
    kb: &'k KnowledgeBase,
    buckets: &'k [Vec<usize>],
    cfg: &'k SearchConfig,
    scorer: Option<&'k dyn ClauseScorer>,
    score_cache: HashMap<Atom, Rc<Vec<f64>>>,
    rng: ChaCha8Rng,
    fresh: FreshVars,
    nodes: u64,
    max_depth: usize,
    branch: Vec<(ProofStep, usize)>,
    first: Option<(Atom, usize)>,
    proofs: Vec<Proof>,
    step_set: HashSet<(Atom, usize)>,
    steps: Vec<(Atom, usize)>,
    samples: Vec<(Atom, usize, bool)>,
    collect_samples: bool,
}

impl Searcher<'_> {
    fn bucket(&self, goal: &Atom) -> &[usize] {
        self.buckets
            .get(goal.predicate as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    fn cached_scores(&mut self, goal: &Atom) -> Rc<Vec<f64>> {
        let key = fit_to_pool(goal, self.kb.vocabulary.num_variables());
        if let Some(s) = self.score_cache.get(&key) {
            return Rc::clone(s);
        }
        let bucket = self.bucket(goal).to_vec();
        let scores = Rc::new(self.scorer.expect("guided search has a scorer").scores(&key, &bucket));
        self.score_cache.insert(key, Rc::clone(&scores));
        scores
    }

    fn select(&mut self, goals: &[OpenGoal]) -> usize {
        if self.cfg.mode != Mode::Guided || self.cfg.goal_strategy == GoalStrategy::Leftmost {
            return 0;
        }
        let mut best = (f64::INFINITY, 0);
        for (i, g) in goals.iter().enumerate() {
            let key = if g.depth > self.cfg.depth_limit || self.bucket(&g.atom).is_empty() {
                f64::NEG_INFINITY
            } else {
                self.cached_scores(&g.atom)
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            if key < best.0 {
                best = (key, i);
            }
        }
        best.1
    }

    fn candidates(&mut self, goal: &Atom) -> Vec<usize> {
        let mut order: Vec<usize> = self.bucket(goal).to_vec();
        match self.cfg.mode {
            Mode::Standard => {}
            Mode::Exhaustive => order.shuffle(&mut self.rng),
            Mode::Guided => {
                let scores = self.cached_scores(goal);
                let mut ranked: Vec<(usize, usize)> = order.iter().copied().enumerate().collect();
                ranked.sort_by(|a, b| scores[b.0].total_cmp(&scores[a.0]).then(a.0.cmp(&b.0)));
                order = ranked.into_iter().map(|(_, c)| c).collect();
            }
        }
        order
    }

    fn on_proof(&mut self, answer: &Atom) {
        let depth = self.branch.iter().map(|(_, d)| *d).max().unwrap_or(0);
        if self.first.is_none() {
            self.first = Some((answer.clone(), depth));
        }
        if self.cfg.record_proofs {
            let mut steps: Vec<ProofStep> = self.branch.iter().map(|(s, _)| s.clone()).collect();
            steps.sort();
            self.proofs.push(Proof {
                answer: answer.clone(),
                steps,
            });
        }
    }

    /// Returns whether a proof was found below this point.
    fn expand(&mut self, goals: Vec<OpenGoal>, answer: Atom) -> std::result::Result<bool, CapHit> {
        if goals.is_empty() {
            self.on_proof(&answer);
            return Ok(true);
        }
        let gi = self.select(&goals);
        let goal = goals[gi].clone();
        if goal.depth > self.cfg.depth_limit {
            return Ok(false);
        }
        self.max_depth = self.max_depth.max(goal.depth);
        let exhaustive = self.cfg.mode == Mode::Exhaustive;
        let mut any = false;
        for ci in self.candidates(&goal.atom) {
            if self.nodes >= self.cfg.node_cap {
                return Err(CapHit { found: any });
            }
            self.nodes += 1;
            let clause = standardize_apart(&self.kb.clauses[ci], &mut self.fresh);
            let theta = match unify(&goal.atom, &clause.head, UnifyMode::SharedNames) {
                Ok(Some(t)) => t,
                _ => continue,
            };
            if self.cfg.record_steps && self.step_set.insert((goal.atom.clone(), ci)) {
                self.steps.push((goal.atom.clone(), ci));
            }
            let mut body: Vec<(usize, Atom)> = clause
                .body
                .iter()
                .map(|b| theta.apply(b))
                .enumerate()
                .collect();
            if exhaustive {
                body.shuffle(&mut self.rng);
            }
            let mut next: Vec<OpenGoal> = Vec::with_capacity(goals.len() + body.len());
            next.extend(goals[..gi].iter().map(|g| OpenGoal {
                atom: theta.apply(&g.atom),
                ..g.clone()
            }));
            next.extend(body.into_iter().map(|(j, atom)| {
                let mut path = goal.path.clone();
                path.push(j);
                OpenGoal {
                    atom,
                    depth: goal.depth + 1,
                    path,
                }
            }));
            next.extend(goals[gi + 1..].iter().map(|g| OpenGoal {
                atom: theta.apply(&g.atom),
                ..g.clone()
            }));
            self.branch.push((
                ProofStep {
                    path: goal.path.clone(),
                    clause: ci,
                },
                goal.depth,
            ));
            let below = self.expand(next, theta.apply(&answer));
            self.branch.pop();
            match below {
                Ok(found) => {
                    if self.collect_samples {
                        self.samples.push((goal.atom.clone(), ci, found));
                    }
                    any |= found;
                    if found && !exhaustive {
                        return Ok(true);
                    }
                }
                Err(CapHit { found }) => {
                    if self.collect_samples && found {
                        self.samples.push((goal.atom.clone(), ci, true));
                    }
                    return Err(CapHit { found: any || found });
                }
            }
        }
        Ok(any)
    }
}

fn query_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

struct RawRun {
    result: ProofResult,
    samples: Vec<(Atom, usize, bool)>,
}

fn run(
    kb: &KnowledgeBase,
    buckets: &[Vec<usize>],
    query: &Atom,
    cfg: &SearchConfig,
    scorer: Option<&dyn ClauseScorer>,
    rng: ChaCha8Rng,
    collect_samples: bool,
) -> Result<RawRun> {
    cfg.validate()?;
    kb.vocabulary
        .check_atom(query, true)
        .map_err(|e| Error::Vocabulary(format!("query {query}: {e}")))?;
    if cfg.mode == Mode::Guided && scorer.is_none() {
        return Err(Error::Config("guided search needs trained models".into()));
    }
    let max_kb_var = kb.clauses.iter().filter_map(Clause::max_var).max();
    let first_fresh = [
        Some(kb.vocabulary.num_variables() as u32),
        max_kb_var.map(|v| v + 1),
        query.max_var().map(|v| v + 1),
    ]
    .into_iter()
    .flatten()
    .max()
    .unwrap_or(0);
    let mut s = Searcher {
        kb,
        buckets,
        cfg,
        scorer,
        score_cache: HashMap::new(),
        rng,
        fresh: FreshVars::starting_at(first_fresh),
        nodes: 0,
        max_depth: 0,
        branch: Vec::new(),
        first: None,
        proofs: Vec::new(),
        step_set: HashSet::new(),
        steps: Vec::new(),
        samples: Vec::new(),
        collect_samples,
    };
    let start = vec![OpenGoal {
        atom: query.clone(),
        depth: 1,
        path: Vec::new(),
    }];
    let capped = s.expand(start, query.clone()).is_err();
    let (outcome, depth) = match s.first.take() {
        Some((answer, depth)) => (Outcome::Proved { answer }, depth),
        None if capped => (Outcome::FailedAtCap, s.max_depth),
        None => (Outcome::Exhausted, s.max_depth),
    };
    Ok(RawRun {
        result: ProofResult {
            outcome,
            nodes_explored: s.nodes,
            depth_reached: depth,
            proofs: s.proofs,
            steps: s.steps,
        },
        samples: s.samples,
    })
}

/// Runs one query. Guided mode needs a scorer; the others ignore it.
pub fn solve(
    kb: &KnowledgeBase,
    query: &Atom,
    cfg: &SearchConfig,
    scorer: Option<&dyn ClauseScorer>,
) -> Result<ProofResult> {
    let buckets = kb.predicate_index();
    Ok(run(kb, &buckets, query, cfg, scorer, query_rng(cfg.rng_seed, 0), false)?.result)
}

/// Solves each query independently; query `i` uses random stream `i`, so
/// results do not depend on scheduling.
pub fn run_query_set(
    kb: &KnowledgeBase,
    queries: &[Atom],
    cfg: &SearchConfig,
    scorer: Option<&dyn ClauseScorer>,
) -> Result<Vec<ProofResult>> {
    let buckets = kb.predicate_index();
    queries
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            Ok(run(kb, &buckets, q, cfg, scorer, query_rng(cfg.rng_seed, i), false)?.result)
        })
        .collect()
}

/// Like [`run_query_set`], also returning each query's wall time in milliseconds.
pub fn run_query_set_timed(
    kb: &KnowledgeBase,
    queries: &[Atom],
    cfg: &SearchConfig,
    scorer: Option<&dyn ClauseScorer>,
) -> Result<(Vec<ProofResult>, Vec<u128>)> {
    let buckets = kb.predicate_index();
    let timed: Vec<(ProofResult, u128)> = queries
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let start = std::time::Instant::now();
            let r = run(kb, &buckets, q, cfg, scorer, query_rng(cfg.rng_seed, i), false)?.result;
            Ok((r, start.elapsed().as_millis()))
        })
        .collect::<Result<_>>()?;
    Ok(timed.into_iter().unzip())
}

/// Serial reference for [`run_query_set`].
pub fn run_query_set_serial(
    kb: &KnowledgeBase,
    queries: &[Atom],
    cfg: &SearchConfig,
    scorer: Option<&dyn ClauseScorer>,
) -> Result<Vec<ProofResult>> {
    let buckets = kb.predicate_index();
    queries
        .iter()
        .enumerate()
        .map(|(i, q)| {
            Ok(run(kb, &buckets, q, cfg, scorer, query_rng(cfg.rng_seed, i), false)?.result)
        })
        .collect()
}

/// Labels resolution steps by running each query exhaustively. A step that
/// unified scores 1 when it lies on some completed proof of its query.
/// Records repeating a (canonical goal, clause, score) triple are dropped.
/// Goals are stored with their variables folded into the vocabulary's pool.
pub fn collect_training_data(
    kb: &KnowledgeBase,
    queries: &[Atom],
    depth_limit: usize,
    node_cap: u64,
    seed: u64,
) -> Result<Vec<TrainingSample>> {
    let cfg = SearchConfig {
        depth_limit,
        node_cap,
        mode: Mode::Exhaustive,
        rng_seed: seed,
        ..SearchConfig::default()
    };
    let buckets = kb.predicate_index();
    let runs: Vec<RawRun> = queries
        .par_iter()
        .enumerate()
        .map(|(i, q)| run(kb, &buckets, q, &cfg, None, query_rng(seed, i), true))
        .collect::<Result<_>>()?;
    let nv = kb.vocabulary.num_variables();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for r in runs {
        for (goal, ci, found) in r.samples {
            let goal = fit_to_pool(&goal, nv);
            if seen.insert((goal.canonical(), ci, found)) {
                out.push(TrainingSample {
                    goal,
                    rule: kb.clauses[ci].clone(),
                    score: u8::from(found),
                });
            }
        }
    }
    Ok(out)
}

/// `query_id,outcome,nodes,depth,wall_ms`.
pub fn format_results(results: &[ProofResult], wall_ms: Option<&[u128]>) -> String {
    let mut s = String::from("query_id,outcome,nodes,depth,wall_ms\n");
    for (i, r) in results.iter().enumerate() {
        let ms = wall_ms.and_then(|w| w.get(i)).copied().unwrap_or(0);
        let _ = writeln!(
            s,
            "{i},{},{},{},{ms}",
            r.outcome.name(),
            r.nodes_explored,
            r.depth_reached
        );
    }
    s
}

/// Per-query summary parsed back from a results file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultRow {
    pub query_id: usize,
    pub outcome: String,
    pub nodes: u64,
    pub depth: usize,
    pub wall_ms: u128,
}

impl ResultRow {
    pub fn proved(&self) -> bool {
        self.outcome == "proved"
    }

    pub fn failed_at_cap(&self) -> bool {
        self.outcome == "failed-at-cap"
    }
}

impl From<(usize, &ProofResult)> for ResultRow {
    fn from((i, r): (usize, &ProofResult)) -> Self {
        ResultRow {
            query_id: i,
            outcome: r.outcome.name().to_string(),
            nodes: r.nodes_explored,
            depth: r.depth_reached,
            wall_ms: 0,
        }
    }
}

pub fn parse_results(text: &str) -> Result<Vec<ResultRow>> {
    let mut out = Vec::new();
    let mut header_seen = false;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let err = || Error::Parse {
            line: n + 1,
            message: format!("bad result row `{line}`"),
        };
        if f.len() != 5 || !matches!(f[1], "proved" | "exhausted" | "failed-at-cap") {
            return Err(err());
        }
        out.push(ResultRow {
            query_id: f[0].parse().map_err(|_| err())?,
            outcome: f[1].to_string(),
            nodes: f[2].parse().map_err(|_| err())?,
            depth: f[3].parse().map_err(|_| err())?,
            wall_ms: f[4].parse().map_err(|_| err())?,
        });
    }
    Ok(out)
}

/// `goal <TAB> clause <TAB> score`, one sample per line.
pub fn format_samples(samples: &[TrainingSample]) -> String {
    let mut s = String::new();
    for t in samples {
        let _ = writeln!(s, "{}\t{}\t{}", t.goal, t.rule, t.score);
    }
    s
}

pub fn parse_samples(text: &str) -> Result<Vec<TrainingSample>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('%') {
            continue;
        }
        let err = |m: String| Error::Parse {
            line: n + 1,
            message: m,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(err(format!("expected 3 tab-separated fields, found {}", f.len())));
        }
        let goal = parse_atom(f[0]).map_err(|e| err(e.to_string()))?;
        let rule = parse_clause(f[1]).map_err(|e| err(e.to_string()))?;
        let score = match f[2].trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(err(format!("score `{other}` is not 0 or 1"))),
        };
        out.push(TrainingSample { goal, rule, score });
    }
    Ok(out)
}

impl fmt::Display for ProofStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}:{}", self.path, self.clause)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_clauses, Vocabulary};

    fn kb(text: &str) -> KnowledgeBase {
        let clauses = parse_clauses(text).unwrap();
        let vocab = Vocabulary::new(vec![2, 2, 1, 1], 10, 10, 2).unwrap();
        KnowledgeBase::new(vocab, clauses).unwrap()
    }

    #[test]
    fn existing_fact_is_proved_at_depth_one() {
        let kb = kb("p0(c1, c2).\np0(c2, c3).");
        let r = solve(&kb, &parse_atom("p0(c1, c2)").unwrap(), &SearchConfig::default(), None).unwrap();
        assert!(r.outcome.is_proved());
        assert_eq!(r.nodes_explored, 1);
        assert_eq!(r.depth_reached, 1);
    }

    #[test]
    fn failed_unifications_count_as_nodes() {
        let kb = kb("p0(c1, c2).\np0(c2, c3).");
        let r = solve(&kb, &parse_atom("p0(c2, c3)").unwrap(), &SearchConfig::default(), None).unwrap();
        assert_eq!(r.nodes_explored, 2);
        let r = solve(&kb, &parse_atom("p0(c5, c5)").unwrap(), &SearchConfig::default(), None).unwrap();
        assert_eq!(r.outcome, Outcome::Exhausted);
        assert_eq!(r.nodes_explored, 2);
    }

    #[test]
    fn rule_chain_binds_answer() {
        let kb = kb("p2(c1).\np1(V0, V1) :- p2(V0), p0(V0, V1).\np0(c1, c4).");
        let r = solve(&kb, &parse_atom("p1(c1, V5)").unwrap(), &SearchConfig::default(), None).unwrap();
        assert_eq!(
            r.outcome,
            Outcome::Proved {
                answer: parse_atom("p1(c1, c4)").unwrap()
            }
        );
        assert_eq!(r.depth_reached, 2);
    }

    #[test]
    fn depth_limit_blocks_deeper_proofs() {
        let kb = kb("p2(c1).\np3(V0) :- p2(V0).");
        let q = parse_atom("p3(c1)").unwrap();
        let shallow = SearchConfig {
            depth_limit: 1,
            ..SearchConfig::default()
        };
        assert_eq!(solve(&kb, &q, &shallow, None).unwrap().outcome, Outcome::Exhausted);
        let deep = SearchConfig {
            depth_limit: 2,
            ..SearchConfig::default()
        };
        assert!(solve(&kb, &q, &deep, None).unwrap().outcome.is_proved());
    }

    #[test]
    fn node_cap_stops_search() {
        let kb = kb("p0(c1, c2).\np0(c2, c3).\np0(c3, c4).");
        let cfg = SearchConfig {
            node_cap: 2,
            ..SearchConfig::default()
        };
        let r = solve(&kb, &parse_atom("p0(c3, c4)").unwrap(), &cfg, None).unwrap();
        assert_eq!(r.outcome, Outcome::FailedAtCap);
        assert_eq!(r.nodes_explored, 2);
    }

    #[test]
    fn unknown_predicate_is_rejected() {
        let kb = kb("p0(c1, c2).");
        let err = solve(&kb, &parse_atom("p9(c1)").unwrap(), &SearchConfig::default(), None);
        assert!(matches!(err, Err(Error::Vocabulary(_))));
    }

    #[test]
    fn single_fact_proof_sample() {
        let kb = kb("p0(c1, c2).\np0(c2, c3).");
        let q = parse_atom("p0(c1, c2)").unwrap();
        let samples = collect_training_data(&kb, &[q.clone()], 5, 1000, 0).unwrap();
        assert_eq!(
            samples,
            vec![TrainingSample {
                goal: q,
                rule: kb.clauses[0].clone(),
                score: 1
            }]
        );
    }

    #[test]
    fn dead_end_rule_scores_zero() {
        let kb = kb("p3(V0) :- p2(V0).\np3(c1).");
        let samples = collect_training_data(&kb, &[parse_atom("p3(c1)").unwrap()], 5, 1000, 0).unwrap();
        let rule = samples.iter().find(|s| !s.rule.is_fact()).unwrap();
        assert_eq!(rule.score, 0);
        let fact = samples.iter().find(|s| s.rule.is_fact()).unwrap();
        assert_eq!(fact.score, 1);
    }

    #[test]
    fn samples_file_round_trip() {
        let kb = kb("p2(c1).\np1(V0, V1) :- p2(V0), p0(V0, V1).\np0(c1, c4).");
        let samples =
            collect_training_data(&kb, &[parse_atom("p1(V0, V1)").unwrap()], 5, 1000, 3).unwrap();
        assert!(!samples.is_empty());
        assert_eq!(parse_samples(&format_samples(&samples)).unwrap(), samples);
    }

    #[test]
    fn results_file_round_trip() {
        let kb = kb("p0(c1, c2).");
        let rs = run_query_set(
            &kb,
            &[parse_atom("p0(c1, c2)").unwrap(), parse_atom("p0(c2, c2)").unwrap()],
            &SearchConfig::default(),
            None,
        )
        .unwrap();
        let rows = parse_results(&format_results(&rs, None)).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].proved());
        assert_eq!(rows[1].outcome, "exhausted");
    }
}
