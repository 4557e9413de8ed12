//! Staged experiment runner with a hash-checked, resumable output directory.
//!
//! Knowledge bases, query files, training samples and unguided results
//! depend only on the data settings and carry the data hash. Everything
//! downstream of the triplet generator carries the full config hash.

mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{derive_seed, ExperimentConfig, PRESETS};

use crate::encoder::fit_to_pool;
use crate::error::{Error, Result};
use crate::logic::{Atom, Clause, KnowledgeBase, Vocabulary};
use crate::metrics::{
    format_metrics, metrics_rows, node_stats, semantic_match, exact_match, tv_distance,
    DistancePairSet, MetricsRow, NodeStats, QueryCost,
};
use crate::neural::{
    load_embedding, load_scorer, save_embedding, save_scorer, train_embedding, train_scorer,
    EmbeddingModel, ScoringModel, TrainingSample,
};
use crate::reasoner::{
    collect_training_data, format_results, format_samples, parse_results, parse_samples,
    run_query_set, run_query_set_timed, Guidance, Mode, ProofResult, ResultRow,
};
use crate::synth::{
    forward_chain, format_kb, format_queries, gen_kb_with_vocabulary, gen_queries,
    gen_vocabulary, parse_kb, parse_queries, read_header, QuerySet,
};
use crate::triplets::{format_dataset, gen_dataset, gen_dataset_legacy, parse_dataset, TripletDataset};

pub const STAGES: [&str; 7] = [
    "gen-kb",
    "gen-queries",
    "gen-triplets",
    "train-embed",
    "collect-training",
    "train-scorer",
    "run",
];

const MANIFEST: &str = "manifest.json";
const MANIFEST_FORMAT: &str = "horn-embed-manifest";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// Relative to the manifest's directory.
    pub path: String,
    /// The config or data hash the artifact carries.
    pub hash: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    /// `built` or `reused`.
    pub status: String,
    pub wall_ms: u128,
    pub artifacts: Vec<ArtifactRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub data_hash: String,
    pub config: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Err(Error::MissingArtifact(path.display().to_string()));
        }
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn artifacts(&self) -> impl Iterator<Item = &ArtifactRecord> {
        self.stages.iter().flat_map(|s| &s.artifacts)
    }

    /// Checks every listed artifact: it exists, carries the recorded hash,
    /// that hash is the run's config or data hash, and the bytes match.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for a in self.artifacts() {
            let path = dir.join(&a.path);
            if !path.exists() {
                return Err(Error::MissingArtifact(path.display().to_string()));
            }
            if a.hash != self.config_hash && a.hash != self.data_hash {
                return Err(Error::HashMismatch {
                    what: "manifest entry",
                    expected: self.config_hash.clone(),
                    found: a.hash.clone(),
                });
            }
            let carried = artifact_hash(&path)?.unwrap_or_default();
            if carried != a.hash {
                return Err(Error::HashMismatch {
                    what: "artifact config hash",
                    expected: a.hash.clone(),
                    found: carried,
                });
            }
            let digest = file_sha256(&path)?;
            if digest != a.sha256 {
                return Err(Error::HashMismatch {
                    what: "artifact contents",
                    expected: a.sha256.clone(),
                    found: digest,
                });
            }
        }
        Ok(())
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// The `config_hash` an artifact carries: a JSON field, or a `% config_hash:`
/// or `# config_hash:` line at the top of a text file.
pub fn artifact_hash(path: &Path) -> Result<Option<String>> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value = serde_json::from_str(&text)?;
        return Ok(v.get("config_hash").and_then(|h| h.as_str()).map(String::from));
    }
    for prefix in ["%", "#"] {
        if let Some(h) = read_header(&text, prefix).get("config_hash") {
            return Ok(Some(h.clone()));
        }
    }
    Ok(None)
}

fn hash_line(hash: &str) -> String {
    format!("# config_hash: {hash}\n")
}

/// Writes through a temporary file so an interrupted run never leaves a
/// truncated artifact behind.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, contents)?;
    fs::rename(tmp, path)?;
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.display().to_string()));
    }
    Ok(fs::read_to_string(path)?)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Identifies embedding `j` trained on its own triplet set.
pub fn embedding_id(j: usize) -> String {
    format!("e{j}")
}

pub fn kb_id(i: usize) -> String {
    format!("kb{i}")
}

/// Summary of one reasoner over all KBs of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReasonerSummary {
    pub reasoner: String,
    pub stats: NodeStats,
}

/// An output directory bound to a config.
pub struct Run {
    pub cfg: ExperimentConfig,
    root: PathBuf,
    /// Location of the data-hash artifacts, relative to `root`.
    shared: PathBuf,
    manifest: Manifest,
    config_hash: String,
    data_hash: String,
    log: Box<dyn FnMut(&str) + Send>,
}

struct Pending {
    name: &'static str,
    artifacts: Vec<(PathBuf, String)>,
}

impl Run {
    /// Opens `cfg.output_dir`, creating it or checking that an existing
    /// manifest belongs to the same config.
    pub fn open(cfg: ExperimentConfig) -> Result<Self> {
        let root = cfg.output_dir.clone();
        Self::open_at(cfg, root, PathBuf::from("."))
    }

    /// Like [`Run::open`] with the data artifacts kept in `shared`, a path
    /// relative to `root`.
    pub fn open_at(cfg: ExperimentConfig, root: PathBuf, shared: PathBuf) -> Result<Self> {
        cfg.validate()?;
        fs::create_dir_all(&root)?;
        let config_hash = cfg.config_hash();
        let data_hash = cfg.data_hash();
        let manifest = match Manifest::load(&root) {
            Ok(m) => {
                if m.config_hash != config_hash {
                    return Err(Error::HashMismatch {
                        what: "output directory config",
                        expected: config_hash,
                        found: m.config_hash,
                    });
                }
                m
            }
            Err(Error::MissingArtifact(_)) => Manifest {
                format: MANIFEST_FORMAT.into(),
                version: 1,
                config_hash: config_hash.clone(),
                data_hash: data_hash.clone(),
                config: cfg
                    .entries()
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
                stages: Vec::new(),
            },
            Err(e) => return Err(e),
        };
        write_atomic(&root.join("config.txt"), &cfg.to_text())?;
        Ok(Run {
            cfg,
            root,
            shared,
            manifest,
            config_hash,
            data_hash,
            log: Box::new(|_| {}),
        })
    }

    /// Receives one line per stage.
    pub fn set_logger(&mut self, log: impl FnMut(&str) + Send + 'static) {
        self.log = Box::new(log);
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn data_hash(&self) -> &str {
        &self.data_hash
    }

    fn path(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    fn shared_rel(&self, rel: &str) -> PathBuf {
        self.shared.join(rel)
    }

    pub fn kb_path(&self, i: usize) -> PathBuf {
        self.shared_rel(&format!("kb/{}.pl", kb_id(i)))
    }

    pub fn queries_path(&self, i: usize) -> PathBuf {
        self.shared_rel(&format!("queries/{}.txt", kb_id(i)))
    }

    pub fn samples_path(&self, i: usize) -> PathBuf {
        self.shared_rel(&format!("samples/{}.tsv", kb_id(i)))
    }

    pub fn standard_results_path(&self, i: usize) -> PathBuf {
        self.shared_rel(&format!("results/standard_{}.csv", kb_id(i)))
    }

    pub fn triplets_path(&self, j: usize) -> PathBuf {
        PathBuf::from(format!("triplets/{}.tsv", embedding_id(j)))
    }

    pub fn embedding_path(&self, j: usize) -> PathBuf {
        PathBuf::from(format!("embedding/{}.json", embedding_id(j)))
    }

    pub fn embedding_log_path(&self, j: usize) -> PathBuf {
        PathBuf::from(format!("embedding/{}_log.csv", embedding_id(j)))
    }

    pub fn scorer_path(&self, j: usize, i: usize) -> PathBuf {
        PathBuf::from(format!("scorer/{}_{}.json", embedding_id(j), kb_id(i)))
    }

    pub fn scorer_log_path(&self, j: usize, i: usize) -> PathBuf {
        PathBuf::from(format!("scorer/{}_{}_log.csv", embedding_id(j), kb_id(i)))
    }

    pub fn guided_results_path(&self, j: usize, i: usize) -> PathBuf {
        PathBuf::from(format!("results/guided_{}_{}.csv", embedding_id(j), kb_id(i)))
    }

    pub fn metrics_path(&self) -> PathBuf {
        PathBuf::from("metrics.csv")
    }

    pub fn compare_path(&self) -> PathBuf {
        PathBuf::from("compare.csv")
    }

    pub fn crosstest_path(&self) -> PathBuf {
        PathBuf::from("crosstest.csv")
    }

    /// True when the artifact exists and carries `hash`. An artifact with a
    /// different hash is an error rather than something to overwrite.
    fn is_current(&self, rel: &Path, hash: &str) -> Result<bool> {
        let path = self.path(rel);
        if !path.exists() {
            return Ok(false);
        }
        let found = artifact_hash(&path)?.unwrap_or_default();
        if found != hash {
            return Err(Error::HashMismatch {
                what: "existing artifact",
                expected: hash.to_string(),
                found: format!("{found} in {}", path.display()),
            });
        }
        Ok(true)
    }

    fn finish(&mut self, pending: Pending, started: Instant, built: usize) -> Result<()> {
        let mut artifacts = Vec::new();
        for (rel, hash) in pending.artifacts {
            artifacts.push(ArtifactRecord {
                path: rel.display().to_string(),
                sha256: file_sha256(&self.path(&rel))?,
                hash,
            });
        }
        let record = StageRecord {
            name: pending.name.into(),
            status: if built > 0 { "built" } else { "reused" }.into(),
            wall_ms: started.elapsed().as_millis(),
            artifacts,
        };
        (self.log)(&format!(
            "{:<17} {:>6} {:>3} artifacts {:>8} ms",
            record.name,
            record.status,
            record.artifacts.len(),
            record.wall_ms
        ));
        match self.manifest.stages.iter_mut().find(|s| s.name == record.name) {
            Some(s) => {
                // Keep artifacts listed by an earlier call with other counts.
                for a in record.artifacts {
                    match s.artifacts.iter_mut().find(|x| x.path == a.path) {
                        Some(x) => *x = a,
                        None => s.artifacts.push(a),
                    }
                }
                s.status = record.status;
                s.wall_ms = record.wall_ms;
            }
            None => self.manifest.stages.push(record),
        }
        self.manifest.stages.sort_by_key(|s| {
            STAGES
                .iter()
                .position(|n| *n == s.name)
                .unwrap_or(STAGES.len())
        });
        write_atomic(
            &self.root.join(MANIFEST),
            &(serde_json::to_string_pretty(&self.manifest)? + "\n"),
        )
    }

    fn stage<F>(&mut self, name: &'static str, items: Vec<(PathBuf, String)>, mut build: F) -> Result<()>
    where
        F: FnMut(&mut Self, usize) -> Result<()>,
    {
        let started = Instant::now();
        let mut built = 0;
        let wrap = |e: Error| Error::Stage {
            stage: name,
            source: Box::new(e),
        };
        for (k, (rel, hash)) in items.iter().enumerate() {
            if !self.is_current(rel, hash).map_err(wrap)? {
                build(self, k).map_err(wrap)?;
                built += 1;
            }
        }
        self.finish(Pending { name, artifacts: items }, started, built)
    }

    pub fn load_kb(&self, i: usize) -> Result<KnowledgeBase> {
        parse_kb(&read(&self.path(&self.kb_path(i)))?)
    }

    pub fn load_queries(&self, i: usize) -> Result<QuerySet> {
        parse_queries(&read(&self.path(&self.queries_path(i)))?)
    }

    pub fn load_samples(&self, i: usize) -> Result<Vec<TrainingSample>> {
        parse_samples(&read(&self.path(&self.samples_path(i)))?)
    }

    pub fn load_triplets(&self, j: usize) -> Result<TripletDataset> {
        parse_dataset(&read(&self.path(&self.triplets_path(j)))?)
    }

    pub fn load_embedding(&self, j: usize) -> Result<EmbeddingModel> {
        let path = self.path(&self.embedding_path(j));
        read(&path)?;
        load_embedding(&path)
    }

    pub fn load_scorer(&self, j: usize, i: usize) -> Result<ScoringModel> {
        let path = self.path(&self.scorer_path(j, i));
        read(&path)?;
        load_scorer(&path)
    }

    pub fn load_standard_results(&self, i: usize) -> Result<Vec<ResultRow>> {
        parse_results(&read(&self.path(&self.standard_results_path(i)))?)
    }

    pub fn load_guided_results(&self, j: usize, i: usize) -> Result<Vec<ResultRow>> {
        parse_results(&read(&self.path(&self.guided_results_path(j, i)))?)
    }

    fn vocabulary(&self) -> Result<Vocabulary> {
        Ok(self.load_kb(0)?.vocabulary)
    }

    fn data_items(&self, f: impl Fn(&Self, usize) -> PathBuf) -> Vec<(PathBuf, String)> {
        (0..self.cfg.num_kbs)
            .map(|i| (f(self, i), self.data_hash.clone()))
            .collect()
    }

    fn model_items(&self, n_emb: usize, f: impl Fn(&Self, usize) -> PathBuf) -> Vec<(PathBuf, String)> {
        (0..n_emb).map(|j| (f(self, j), self.config_hash.clone())).collect()
    }

    fn pair_items(&self, n_emb: usize, f: impl Fn(&Self, usize, usize) -> PathBuf) -> Vec<(PathBuf, String)> {
        let mut v = Vec::new();
        for j in 0..n_emb {
            for i in 0..self.cfg.num_kbs {
                v.push((f(self, j, i), self.config_hash.clone()));
            }
        }
        v
    }

    pub fn gen_kbs(&mut self) -> Result<()> {
        let items = self.data_items(Self::kb_path);
        self.stage("gen-kb", items, |run, i| {
            let c = &run.cfg;
            let vocab = gen_vocabulary(
                c.num_predicates,
                c.num_constants,
                c.num_variables,
                c.max_arity,
                &mut rng(derive_seed(c.seed, "vocab", 0)),
            )?;
            let seed = derive_seed(c.seed, "kb", i as u64);
            let kb = gen_kb_with_vocabulary(&vocab, &c.kb_gen_config(seed), &mut rng(seed))?;
            let text = format_kb(
                &kb,
                &[("config_hash", run.data_hash.clone()), ("kb_id", kb_id(i))],
            );
            write_atomic(&run.path(&run.kb_path(i)), &text)
        })
    }

    pub fn gen_queries(&mut self) -> Result<()> {
        let items = self.data_items(Self::queries_path);
        self.stage("gen-queries", items, |run, i| {
            let c = &run.cfg;
            let kb = run.load_kb(i)?;
            let derived: Vec<Atom> = forward_chain(&kb, c.max_derived)
                .into_iter()
                .filter(|d| d.round < c.depth_limit)
                .map(|d| d.atom)
                .collect();
            let qs = gen_queries(
                &derived,
                c.n_train_queries,
                c.n_test_queries,
                c.var_sub_prob,
                &mut rng(derive_seed(c.seed, "queries", i as u64)),
            )?;
            let text = format_queries(
                &qs,
                &[("config_hash", run.data_hash.clone()), ("kb_id", kb_id(i))],
            );
            write_atomic(&run.path(&run.queries_path(i)), &text)
        })
    }

    pub fn gen_triplets(&mut self, n_emb: usize) -> Result<()> {
        let items = self.model_items(n_emb, Self::triplets_path);
        self.stage("gen-triplets", items, |run, j| {
            let c = &run.cfg;
            let vocab = run.vocabulary()?;
            let seed = derive_seed(c.seed, "triplets", j as u64);
            let ds = if c.balanced_triplets {
                gen_dataset(&vocab, &c.dataset_params(), seed)?
            } else {
                gen_dataset_legacy(&vocab, c.n_triplets, c.effective_repeat_chance(), seed)?
            };
            let text = format_dataset(&ds, &[("config_hash", run.config_hash.clone())]);
            write_atomic(&run.path(&run.triplets_path(j)), &text)
        })
    }

    /// Training and held-out parts of triplet set `j`.
    pub fn split_triplets(&self, j: usize) -> Result<(TripletDataset, TripletDataset)> {
        Ok(self.load_triplets(j)?.split_holdout(self.cfg.holdout_fraction))
    }

    pub fn train_embeddings(&mut self, n_emb: usize) -> Result<()> {
        let mut items = Vec::new();
        for (m, l) in self
            .model_items(n_emb, Self::embedding_path)
            .into_iter()
            .zip(self.model_items(n_emb, Self::embedding_log_path))
        {
            items.push(m);
            items.push(l);
        }
        self.stage("train-embed", items, |run, k| {
            // Model and log are written together; training is deterministic.
            let j = k / 2;
            let (train, _) = run.split_triplets(j)?;
            let mut tc = run.cfg.embed_train_config();
            tc.rng_seed = derive_seed(run.cfg.seed, "embed", j as u64);
            let (mut em, log) = train_embedding(&train, run.cfg.variable_mode, &tc)?;
            em.config_hash = run.config_hash.clone();
            write_atomic(
                &run.path(&run.embedding_log_path(j)),
                &(hash_line(&run.config_hash) + &log.to_csv()),
            )?;
            let path = run.path(&run.embedding_path(j));
            save_embedding(&em, &path)
        })
    }

    pub fn collect_training(&mut self) -> Result<()> {
        let items = self.data_items(Self::samples_path);
        self.stage("collect-training", items, |run, i| {
            let c = &run.cfg;
            let kb = run.load_kb(i)?;
            let qs = run.load_queries(i)?;
            let samples =
                collect_training_data(&kb, &qs.train, c.depth_limit, c.collect_node_cap, c.seed)?;
            let text = format!("% config_hash: {}\n{}", run.data_hash, format_samples(&samples));
            write_atomic(&run.path(&run.samples_path(i)), &text)
        })
    }

    pub fn train_scorers(&mut self, n_emb: usize) -> Result<()> {
        let n_kb = self.cfg.num_kbs;
        let mut items = Vec::new();
        for (m, l) in self
            .pair_items(n_emb, Self::scorer_path)
            .into_iter()
            .zip(self.pair_items(n_emb, Self::scorer_log_path))
        {
            items.push(m);
            items.push(l);
        }
        self.stage("train-scorer", items, |run, k| {
            let (j, i) = ((k / 2) / n_kb, (k / 2) % n_kb);
            let em = run.load_embedding(j)?;
            let samples = run.load_samples(i)?;
            let mut tc = run.cfg.scorer_train_config();
            tc.rng_seed = derive_seed(run.cfg.seed, "scorer", ((j as u64) << 32) | i as u64);
            let (mut sm, log) = train_scorer(&samples, &em, &tc, run.cfg.rule_repr)?;
            sm.config_hash = run.config_hash.clone();
            write_atomic(
                &run.path(&run.scorer_log_path(j, i)),
                &(hash_line(&run.config_hash) + &log.to_csv()),
            )?;
            save_scorer(&sm, &run.path(&run.scorer_path(j, i)))
        })
    }

    fn solve_set(
        &self,
        kb: &KnowledgeBase,
        queries: &[Atom],
        mode: Mode,
        guidance: Option<&Guidance<'_>>,
    ) -> Result<(Vec<ProofResult>, Option<Vec<u128>>)> {
        let cfg = self.cfg.search_config(mode);
        let scorer = guidance.map(|g| g as &dyn crate::reasoner::ClauseScorer);
        if self.cfg.timing {
            let (r, t) = run_query_set_timed(kb, queries, &cfg, scorer)?;
            Ok((r, Some(t)))
        } else {
            Ok((run_query_set(kb, queries, &cfg, scorer)?, None))
        }
    }

    /// Standard and guided runs on the test queries, then `metrics.csv`.
    pub fn run_reasoners(&mut self, n_emb: usize) -> Result<()> {
        let n_kb = self.cfg.num_kbs;
        let mut items = self.data_items(Self::standard_results_path);
        items.extend(self.pair_items(n_emb, Self::guided_results_path));
        let steps_dir = self.root.join("steps");
        self.stage("run", items, |run, k| {
            if k < n_kb {
                let kb = run.load_kb(k)?;
                let qs = run.load_queries(k)?;
                let (res, ms) = run.solve_set(&kb, &qs.test, Mode::Standard, None)?;
                let text = hash_line(&run.data_hash) + &format_results(&res, ms.as_deref());
                return write_atomic(&run.path(&run.standard_results_path(k)), &text);
            }
            let (j, i) = ((k - n_kb) / n_kb, (k - n_kb) % n_kb);
            let kb = run.load_kb(i)?;
            let qs = run.load_queries(i)?;
            let em = run.load_embedding(j)?;
            let sm = run.load_scorer(j, i)?;
            let g = Guidance::new(&kb, &em, &sm)?;
            let (res, ms) = run.solve_set(&kb, &qs.test, Mode::Guided, Some(&g))?;
            let nv = kb.vocabulary.num_variables();
            let mut steps = String::new();
            for r in &res {
                for (goal, ci) in &r.steps {
                    let _ = writeln!(steps, "{}\t{}", fit_to_pool(goal, nv), ci);
                }
            }
            write_atomic(
                &steps_dir.join(format!("{}_{}.tsv", embedding_id(j), kb_id(i))),
                &steps,
            )?;
            let text = hash_line(&run.config_hash) + &format_results(&res, ms.as_deref());
            write_atomic(&run.path(&run.guided_results_path(j, i)), &text)
        })?;
        self.write_metrics(n_emb, &self.metrics_path())
    }

    fn guided_steps(&self, j: usize, i: usize, kb: &KnowledgeBase) -> Result<Vec<(Atom, Clause)>> {
        let path = self
            .root
            .join("steps")
            .join(format!("{}_{}.tsv", embedding_id(j), kb_id(i)));
        let mut out = Vec::new();
        for (n, line) in read(&path)?.lines().enumerate() {
            let err = || Error::Parse {
                line: n + 1,
                message: format!("bad step line `{line}`"),
            };
            let (g, c) = line.split_once('\t').ok_or_else(err)?;
            let ci: usize = c.parse().map_err(|_| err())?;
            let clause = kb.clauses.get(ci).ok_or_else(err)?.clone();
            out.push((crate::logic::parse_atom(g)?, clause));
        }
        Ok(out)
    }

    pub fn standard_summary(&self) -> Result<ReasonerSummary> {
        let per_kb: Vec<Vec<QueryCost>> = (0..self.cfg.num_kbs)
            .map(|i| Ok(self.load_standard_results(i)?.iter().map(QueryCost::from).collect()))
            .collect::<Result<_>>()?;
        Ok(ReasonerSummary {
            reasoner: "standard".into(),
            stats: node_stats(&per_kb)?,
        })
    }

    pub fn guided_summary(&self, j: usize) -> Result<ReasonerSummary> {
        let per_kb: Vec<Vec<QueryCost>> = (0..self.cfg.num_kbs)
            .map(|i| Ok(self.load_guided_results(j, i)?.iter().map(QueryCost::from).collect()))
            .collect::<Result<_>>()?;
        Ok(ReasonerSummary {
            reasoner: format!("guided-{}", embedding_id(j)),
            stats: node_stats(&per_kb)?,
        })
    }

    /// Distance-distribution separation of embedding `j` on its held-out triplets.
    pub fn heldout_tv(&self, j: usize) -> Result<f64> {
        let (_, held) = self.split_triplets(j)?;
        let em = self.load_embedding(j)?;
        tv_distance(&DistancePairSet::from_model(&em, &held)?, self.cfg.tv_bins)
    }

    /// Semantic and exact match of embedding `j`'s guided test steps on KB
    /// `i` against that KB's training samples, with the number of steps.
    pub fn overlap_kb(&self, j: usize, i: usize) -> Result<(Option<f64>, Option<f64>, usize)> {
        let kb = self.load_kb(i)?;
        let train: Vec<(Atom, Clause)> = self
            .load_samples(i)?
            .into_iter()
            .map(|s| (s.goal, s.rule))
            .collect();
        let test = self.guided_steps(j, i, &kb)?;
        Ok((semantic_match(&train, &test), exact_match(&train, &test), test.len()))
    }

    /// [`Run::overlap_kb`] pooled over KBs.
    pub fn overlap(&self, j: usize) -> Result<(Option<f64>, Option<f64>)> {
        let (mut sem, mut exact, mut total) = (0.0, 0.0, 0usize);
        for i in 0..self.cfg.num_kbs {
            let (s, e, n) = self.overlap_kb(j, i)?;
            sem += s.unwrap_or(0.0) * n as f64 / 100.0;
            exact += e.unwrap_or(0.0) * n as f64 / 100.0;
            total += n;
        }
        if total == 0 {
            return Ok((None, None));
        }
        let t = total as f64;
        Ok((Some(100.0 * sem / t), Some(100.0 * exact / t)))
    }

    fn write_metrics(&mut self, n_emb: usize, rel: &Path) -> Result<()> {
        let started = Instant::now();
        let kb_ids: Vec<String> = (0..self.cfg.num_kbs).map(kb_id).collect();
        let mut rows: Vec<MetricsRow> = Vec::new();
        let std = self.standard_summary()?;
        rows.extend(metrics_rows("standard", &kb_ids, &std.stats, None, None, None));
        for j in 0..n_emb {
            let g = self.guided_summary(j)?;
            let tv = self.heldout_tv(j)?;
            let (sem, exact) = self.overlap(j)?;
            let mut model_rows = metrics_rows(&embedding_id(j), &kb_ids, &g.stats, Some(tv), sem, exact);
            for (i, row) in model_rows.iter_mut().take(self.cfg.num_kbs).enumerate() {
                let (s, e, _) = self.overlap_kb(j, i)?;
                row.sem_match = s;
                row.exact_match = e;
            }
            rows.extend(model_rows);
        }
        write_atomic(&self.path(rel), &(hash_line(&self.config_hash) + &format_metrics(&rows)))?;
        let name = if rel == self.crosstest_path() { "crosstest" } else { "metrics" };
        let pending = Pending {
            name,
            artifacts: vec![(rel.to_path_buf(), self.config_hash.clone())],
        };
        self.finish(pending, started, 1)
    }

    /// `reasoner,size,mean,median,fails` for the standard reasoner and the
    /// first embedding's guided reasoner.
    pub fn write_compare(&mut self) -> Result<PathBuf> {
        let started = Instant::now();
        let std = self.standard_summary()?;
        let guided = ReasonerSummary {
            reasoner: "guided".into(),
            ..self.guided_summary(0)?
        };
        let mut text = hash_line(&self.config_hash);
        let _ = writeln!(text, "# node_cap: {}", self.cfg.node_cap);
        text.push_str("reasoner,size,mean,median,fails\n");
        for s in [&std, &guided] {
            let _ = writeln!(
                text,
                "{},{},{},{},{}",
                s.reasoner, self.cfg.kb_size, s.stats.mean_nodes, s.stats.median_nodes, s.stats.fails
            );
        }
        let rel = self.compare_path();
        write_atomic(&self.path(&rel), &text)?;
        let pending = Pending {
            name: "compare",
            artifacts: vec![(rel.clone(), self.config_hash.clone())],
        };
        self.finish(pending, started, 1)?;
        Ok(self.path(&rel))
    }

    /// Every stage with `n_emb` embeddings.
    pub fn run_all(&mut self, n_emb: usize) -> Result<()> {
        self.gen_kbs()?;
        self.gen_queries()?;
        self.gen_triplets(n_emb)?;
        self.train_embeddings(n_emb)?;
        self.collect_training()?;
        self.train_scorers(n_emb)?;
        self.run_reasoners(n_emb)
    }

    /// The full pipeline with one embedding, ending in `compare.csv`.
    pub fn pipeline(&mut self) -> Result<PathBuf> {
        self.run_all(1)?;
        self.write_compare()
    }

    /// Every embedding seed against every KB, ending in `crosstest.csv`.
    pub fn crosstest(&mut self) -> Result<PathBuf> {
        let n = self.cfg.num_embeddings;
        self.run_all(n)?;
        let rel = self.crosstest_path();
        self.write_metrics(n, &rel)?;
        Ok(self.path(&rel))
    }
}

/// One arm of the ablation: which improvements are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arm {
    pub name: &'static str,
    /// Directory name under `ablate/`.
    pub slug: &'static str,
    pub hard_samples: bool,
    pub balanced_triplets: bool,
    pub repeated_terms: bool,
}

const fn arm(name: &'static str, slug: &'static str, hard: bool, balanced: bool, repeated: bool) -> Arm {
    Arm {
        name,
        slug,
        hard_samples: hard,
        balanced_triplets: balanced,
        repeated_terms: repeated,
    }
}

pub const ARMS: [Arm; 5] = [
    arm("Baseline", "baseline", false, false, false),
    arm("Hard Samples", "hard-samples", true, false, false),
    arm("Triplet Difficulty", "triplet-difficulty", false, true, false),
    arm("Repeated Terms", "repeated-terms", false, false, true),
    arm("All", "all", true, true, true),
];

impl Arm {
    pub fn apply(&self, cfg: &ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            hard_samples: self.hard_samples,
            balanced_triplets: self.balanced_triplets,
            repeated_terms: self.repeated_terms,
            ..cfg.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmResult {
    pub arm: Arm,
    pub guided: NodeStats,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub standard: NodeStats,
    pub arms: Vec<ArmResult>,
    pub path: PathBuf,
}

const TOGGLES: [&str; 3] = ["hard_samples", "balanced_triplets", "repeated_terms"];

/// Runs every arm under `<output_dir>/ablate`, sharing one set of knowledge
/// bases, queries and samples, and writes `ablate.csv`.
pub fn ablate(cfg: &ExperimentConfig, mut log: impl FnMut(&str) + Clone + Send + 'static) -> Result<AblationReport> {
    let base = cfg.output_dir.join("ablate");
    let mut arms = Vec::new();
    let mut shared_digests: Option<Vec<(String, String)>> = None;
    let mut standard = None;
    for arm in ARMS {
        let acfg = arm.apply(cfg);
        let stray: Vec<_> = acfg.diff(cfg).into_iter().filter(|k| !TOGGLES.contains(k)).collect();
        if !stray.is_empty() {
            return Err(Error::Contract(format!("arm {} changes {stray:?}", arm.name)));
        }
        log(&format!("arm {}", arm.slug));
        let mut run = Run::open_at(acfg, base.join(arm.slug), PathBuf::from("../shared"))?;
        let l = log.clone();
        run.set_logger(l);
        run.run_all(1)?;
        let digests: Vec<(String, String)> = run
            .manifest()
            .artifacts()
            .filter(|a| a.path.starts_with("../shared"))
            .map(|a| (a.path.clone(), a.sha256.clone()))
            .collect();
        match &shared_digests {
            None => shared_digests = Some(digests),
            Some(d) if *d != digests => {
                return Err(Error::HashMismatch {
                    what: "shared ablation data",
                    expected: format!("{} files", d.len()),
                    found: format!("{} files with different contents", digests.len()),
                })
            }
            Some(_) => {}
        }
        if standard.is_none() {
            standard = Some(run.standard_summary()?.stats);
        }
        arms.push(ArmResult {
            arm,
            guided: run.guided_summary(0)?.stats,
            config_hash: run.config_hash().to_string(),
        });
    }
    let standard = standard.expect("at least one arm");
    let mut text = hash_line(&cfg.config_hash());
    let _ = writeln!(text, "# node_cap: {}", cfg.node_cap);
    text.push_str("arm,hard_samples,balanced_triplets,repeated_terms,mean,median,fails,config_hash\n");
    let onoff = |b: bool| if b { "on" } else { "off" };
    for a in &arms {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            a.arm.name,
            onoff(a.arm.hard_samples),
            onoff(a.arm.balanced_triplets),
            onoff(a.arm.repeated_terms),
            a.guided.mean_nodes,
            a.guided.median_nodes,
            a.guided.fails,
            a.config_hash
        );
    }
    let _ = writeln!(
        text,
        "standard,,,,{},{},{},",
        standard.mean_nodes, standard.median_nodes, standard.fails
    );
    let path = base.join("ablate.csv");
    write_atomic(&path, &text)?;
    Ok(AblationReport { standard, arms, path })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            kb_size: 60,
            num_kbs: 2,
            num_predicates: 8,
            num_constants: 20,
            n_train_queries: 10,
            n_test_queries: 5,
            n_triplets: 400,
            epochs: 3,
            hidden: vec![16],
            hard_period: 2,
            scorer_epochs: 3,
            scorer_hidden: vec![8],
            node_cap: 5_000,
            collect_node_cap: 5_000,
            depth_limit: 3,
            num_embeddings: 2,
            output_dir: dir.to_path_buf(),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn pipeline_writes_a_verifiable_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = Run::open(tiny(dir.path())).unwrap();
        let compare = run.pipeline().unwrap();
        assert!(compare.exists());
        let m = Manifest::load(dir.path()).unwrap();
        m.verify(dir.path()).unwrap();
        for s in STAGES {
            assert!(m.stage(s).is_some(), "stage {s} missing");
        }
    }

    #[test]
    fn second_run_reuses_every_stage() {
        let dir = tempfile::tempdir().unwrap();
        Run::open(tiny(dir.path())).unwrap().pipeline().unwrap();
        let mut run = Run::open(tiny(dir.path())).unwrap();
        run.pipeline().unwrap();
        for s in &run.manifest().stages {
            if STAGES.contains(&s.name.as_str()) {
                assert_eq!(s.status, "reused", "stage {}", s.name);
            }
        }
    }

    #[test]
    fn a_changed_config_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        Run::open(tiny(dir.path())).unwrap().gen_kbs().unwrap();
        let other = ExperimentConfig { seed: 9, ..tiny(dir.path()) };
        assert!(matches!(Run::open(other), Err(Error::HashMismatch { .. })));
    }

    #[test]
    fn resume_rebuilds_only_what_is_missing() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = Run::open(tiny(dir.path())).unwrap();
        run.gen_kbs().unwrap();
        run.gen_queries().unwrap();
        let q1 = fs::read(dir.path().join("queries/kb1.txt")).unwrap();
        fs::remove_file(dir.path().join("queries/kb1.txt")).unwrap();
        let mut run = Run::open(tiny(dir.path())).unwrap();
        run.gen_kbs().unwrap();
        assert_eq!(run.manifest().stage("gen-kb").unwrap().status, "reused");
        run.gen_queries().unwrap();
        assert_eq!(run.manifest().stage("gen-queries").unwrap().status, "built");
        assert_eq!(fs::read(dir.path().join("queries/kb1.txt")).unwrap(), q1);
    }
}
