use std::collections::BTreeMap;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::encoder::VariableMode;
use crate::error::{Error, Result};
use crate::neural::{RuleRepr, TrainConfig};
use crate::reasoner::{GoalStrategy, Mode, SearchConfig};
use crate::synth::KbGenConfig;
use crate::triplets::DatasetParams;

/// Every experiment setting. Serialized as flat `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub kb_size: usize,
    pub num_kbs: usize,
    pub num_predicates: usize,
    pub num_constants: usize,
    pub num_variables: usize,
    pub max_arity: usize,
    pub fact_fraction: f64,
    pub max_body_len: usize,
    pub singleton_vars: bool,
    pub max_derived: usize,
    pub n_train_queries: usize,
    pub n_test_queries: usize,
    pub var_sub_prob: f64,

    pub n_triplets: usize,
    pub tpa: usize,
    pub mix: (f64, f64, f64),
    pub repeat_chance: f64,
    pub holdout_fraction: f64,
    pub repeated_terms: bool,
    pub balanced_triplets: bool,
    pub hard_samples: bool,

    pub variable_mode: VariableMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub margin: f64,
    pub hidden: Vec<usize>,
    pub hard_period: usize,
    pub hard_fraction: f64,

    pub scorer_epochs: usize,
    pub scorer_batch_size: usize,
    pub scorer_learning_rate: f64,
    pub scorer_hidden: Vec<usize>,
    pub rule_repr: RuleRepr,

    pub depth_limit: usize,
    pub node_cap: u64,
    pub collect_node_cap: u64,
    pub goal_strategy: GoalStrategy,

    pub tv_bins: usize,
    pub num_embeddings: usize,

    /// Not part of the config hash.
    pub output_dir: PathBuf,
    /// Record per-query wall time; off keeps result files reproducible.
    pub timing: bool,
}

pub const PRESETS: [&str; 4] = ["kb250", "kb375", "kb500", "desk"];

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let s = TrainConfig::scorer_default();
        let k = KbGenConfig::default();
        let d = DatasetParams::default();
        ExperimentConfig {
            seed: 0,
            kb_size: k.kb_size,
            num_kbs: 5,
            num_predicates: k.num_predicates,
            num_constants: k.num_constants,
            num_variables: k.num_variables,
            max_arity: k.max_arity,
            fact_fraction: k.fact_fraction,
            max_body_len: k.max_body_len,
            singleton_vars: k.singleton_vars,
            max_derived: 100_000,
            n_train_queries: 100,
            n_test_queries: 100,
            var_sub_prob: 0.5,
            n_triplets: 100_000,
            tpa: d.tpa,
            mix: d.mix,
            repeat_chance: d.repeat_chance,
            holdout_fraction: 0.1,
            repeated_terms: true,
            balanced_triplets: true,
            hard_samples: true,
            variable_mode: VariableMode::Identity,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            margin: t.margin,
            hidden: t.hidden_dims,
            hard_period: t.hard_period,
            hard_fraction: t.hard_fraction,
            scorer_epochs: s.epochs,
            scorer_batch_size: s.batch_size,
            scorer_learning_rate: s.learning_rate,
            scorer_hidden: s.hidden_dims,
            rule_repr: RuleRepr::Head,
            depth_limit: 5,
            node_cap: 1_000_000,
            collect_node_cap: 100_000,
            goal_strategy: GoalStrategy::MinGoal,
            tv_bins: 50,
            num_embeddings: 5,
            output_dir: PathBuf::from("runs"),
            timing: false,
        }
    }
}

fn list(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("invalid value `{value}` for `{key}`"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|p| parse_num(key, p.trim())).collect()
}

fn on_off(b: bool) -> String {
    if b { "on" } else { "off" }.to_string()
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = ExperimentConfig::default();
        Ok(match name {
            "kb250" => base,
            "kb375" => ExperimentConfig {
                kb_size: 375,
                num_constants: 300,
                n_triplets: 200_000,
                ..base
            },
            "kb500" => ExperimentConfig {
                kb_size: 500,
                num_constants: 400,
                n_triplets: 200_000,
                ..base
            },
            "desk" => ExperimentConfig {
                num_kbs: 3,
                n_test_queries: 25,
                n_triplets: 20_000,
                node_cap: 100_000,
                num_embeddings: 1,
                rule_repr: RuleRepr::HeadBodyMean,
                goal_strategy: GoalStrategy::Leftmost,
                ..base
            },
            _ => {
                return Err(Error::Config(format!(
                    "unknown preset `{name}` (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        })
    }

    /// All keys in a fixed order. `output_dir` and `timing` come last.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("seed", self.seed.to_string()),
            ("kb_size", self.kb_size.to_string()),
            ("num_kbs", self.num_kbs.to_string()),
            ("num_predicates", self.num_predicates.to_string()),
            ("num_constants", self.num_constants.to_string()),
            ("num_variables", self.num_variables.to_string()),
            ("max_arity", self.max_arity.to_string()),
            ("fact_fraction", self.fact_fraction.to_string()),
            ("max_body_len", self.max_body_len.to_string()),
            ("singleton_vars", on_off(self.singleton_vars)),
            ("max_derived", self.max_derived.to_string()),
            ("n_train_queries", self.n_train_queries.to_string()),
            ("n_test_queries", self.n_test_queries.to_string()),
            ("var_sub_prob", self.var_sub_prob.to_string()),
            ("n_triplets", self.n_triplets.to_string()),
            ("tpa", self.tpa.to_string()),
            ("mix_easy", self.mix.0.to_string()),
            ("mix_medium", self.mix.1.to_string()),
            ("mix_hard", self.mix.2.to_string()),
            ("repeat_chance", self.repeat_chance.to_string()),
            ("holdout_fraction", self.holdout_fraction.to_string()),
            ("repeated_terms", on_off(self.repeated_terms)),
            ("balanced_triplets", on_off(self.balanced_triplets)),
            ("hard_samples", on_off(self.hard_samples)),
            ("variable_mode", self.variable_mode.name().into()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("margin", self.margin.to_string()),
            ("hidden", list(&self.hidden)),
            ("hard_period", self.hard_period.to_string()),
            ("hard_fraction", self.hard_fraction.to_string()),
            ("scorer_epochs", self.scorer_epochs.to_string()),
            ("scorer_batch_size", self.scorer_batch_size.to_string()),
            ("scorer_learning_rate", self.scorer_learning_rate.to_string()),
            ("scorer_hidden", list(&self.scorer_hidden)),
            ("rule_repr", self.rule_repr.name().into()),
            ("depth_limit", self.depth_limit.to_string()),
            ("node_cap", self.node_cap.to_string()),
            ("collect_node_cap", self.collect_node_cap.to_string()),
            ("goal_strategy", self.goal_strategy.name().into()),
            ("tv_bins", self.tv_bins.to_string()),
            ("num_embeddings", self.num_embeddings.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("timing", on_off(self.timing)),
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "preset" => *self = ExperimentConfig {
                output_dir: self.output_dir.clone(),
                timing: self.timing,
                ..ExperimentConfig::preset(v)?
            },
            "seed" => self.seed = parse_num(key, v)?,
            "kb_size" => self.kb_size = parse_num(key, v)?,
            "num_kbs" => self.num_kbs = parse_num(key, v)?,
            "num_predicates" => self.num_predicates = parse_num(key, v)?,
            "num_constants" => self.num_constants = parse_num(key, v)?,
            "num_variables" => self.num_variables = parse_num(key, v)?,
            "max_arity" => self.max_arity = parse_num(key, v)?,
            "fact_fraction" => self.fact_fraction = parse_num(key, v)?,
            "max_body_len" => self.max_body_len = parse_num(key, v)?,
            "singleton_vars" => self.singleton_vars = parse_bool(key, v)?,
            "max_derived" => self.max_derived = parse_num(key, v)?,
            "n_train_queries" => self.n_train_queries = parse_num(key, v)?,
            "n_test_queries" => self.n_test_queries = parse_num(key, v)?,
            "var_sub_prob" => self.var_sub_prob = parse_num(key, v)?,
            "n_triplets" => self.n_triplets = parse_num(key, v)?,
            "tpa" => self.tpa = parse_num(key, v)?,
            "mix_easy" => self.mix.0 = parse_num(key, v)?,
            "mix_medium" => self.mix.1 = parse_num(key, v)?,
            "mix_hard" => self.mix.2 = parse_num(key, v)?,
            "repeat_chance" => self.repeat_chance = parse_num(key, v)?,
            "holdout_fraction" => self.holdout_fraction = parse_num(key, v)?,
            "repeated_terms" => self.repeated_terms = parse_bool(key, v)?,
            "balanced_triplets" => self.balanced_triplets = parse_bool(key, v)?,
            "hard_samples" => self.hard_samples = parse_bool(key, v)?,
            "variable_mode" => self.variable_mode = v.parse()?,
            "epochs" => self.epochs = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "learning_rate" => self.learning_rate = parse_num(key, v)?,
            "margin" => self.margin = parse_num(key, v)?,
            "hidden" => self.hidden = parse_list(key, v)?,
            "hard_period" => self.hard_period = parse_num(key, v)?,
            "hard_fraction" => self.hard_fraction = parse_num(key, v)?,
            "scorer_epochs" => self.scorer_epochs = parse_num(key, v)?,
            "scorer_batch_size" => self.scorer_batch_size = parse_num(key, v)?,
            "scorer_learning_rate" => self.scorer_learning_rate = parse_num(key, v)?,
            "scorer_hidden" => self.scorer_hidden = parse_list(key, v)?,
            "rule_repr" => self.rule_repr = v.parse()?,
            "depth_limit" => self.depth_limit = parse_num(key, v)?,
            "node_cap" => self.node_cap = parse_num(key, v)?,
            "collect_node_cap" => self.collect_node_cap = parse_num(key, v)?,
            "goal_strategy" => self.goal_strategy = v.parse()?,
            "tv_bins" => self.tv_bins = parse_num(key, v)?,
            "num_embeddings" => self.num_embeddings = parse_num(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "timing" => self.timing = parse_bool(key, v)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment. A `preset` line
    /// resets every key, so it belongs first.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            self.set(k, v)?;
        }
        self.validate()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.embed_train_config().validate()?;
        self.scorer_train_config().validate()?;
        self.search_config(Mode::Standard).validate()?;
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_kbs == 0 {
            return fail("num_kbs must be at least 1");
        }
        if self.num_embeddings == 0 {
            return fail("num_embeddings must be at least 1");
        }
        if self.n_test_queries == 0 || self.n_train_queries == 0 {
            return fail("query counts must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.var_sub_prob) || !(0.0..=1.0).contains(&self.repeat_chance) {
            return fail("probabilities must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return fail("holdout_fraction must lie in [0, 1)");
        }
        if self.tv_bins < 2 {
            return fail("tv_bins must be at least 2");
        }
        Ok(())
    }

    fn digest(entries: &[(&str, String)]) -> String {
        let mut h = Sha256::new();
        for (k, v) in entries {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        hex::encode(h.finalize())[..16].to_string()
    }

    /// Identifies a run: every key except the output location and timing.
    pub fn config_hash(&self) -> String {
        let e = self.entries();
        Self::digest(&e[..e.len() - 2])
    }

    /// Identifies the knowledge bases, queries, training samples and
    /// unguided results, which do not depend on any embedding setting.
    pub fn data_hash(&self) -> String {
        const DATA_KEYS: &[&str] = &[
            "seed",
            "kb_size",
            "num_kbs",
            "num_predicates",
            "num_constants",
            "num_variables",
            "max_arity",
            "fact_fraction",
            "max_body_len",
            "singleton_vars",
            "max_derived",
            "n_train_queries",
            "n_test_queries",
            "var_sub_prob",
            "depth_limit",
            "node_cap",
            "collect_node_cap",
        ];
        let e: Vec<_> = self
            .entries()
            .into_iter()
            .filter(|(k, _)| DATA_KEYS.contains(k))
            .collect();
        Self::digest(&e)
    }

    /// Keys whose values differ between two configs.
    pub fn diff(&self, other: &ExperimentConfig) -> Vec<&'static str> {
        let theirs: BTreeMap<_, _> = other.entries().into_iter().collect();
        self.entries()
            .into_iter()
            .filter(|(k, v)| theirs.get(k) != Some(v))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn kb_gen_config(&self, rng_seed: u64) -> KbGenConfig {
        KbGenConfig {
            kb_size: self.kb_size,
            num_predicates: self.num_predicates,
            num_constants: self.num_constants,
            num_variables: self.num_variables,
            max_arity: self.max_arity,
            fact_fraction: self.fact_fraction,
            max_body_len: self.max_body_len,
            singleton_vars: self.singleton_vars,
            rng_seed,
        }
    }

    /// Repeat chance actually used by the triplet generators.
    pub fn effective_repeat_chance(&self) -> f64 {
        if self.repeated_terms {
            self.repeat_chance
        } else {
            0.0
        }
    }

    pub fn dataset_params(&self) -> DatasetParams {
        DatasetParams {
            n_triplets: self.n_triplets,
            tpa: self.tpa,
            mix: self.mix,
            repeat_chance: self.effective_repeat_chance(),
        }
    }

    pub fn embed_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            margin: self.margin,
            hidden_dims: self.hidden.clone(),
            hard_samples: self.hard_samples,
            hard_period: self.hard_period,
            hard_fraction: self.hard_fraction,
            rng_seed: 0,
        }
    }

    pub fn scorer_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.scorer_epochs,
            batch_size: self.scorer_batch_size,
            learning_rate: self.scorer_learning_rate,
            hidden_dims: self.scorer_hidden.clone(),
            hard_samples: false,
            ..TrainConfig::default()
        }
    }

    pub fn search_config(&self, mode: Mode) -> SearchConfig {
        SearchConfig {
            depth_limit: self.depth_limit,
            node_cap: self.node_cap,
            mode,
            goal_strategy: self.goal_strategy,
            rng_seed: self.seed,
            record_proofs: false,
            record_steps: mode == Mode::Guided,
        }
    }
}

/// Deterministic sub-seed for one named use of the master seed.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
