use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::net::{Activation, Adam, Batch, DenseNet, Loss};
use super::{EmbeddingModel, EpochRecord, Phase, TrainConfig, TrainLog, EMBEDDING_DIM};
use crate::error::{Error, Result};
use crate::logic::{Atom, Clause};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSample {
    pub goal: Atom,
    pub rule: Clause,
    pub score: u8,
}

impl TrainingSample {
    pub fn new(goal: Atom, rule: Clause, score: u8) -> Result<Self> {
        if score > 1 {
            return Err(Error::Contract(format!("sample score {score} is not 0 or 1")));
        }
        Ok(TrainingSample { goal, rule, score })
    }
}

/// How a clause becomes the rule half of the scorer input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RuleRepr {
    #[default]
    Head,
    /// Mean of the head and body atom embeddings.
    HeadBodyMean,
}

impl RuleRepr {
    pub fn name(self) -> &'static str {
        match self {
            RuleRepr::Head => "head",
            RuleRepr::HeadBodyMean => "mean-of-head-and-body",
        }
    }
}

impl FromStr for RuleRepr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head" => Ok(RuleRepr::Head),
            "mean-of-head-and-body" | "mean" => Ok(RuleRepr::HeadBodyMean),
            _ => Err(Error::Config(format!("unknown rule representation `{s}`"))),
        }
    }
}

/// Mean binary cross-entropy against fixed targets, for a logistic output.
#[derive(Debug, Clone)]
pub struct BceLoss {
    pub targets: Vec<f64>,
}

impl Loss for BceLoss {
    fn value_and_grad(&self, pre: &Array2<f64>, post: &Array2<f64>) -> (f64, Array2<f64>) {
        let n = pre.nrows() as f64;
        let mut total = 0.0;
        let mut grad = Array2::zeros(pre.raw_dim());
        for (i, &y) in self.targets.iter().enumerate() {
            let z = pre[[i, 0]];
            // log(1 + e^z) - y z, written to avoid overflow
            total += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
            grad[[i, 0]] = (post[[i, 0]] - y) / n;
        }
        (total / n, grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringModel {
    pub net: DenseNet,
    pub vocab_hash: String,
    pub embedding_hash: String,
    pub rule_repr: RuleRepr,
    pub config_hash: String,
}

impl ScoringModel {
    pub fn new(
        net: DenseNet,
        em: &EmbeddingModel,
        rule_repr: RuleRepr,
    ) -> Result<Self> {
        if net.input_dim() != 2 * EMBEDDING_DIM || net.output_dim() != 1 {
            return Err(Error::Dimension {
                expected: 2 * EMBEDDING_DIM,
                found: net.input_dim(),
            });
        }
        if net.output != Activation::Sigmoid {
            return Err(Error::Config("scorer output must be logistic".into()));
        }
        Ok(ScoringModel {
            net,
            vocab_hash: em.vocab_hash().to_string(),
            embedding_hash: em.weights_hash(),
            rule_repr,
            config_hash: String::new(),
        })
    }

    /// Fails unless this scorer was trained on `em`.
    pub fn check_embedding(&self, em: &EmbeddingModel) -> Result<()> {
        if self.vocab_hash != em.vocab_hash() {
            return Err(Error::HashMismatch {
                what: "vocabulary".into(),
                expected: self.vocab_hash.clone(),
                found: em.vocab_hash().to_string(),
            });
        }
        let found = em.weights_hash();
        if self.embedding_hash != found {
            return Err(Error::HashMismatch {
                what: "embedding model".into(),
                expected: self.embedding_hash.clone(),
                found,
            });
        }
        Ok(())
    }

    pub fn score(&self, em: &EmbeddingModel, goal: &Atom, rule: &Clause) -> Result<f64> {
        self.check_embedding(em)?;
        let g = goal_vector(em, goal)?;
        let r = rule_vector(em, rule, self.rule_repr)?;
        Ok(self.score_vectors(&g, &r))
    }

    /// Scores precomputed goal and rule vectors.
    pub fn score_vectors(&self, goal: &[f64], rule: &[f64]) -> f64 {
        let mut x = Vec::with_capacity(2 * EMBEDDING_DIM);
        x.extend_from_slice(goal);
        x.extend_from_slice(rule);
        self.net.forward(&x).expect("scorer input is 100 wide")[0]
    }

    /// Scores one goal against several rule vectors in one pass.
    pub fn score_many(&self, goal: &[f64], rules: &[Vec<f64>]) -> Vec<f64> {
        if rules.is_empty() {
            return Vec::new();
        }
        let mut x = Array2::zeros((rules.len(), 2 * EMBEDDING_DIM));
        for (i, r) in rules.iter().enumerate() {
            let mut row = x.row_mut(i);
            for (k, &v) in goal.iter().chain(r.iter()).enumerate() {
                row[k] = v;
            }
        }
        let cache = self.net.forward_batch(Batch::Dense(x.view())).expect("scorer input");
        cache.output().column(0).to_vec()
    }
}

/// Embedding of a goal; fresh variables are first folded into the pool.
pub fn goal_vector(em: &EmbeddingModel, goal: &Atom) -> Result<Vec<f64>> {
    em.embed(&em.encoder().fit_to_pool(goal))
}

pub fn rule_vector(em: &EmbeddingModel, rule: &Clause, repr: RuleRepr) -> Result<Vec<f64>> {
    let head = goal_vector(em, &rule.head)?;
    match repr {
        RuleRepr::Head => Ok(head),
        RuleRepr::HeadBodyMean => {
            let mut acc = head;
            for b in &rule.body {
                for (x, y) in acc.iter_mut().zip(goal_vector(em, b)?) {
                    *x += y;
                }
            }
            let k = (1 + rule.body.len()) as f64;
            acc.iter_mut().for_each(|x| *x /= k);
            Ok(acc)
        }
    }
}

/// Trains the scorer with the embedding model frozen.
pub fn train_scorer(
    samples: &[TrainingSample],
    em: &EmbeddingModel,
    config: &TrainConfig,
    rule_repr: RuleRepr,
) -> Result<(ScoringModel, TrainLog)> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Contract("cannot train a scorer without samples".into()));
    }
    let mut inputs = Array2::zeros((samples.len(), 2 * EMBEDDING_DIM));
    for (i, s) in samples.iter().enumerate() {
        let g = goal_vector(em, &s.goal)?;
        let r = rule_vector(em, &s.rule, rule_repr)?;
        let mut row = inputs.row_mut(i);
        for (k, v) in g.into_iter().chain(r).enumerate() {
            row[k] = v;
        }
    }
    let targets: Vec<f64> = samples.iter().map(|s| f64::from(s.score)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut dims = vec![2 * EMBEDDING_DIM];
    dims.extend(&config.hidden_dims);
    dims.push(1);
    let mut net = DenseNet::init(&dims, Activation::Sigmoid, &mut rng)?;
    let mut adam = Adam::new(&net, config.learning_rate);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = TrainLog::default();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let x = inputs.select(ndarray::Axis(0), batch);
            let loss_fn = BceLoss {
                targets: batch.iter().map(|&i| targets[i]).collect(),
            };
            let input = Batch::Dense(x.view());
            let cache = net.forward_batch(input)?;
            let (loss, grad) = loss_fn.value_and_grad(cache.output_pre(), cache.output());
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    learning_rate: config.learning_rate,
                });
            }
            sum += loss * batch.len() as f64;
            let grads = net.backward(input, &cache, grad);
            adam.step(&mut net, &grads);
        }
        log.epochs.push(EpochRecord {
            epoch,
            phase: Phase::Full,
            mean_loss: sum / samples.len() as f64,
            subset_size: samples.len(),
        });
    }
    let cache = net.forward_batch(Batch::Dense(inputs.view()))?;
    log.final_full_loss = BceLoss { targets }.value(cache.output_pre(), cache.output());
    let model = ScoringModel::new(net, em, rule_repr)?;
    Ok((model, log))
}
