//! Dense networks trained from scratch: the atom embedding model (triplet
//! loss with periodic hardest-subset retraining) and the rule scoring model
//! (logistic output, cross-entropy).

mod io;
pub mod net;
mod scorer;

use std::fmt::Write as _;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::encoder::{Encoder, VariableMode};
use crate::error::{Error, Result};
use crate::logic::{Atom, Vocabulary};
use crate::triplets::TripletDataset;

pub use io::{load_embedding, load_scorer, save_embedding, save_scorer};
pub use net::{grad_check, grad_check_params, Activation, Adam, Batch, DenseLayer, DenseNet, Loss};
pub use scorer::{
    goal_vector, rule_vector, train_scorer, BceLoss, RuleRepr, ScoringModel, TrainingSample,
};

pub const EMBEDDING_DIM: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub margin: f64,
    pub hidden_dims: Vec<usize>,
    /// Retrain on the hardest subset. Off means every epoch sees the full set.
    pub hard_samples: bool,
    pub hard_period: usize,
    pub hard_fraction: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 128,
            learning_rate: 1e-3,
            margin: 1.0,
            hidden_dims: vec![256, 128],
            hard_samples: true,
            hard_period: 10,
            hard_fraction: 0.5,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn scorer_default() -> Self {
        TrainConfig {
            epochs: 50,
            hidden_dims: vec![64],
            hard_samples: false,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad("margin must be non-negative");
        }
        if self.hard_period == 0 {
            return bad("hard_period must be at least 1");
        }
        if !(self.hard_fraction > 0.0 && self.hard_fraction <= 1.0) {
            return bad("hard_fraction must lie in (0, 1]");
        }
        if self.hidden_dims.contains(&0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }

    /// Number of triplets kept by each refresh.
    pub fn hard_subset_size(&self, n: usize) -> usize {
        ((self.hard_fraction * n as f64).ceil() as usize).clamp(1, n.max(1))
    }
}

/// `max(0, ‖a−p‖² − ‖a−n‖² + margin)`.
pub fn triplet_loss(anchor: &[f64], positive: &[f64], negative: &[f64], margin: f64) -> f64 {
    (squared_distance(anchor, positive) - squared_distance(anchor, negative) + margin).max(0.0)
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Triplet loss over a batch laid out as `[anchors; positives; negatives]`,
/// averaged over triplets.
#[derive(Debug, Clone, Copy)]
pub struct TripletLoss {
    pub margin: f64,
}

impl Loss for TripletLoss {
    fn value_and_grad(&self, _pre: &Array2<f64>, out: &Array2<f64>) -> (f64, Array2<f64>) {
        let b = out.nrows() / 3;
        let mut grad = Array2::zeros(out.raw_dim());
        let mut total = 0.0;
        for i in 0..b {
            let (a, p, n) = (out.row(i), out.row(b + i), out.row(2 * b + i));
            let dp = (&a - &p).mapv(|x| x * x).sum();
            let dn = (&a - &n).mapv(|x| x * x).sum();
            let l = dp - dn + self.margin;
            if l > 0.0 {
                total += l;
                let s = 2.0 / b as f64;
                grad.row_mut(i).assign(&((&n - &p) * s));
                grad.row_mut(b + i).assign(&((&p - &a) * s));
                grad.row_mut(2 * b + i).assign(&((&a - &n) * s));
            }
        }
        (total / b as f64, grad)
    }
}

/// Atom embedding network plus the vocabulary it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub net: DenseNet,
    encoder: Encoder,
    vocab_hash: String,
    pub config_hash: String,
}

impl EmbeddingModel {
    pub fn new(net: DenseNet, vocab: Vocabulary, mode: VariableMode) -> Result<Self> {
        let encoder = Encoder::new(vocab, mode);
        if net.input_dim() != encoder.dim() {
            return Err(Error::Dimension {
                expected: encoder.dim(),
                found: net.input_dim(),
            });
        }
        if net.output_dim() != EMBEDDING_DIM {
            return Err(Error::Dimension {
                expected: EMBEDDING_DIM,
                found: net.output_dim(),
            });
        }
        let vocab_hash = encoder.vocabulary().hash_hex();
        Ok(EmbeddingModel {
            net,
            encoder,
            vocab_hash,
            config_hash: String::new(),
        })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        self.encoder.vocabulary()
    }

    pub fn vocab_hash(&self) -> &str {
        &self.vocab_hash
    }

    pub fn check_vocabulary(&self, vocab: &Vocabulary) -> Result<()> {
        let found = vocab.hash_hex();
        if found != self.vocab_hash {
            return Err(Error::HashMismatch {
                what: "vocabulary".into(),
                expected: self.vocab_hash.clone(),
                found,
            });
        }
        Ok(())
    }

    /// Digest of the weights, used to tie a scorer to this exact model.
    pub fn weights_hash(&self) -> String {
        let mut h = Sha256::new();
        for layer in &self.net.layers {
            for x in layer.weights.iter().chain(layer.bias.iter()) {
                h.update(x.to_le_bytes());
            }
        }
        hex::encode(h.finalize())[..16].to_string()
    }

    pub fn embed(&self, atom: &Atom) -> Result<Vec<f64>> {
        let idx = self.encoder.active_indices(atom)?;
        let rows = [idx.as_slice()];
        Ok(self.net.forward_batch(Batch::Sparse(&rows))?.output().row(0).to_vec())
    }

    /// Embeds each atom; row `i` belongs to `atoms[i]`.
    pub fn embed_many(&self, atoms: &[Atom]) -> Result<Array2<f64>> {
        let idx = atoms
            .iter()
            .map(|a| self.encoder.active_indices(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.embed_indices(&idx))
    }

    fn embed_indices(&self, idx: &[Vec<usize>]) -> Array2<f64> {
        const CHUNK: usize = 512;
        let parts: Vec<Array2<f64>> = idx
            .par_chunks(CHUNK)
            .map(|chunk| {
                let rows: Vec<&[usize]> = chunk.iter().map(Vec::as_slice).collect();
                self.net
                    .forward_batch(Batch::Sparse(&rows))
                    .expect("indices come from the encoder")
                    .post
                    .pop()
                    .unwrap()
            })
            .collect();
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        if views.is_empty() {
            return Array2::zeros((0, EMBEDDING_DIM));
        }
        ndarray::concatenate(Axis(0), &views).expect("equal widths")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Full,
    Hard,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Full => "full",
            Phase::Hard => "hard",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub mean_loss: f64,
    pub subset_size: usize,
}

/// State of one hardest-subset refresh.
#[derive(Debug, Clone, PartialEq)]
pub struct Refresh {
    /// The refresh runs after this epoch.
    pub after_epoch: usize,
    /// Per-triplet loss over the full dataset at refresh time.
    pub losses: Vec<f64>,
    /// Selected triplet indices, in increasing order.
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub refreshes: Vec<Refresh>,
    /// Mean loss over the full dataset with the final weights.
    pub final_full_loss: f64,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,phase,mean_loss,subset_size\n");
        for r in &self.epochs {
            let _ = writeln!(s, "{},{},{},{}", r.epoch, r.phase.name(), r.mean_loss, r.subset_size);
        }
        s
    }
}

struct EncodedTriplets {
    anchor: Vec<Vec<usize>>,
    positive: Vec<Vec<usize>>,
    negative: Vec<Vec<usize>>,
}

impl EncodedTriplets {
    fn new(dataset: &TripletDataset, encoder: &Encoder) -> Result<Self> {
        let enc = |a: &Atom| encoder.active_indices(a);
        let mut out = EncodedTriplets {
            anchor: Vec::with_capacity(dataset.len()),
            positive: Vec::with_capacity(dataset.len()),
            negative: Vec::with_capacity(dataset.len()),
        };
        for t in &dataset.triplets {
            out.anchor.push(enc(&t.anchor)?);
            out.positive.push(enc(&t.positive)?);
            out.negative.push(enc(&t.negative)?);
        }
        Ok(out)
    }

    fn batch_rows(&self, ids: &[usize]) -> Vec<&[usize]> {
        let mut rows = Vec::with_capacity(3 * ids.len());
        rows.extend(ids.iter().map(|&i| self.anchor[i].as_slice()));
        rows.extend(ids.iter().map(|&i| self.positive[i].as_slice()));
        rows.extend(ids.iter().map(|&i| self.negative[i].as_slice()));
        rows
    }
}

/// Per-triplet loss of every triplet under the current weights.
fn all_losses(net: &DenseNet, data: &EncodedTriplets, margin: f64) -> Vec<f64> {
    const CHUNK: usize = 256;
    let ids: Vec<usize> = (0..data.anchor.len()).collect();
    ids.par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            let rows = data.batch_rows(chunk);
            let cache = net.forward_batch(Batch::Sparse(&rows)).expect("encoded rows");
            let out = cache.output();
            let b = chunk.len();
            (0..b)
                .map(|i| {
                    let (a, p, n) = (out.row(i), out.row(b + i), out.row(2 * b + i));
                    triplet_loss(
                        a.as_slice().unwrap(),
                        p.as_slice().unwrap(),
                        n.as_slice().unwrap(),
                        margin,
                    )
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Indices of the `k` largest losses; ties go to the lower index.
pub fn top_k_by_loss(losses: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&i, &j| losses[j].total_cmp(&losses[i]).then(i.cmp(&j)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Trains the embedding model on `dataset`.
pub fn train_embedding(
    dataset: &TripletDataset,
    mode: VariableMode,
    config: &TrainConfig,
) -> Result<(EmbeddingModel, TrainLog)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Contract("cannot train on an empty triplet dataset".into()));
    }
    let encoder = Encoder::new(dataset.vocabulary.clone(), mode);
    let data = EncodedTriplets::new(dataset, &encoder)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut dims = vec![encoder.dim()];
    dims.extend(&config.hidden_dims);
    dims.push(EMBEDDING_DIM);
    let mut net = DenseNet::init(&dims, Activation::Linear, &mut rng)?;
    let mut adam = Adam::new(&net, config.learning_rate);
    let loss_fn = TripletLoss { margin: config.margin };
    let n = dataset.len();
    let mut active: Vec<usize> = (0..n).collect();
    let mut phase = Phase::Full;
    let mut log = TrainLog::default();

    for epoch in 1..=config.epochs {
        if config.hard_samples && epoch > config.hard_period && (epoch - 1) % config.hard_period == 0 {
            let losses = all_losses(&net, &data, config.margin);
            active = top_k_by_loss(&losses, config.hard_subset_size(n));
            phase = Phase::Hard;
            log.refreshes.push(Refresh {
                after_epoch: epoch - 1,
                losses,
                selected: active.clone(),
            });
        }
        let mut order = active.clone();
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let rows = data.batch_rows(batch);
            let input = Batch::Sparse(&rows);
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
            phase,
            mean_loss: sum / order.len() as f64,
            subset_size: order.len(),
        });
    }
    let final_losses = all_losses(&net, &data, config.margin);
    log.final_full_loss = final_losses.iter().sum::<f64>() / n as f64;
    if !log.final_full_loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: config.epochs,
            learning_rate: config.learning_rate,
        });
    }
    let model = EmbeddingModel::new(net, dataset.vocabulary.clone(), mode)?;
    Ok((model, log))
}

/// Mean per-triplet loss of `dataset` under `model`.
pub fn dataset_loss(model: &EmbeddingModel, dataset: &TripletDataset, margin: f64) -> Result<f64> {
    if dataset.is_empty() {
        return Ok(0.0);
    }
    let data = EncodedTriplets::new(dataset, model.encoder())?;
    Ok(all_losses(&model.net, &data, margin).iter().sum::<f64>() / dataset.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_loss_examples() {
        let z = vec![0.0; 50];
        let mut far = z.clone();
        far[1] = 2.0;
        assert_eq!(triplet_loss(&z, &z, &far, 1.0), 0.0);
        assert_eq!(triplet_loss(&z, &z, &z, 1.0), 1.0);
        let mut p = z.clone();
        p[0] = 1.0;
        assert_eq!(triplet_loss(&z, &p, &far, 1.0), 0.0);
    }

    #[test]
    fn subset_size_rounds_up() {
        let c = TrainConfig::default();
        assert_eq!(c.hard_subset_size(100_000), 50_000);
        assert_eq!(c.hard_subset_size(7), 4);
        let all = TrainConfig {
            hard_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert_eq!(all.hard_subset_size(7), 7);
    }

    #[test]
    fn top_k_breaks_ties_by_index() {
        assert_eq!(top_k_by_loss(&[0.5, 2.0, 0.5, 1.0], 3), vec![0, 1, 3]);
    }

    #[test]
    fn invalid_configs() {
        for c in [
            TrainConfig { hard_fraction: 0.0, ..TrainConfig::default() },
            TrainConfig { hard_fraction: 1.5, ..TrainConfig::default() },
            TrainConfig { hard_period: 0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
        ] {
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }
}
