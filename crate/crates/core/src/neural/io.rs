use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::net::{Activation, DenseLayer, DenseNet};
use super::scorer::{RuleRepr, ScoringModel};
use super::{EmbeddingModel, EMBEDDING_DIM};
use crate::encoder::VariableMode;
use crate::error::{Error, Result};
use crate::logic::Vocabulary;

const FORMAT: &str = "horn-embed-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerFile {
    /// Row `i` holds the weights leaving input unit `i`.
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    kind: String,
    vocab_hash: String,
    config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vocabulary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variable_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rule_repr: Option<String>,
    layer_dims: Vec<usize>,
    activations: Vec<Activation>,
    layers: Vec<LayerFile>,
}

fn net_parts(net: &DenseNet) -> (Vec<usize>, Vec<Activation>, Vec<LayerFile>) {
    let acts = (0..net.layers.len()).map(|l| net.activation(l)).collect();
    let layers = net
        .layers
        .iter()
        .map(|l| LayerFile {
            weights: l.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
            bias: l.bias.to_vec(),
        })
        .collect();
    (net.layer_dims(), acts, layers)
}

fn net_from(file: &ModelFile) -> Result<DenseNet> {
    let bad = |m: String| Error::Malformed(format!("model file: {m}"));
    if file.layers.is_empty() || file.activations.len() != file.layers.len() {
        return Err(bad("activation count does not match layer count".into()));
    }
    if file.layer_dims.len() != file.layers.len() + 1 {
        return Err(bad("layer_dims does not match layer count".into()));
    }
    let mut layers = Vec::with_capacity(file.layers.len());
    for (i, l) in file.layers.iter().enumerate() {
        let (rows, cols) = (file.layer_dims[i], file.layer_dims[i + 1]);
        if l.weights.len() != rows || l.weights.iter().any(|r| r.len() != cols) || l.bias.len() != cols {
            return Err(bad(format!("layer {i} is not {rows}x{cols}")));
        }
        let flat: Vec<f64> = l.weights.iter().flatten().copied().collect();
        layers.push(DenseLayer {
            weights: Array2::from_shape_vec((rows, cols), flat).expect("shape checked"),
            bias: Array1::from_vec(l.bias.clone()),
        });
    }
    let hidden = file.activations[0..file.activations.len() - 1]
        .first()
        .copied()
        .unwrap_or(Activation::Relu);
    if file.activations[..file.activations.len() - 1].iter().any(|&a| a != hidden) {
        return Err(bad("hidden layers must share one activation".into()));
    }
    DenseNet::from_layers(layers, hidden, *file.activations.last().unwrap())
}

fn check_header(file: &ModelFile, kind: &str) -> Result<()> {
    if file.format != FORMAT || file.version != VERSION {
        return Err(Error::Malformed(format!(
            "unsupported model format {} v{}",
            file.format, file.version
        )));
    }
    if file.kind != kind {
        return Err(Error::Malformed(format!("expected a {kind} model, found {}", file.kind)));
    }
    Ok(())
}

fn write(path: &Path, file: &ModelFile) -> Result<()> {
    let text = serde_json::to_string_pretty(file)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn save_embedding(model: &EmbeddingModel, path: &Path) -> Result<()> {
    let (layer_dims, activations, layers) = net_parts(&model.net);
    write(
        path,
        &ModelFile {
            format: FORMAT.into(),
            version: VERSION,
            kind: "embedding".into(),
            vocab_hash: model.vocab_hash().into(),
            config_hash: model.config_hash.clone(),
            vocabulary: Some(model.vocabulary().describe()),
            variable_mode: Some(model.encoder().mode().name().into()),
            embedding_hash: None,
            rule_repr: None,
            layer_dims,
            activations,
            layers,
        },
    )
}

pub fn load_embedding(path: &Path) -> Result<EmbeddingModel> {
    let file: ModelFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    check_header(&file, "embedding")?;
    let vocab = Vocabulary::from_description(
        file.vocabulary
            .as_deref()
            .ok_or_else(|| Error::Malformed("embedding model lacks its vocabulary".into()))?,
    )?;
    if vocab.hash_hex() != file.vocab_hash {
        return Err(Error::HashMismatch {
            what: "vocabulary".into(),
            expected: file.vocab_hash.clone(),
            found: vocab.hash_hex(),
        });
    }
    let mode: VariableMode = file.variable_mode.as_deref().unwrap_or("identity").parse()?;
    let mut model = EmbeddingModel::new(net_from(&file)?, vocab, mode)?;
    model.config_hash = file.config_hash;
    Ok(model)
}

pub fn save_scorer(model: &ScoringModel, path: &Path) -> Result<()> {
    let (layer_dims, activations, layers) = net_parts(&model.net);
    write(
        path,
        &ModelFile {
            format: FORMAT.into(),
            version: VERSION,
            kind: "scorer".into(),
            vocab_hash: model.vocab_hash.clone(),
            config_hash: model.config_hash.clone(),
            vocabulary: None,
            variable_mode: None,
            embedding_hash: Some(model.embedding_hash.clone()),
            rule_repr: Some(model.rule_repr.name().into()),
            layer_dims,
            activations,
            layers,
        },
    )
}

pub fn load_scorer(path: &Path) -> Result<ScoringModel> {
    let file: ModelFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    check_header(&file, "scorer")?;
    let rule_repr: RuleRepr = file.rule_repr.as_deref().unwrap_or("head").parse()?;
    let net = net_from(&file)?;
    if net.input_dim() != 2 * EMBEDDING_DIM || net.output_dim() != 1 || net.output != Activation::Sigmoid {
        return Err(Error::Malformed("scorer must map 100 inputs to one logistic output".into()));
    }
    Ok(ScoringModel {
        net,
        vocab_hash: file.vocab_hash,
        embedding_hash: file
            .embedding_hash
            .ok_or_else(|| Error::Malformed("scorer lacks its embedding hash".into()))?,
        rule_repr,
        config_hash: file.config_hash,
    })
}
