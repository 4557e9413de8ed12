//! Node-count statistics, total variation distance between similarity
//! distributions, and training/test goal overlap.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::logic::{Atom, Clause};
use crate::neural::{squared_distance, EmbeddingModel};
use crate::reasoner::{Outcome, ProofResult, ResultRow};
use crate::triplets::TripletDataset;

/// What the statistics need from one query run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryCost {
    pub nodes: u64,
    pub proved: bool,
}

impl From<&ProofResult> for QueryCost {
    fn from(r: &ProofResult) -> Self {
        QueryCost {
            nodes: r.nodes_explored,
            proved: matches!(r.outcome, Outcome::Proved { .. }),
        }
    }
}

impl From<&ResultRow> for QueryCost {
    fn from(r: &ResultRow) -> Self {
        QueryCost {
            nodes: r.nodes,
            proved: r.proved(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KbStats {
    pub queries: usize,
    pub min: u64,
    pub max: u64,
    pub mean: f64,
    pub stddev: f64,
    pub median: f64,
    pub fails: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeStats {
    /// Mean over all queries pooled.
    pub mean_nodes: f64,
    /// Mean of the per-KB medians.
    pub median_nodes: f64,
    /// Mean per-KB count of unproved queries.
    pub fails: f64,
    pub per_kb: Vec<KbStats>,
}

impl NodeStats {
    /// `(min, max, mean, stddev)` of the per-KB mean node counts.
    pub fn spread_of_kb_means(&self) -> (f64, f64, f64, f64) {
        let means: Vec<f64> = self.per_kb.iter().map(|k| k.mean).collect();
        let min = means.iter().copied().fold(f64::INFINITY, f64::min);
        let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mean, sd) = mean_and_stddev(&means);
        (min, max, mean, sd)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_and_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn kb_stats(costs: &[QueryCost]) -> KbStats {
    let nodes: Vec<f64> = costs.iter().map(|c| c.nodes as f64).collect();
    let (mean, stddev) = mean_and_stddev(&nodes);
    KbStats {
        queries: costs.len(),
        min: costs.iter().map(|c| c.nodes).min().unwrap_or(0),
        max: costs.iter().map(|c| c.nodes).max().unwrap_or(0),
        mean,
        stddev,
        median: median(&nodes),
        fails: costs.iter().filter(|c| !c.proved).count(),
    }
}

/// Aggregates per-KB query costs. Capped queries already carry the cap as
/// their node count and count as fails, like every other unproved query.
pub fn node_stats(per_kb: &[Vec<QueryCost>]) -> Result<NodeStats> {
    if per_kb.is_empty() || per_kb.iter().any(Vec::is_empty) {
        return Err(Error::Contract("node statistics need at least one query per KB".into()));
    }
    let per: Vec<KbStats> = per_kb.iter().map(|c| kb_stats(c)).collect();
    let total: usize = per.iter().map(|k| k.queries).sum();
    let pooled: f64 = per_kb.iter().flatten().map(|c| c.nodes as f64).sum::<f64>() / total as f64;
    let k = per.len() as f64;
    Ok(NodeStats {
        mean_nodes: pooled,
        median_nodes: per.iter().map(|s| s.median).sum::<f64>() / k,
        fails: per.iter().map(|s| s.fails as f64).sum::<f64>() / k,
        per_kb: per,
    })
}

/// Similarity scores of anchor-positive and anchor-negative pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DistancePairSet {
    pub positive_scores: Vec<f64>,
    pub negative_scores: Vec<f64>,
}

impl DistancePairSet {
    /// Similarity is the negative squared distance between embeddings.
    pub fn from_model(em: &EmbeddingModel, dataset: &TripletDataset) -> Result<Self> {
        let mut atoms = Vec::with_capacity(3 * dataset.len());
        for t in &dataset.triplets {
            atoms.extend([t.anchor.clone(), t.positive.clone(), t.negative.clone()]);
        }
        let e = em.embed_many(&atoms)?;
        let row = |i: usize| e.row(i).to_vec();
        let mut out = DistancePairSet {
            positive_scores: Vec::with_capacity(dataset.len()),
            negative_scores: Vec::with_capacity(dataset.len()),
        };
        for i in 0..dataset.len() {
            let (a, p, n) = (row(3 * i), row(3 * i + 1), row(3 * i + 2));
            out.positive_scores.push(-squared_distance(&a, &p));
            out.negative_scores.push(-squared_distance(&a, &n));
        }
        Ok(out)
    }
}

/// Histograms both score lists over their shared range and returns half the
/// L1 distance between the normalized histograms.
pub fn tv_distance(d: &DistancePairSet, num_bins: usize) -> Result<f64> {
    if num_bins < 2 {
        return Err(Error::Config("tv_distance needs at least 2 bins".into()));
    }
    if d.positive_scores.is_empty() || d.negative_scores.is_empty() {
        return Err(Error::Contract("tv_distance needs two non-empty lists".into()));
    }
    let all = d.positive_scores.iter().chain(&d.negative_scores);
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Ok(0.0);
    }
    let hist = |xs: &[f64]| {
        let mut h = vec![0.0; num_bins];
        for &x in xs {
            let b = (((x - lo) / (hi - lo)) * num_bins as f64) as usize;
            h[b.min(num_bins - 1)] += 1.0;
        }
        let n = xs.len() as f64;
        h.iter_mut().for_each(|v| *v /= n);
        h
    };
    let (p, q) = (hist(&d.positive_scores), hist(&d.negative_scores));
    Ok(0.5 * p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Percentage of test pairs whose clause occurs in training with a goal that
/// is a variable renaming of the test goal. `None` for an empty test set.
pub fn semantic_match(train: &[(Atom, Clause)], test: &[(Atom, Clause)]) -> Option<f64> {
    let seen: HashSet<(Atom, &Clause)> = train.iter().map(|(g, c)| (g.canonical(), c)).collect();
    percentage(test, |(g, c)| seen.contains(&(g.canonical(), c)))
}

/// Like [`semantic_match`] but goals must be literally equal.
pub fn exact_match(train: &[(Atom, Clause)], test: &[(Atom, Clause)]) -> Option<f64> {
    let seen: HashSet<(&Atom, &Clause)> = train.iter().map(|(g, c)| (g, c)).collect();
    percentage(test, |(g, c)| seen.contains(&(g, c)))
}

fn percentage(test: &[(Atom, Clause)], hit: impl Fn(&(Atom, Clause)) -> bool) -> Option<f64> {
    if test.is_empty() {
        return None;
    }
    Some(100.0 * test.iter().filter(|p| hit(p)).count() as f64 / test.len() as f64)
}

/// One line of the metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub model_id: String,
    pub kb_id: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub stddev: f64,
    pub median: f64,
    pub fails: f64,
    pub tv_dist: Option<f64>,
    pub sem_match: Option<f64>,
    pub exact_match: Option<f64>,
}

pub const METRICS_HEADER: &str =
    "model_id,kb_id,min,max,mean,stddev,median,fails,tv_dist,sem_match,exact_match";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn format_metrics(rows: &[MetricsRow]) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.model_id,
            r.kb_id,
            r.min,
            r.max,
            r.mean,
            r.stddev,
            r.median,
            r.fails,
            opt(r.tv_dist),
            opt(r.sem_match),
            opt(r.exact_match)
        );
    }
    s
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h == METRICS_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing metrics header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let err = || Error::Parse {
            line: n + 1,
            message: format!("bad metrics row `{line}`"),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(err());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err());
        let optn = |s: &str| {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        out.push(MetricsRow {
            model_id: f[0].into(),
            kb_id: f[1].into(),
            min: num(f[2])?,
            max: num(f[3])?,
            mean: num(f[4])?,
            stddev: num(f[5])?,
            median: num(f[6])?,
            fails: num(f[7])?,
            tv_dist: optn(f[8])?,
            sem_match: optn(f[9])?,
            exact_match: optn(f[10])?,
        });
    }
    Ok(out)
}

/// Per-KB rows plus an `all` row whose min/max/mean/stddev summarize the
/// per-KB means.
pub fn metrics_rows(
    model_id: &str,
    kb_ids: &[String],
    stats: &NodeStats,
    tv_dist: Option<f64>,
    sem_match: Option<f64>,
    exact: Option<f64>,
) -> Vec<MetricsRow> {
    let mut rows: Vec<MetricsRow> = stats
        .per_kb
        .iter()
        .zip(kb_ids)
        .map(|(k, id)| MetricsRow {
            model_id: model_id.into(),
            kb_id: id.clone(),
            min: k.min as f64,
            max: k.max as f64,
            mean: k.mean,
            stddev: k.stddev,
            median: k.median,
            fails: k.fails as f64,
            tv_dist: None,
            sem_match: None,
            exact_match: None,
        })
        .collect();
    let (min, max, mean, stddev) = stats.spread_of_kb_means();
    rows.push(MetricsRow {
        model_id: model_id.into(),
        kb_id: "all".into(),
        min,
        max,
        mean,
        stddev,
        median: stats.median_nodes,
        fails: stats.fails,
        tv_dist,
        sem_match,
        exact_match: exact,
    });
    rows
}
