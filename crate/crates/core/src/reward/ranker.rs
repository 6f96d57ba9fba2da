use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{featurize_in_context, FeatureConfig, FeatureVector};
use super::loss::{canonical_order, listwise_loss_grad, pairwise_loss_grad, pointwise_loss_grad};
use super::{ComparisonBatch, RewardError, RewardScore};

/// Reward-model learning rate used for the 15B-scale model. Far too small
/// for a linear model; kept so the value is selectable.
pub const PAPER_LEARNING_RATE: f64 = 9.6e-6;

const FILE_MAGIC: &str = "stepfix-ranker 1";

#[derive(Debug, Clone, PartialEq)]
pub struct RankerParams {
    pub features: FeatureConfig,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl RankerParams {
    pub fn zeros(features: FeatureConfig) -> Self {
        Self {
            weights: vec![0.0; features.dim()],
            bias: 0.0,
            features,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    pub fn score_features(&self, features: &FeatureVector) -> f64 {
        features.dot(&self.weights) + self.bias
    }

    pub fn score_in_context(&self, context: Option<&str>, program: &str) -> RewardScore {
        RewardScore(self.score_features(&featurize_in_context(&self.features, context, program)))
    }

    /// Text vector file: a header with the dimension and feature settings,
    /// the bias, then one weight per line.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{FILE_MAGIC}")?;
        writeln!(out, "dim {}", self.weights.len())?;
        writeln!(out, "hash_dim {}", self.features.hash_dim)?;
        writeln!(out, "max_ngram {}", self.features.max_ngram)?;
        writeln!(out, "use_context {}", self.features.use_context)?;
        writeln!(out, "bias {}", self.bias)?;
        for w in &self.weights {
            writeln!(out, "{w}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self, RewardError> {
        let mut lines = input.lines();
        let mut next = || -> Result<String, RewardError> {
            lines
                .next()
                .ok_or_else(|| RewardError::Format("unexpected end of file".into()))?
                .map_err(RewardError::from)
        };
        if next()?.trim() != FILE_MAGIC {
            return Err(RewardError::Format("missing header".into()));
        }
        let dim: usize = header_value(&next()?, "dim")?;
        let hash_dim: usize = header_value(&next()?, "hash_dim")?;
        let max_ngram: usize = header_value(&next()?, "max_ngram")?;
        let use_context: bool = header_value(&next()?, "use_context")?;
        let bias: f64 = header_value(&next()?, "bias")?;
        let features = FeatureConfig {
            hash_dim,
            max_ngram,
            use_context,
        };
        if features.dim() != dim {
            return Err(RewardError::Format(format!(
                "dimension {dim} does not match hash_dim {hash_dim}"
            )));
        }
        let mut weights = Vec::with_capacity(dim);
        for _ in 0..dim {
            let line = next()?;
            weights.push(
                line.trim()
                    .parse()
                    .map_err(|_| RewardError::Format(format!("bad weight `{line}`")))?,
            );
        }
        let params = Self {
            features,
            weights,
            bias,
        };
        if !params.is_finite() {
            return Err(RewardError::Format("non-finite parameter".into()));
        }
        Ok(params)
    }
}

fn header_value<T: std::str::FromStr>(line: &str, key: &str) -> Result<T, RewardError> {
    line.strip_prefix(key)
        .and_then(|rest| rest.trim().parse().ok())
        .ok_or_else(|| RewardError::Format(format!("expected `{key} <value>`, got `{line}`")))
}

pub fn score(params: &RankerParams, program: &str) -> RewardScore {
    params.score_in_context(None, program)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Pair,
    Point,
    List,
}

impl std::str::FromStr for LossKind {
    type Err = RewardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pair" => Ok(LossKind::Pair),
            "point" => Ok(LossKind::Point),
            "list" => Ok(LossKind::List),
            other => Err(RewardError::Argument(format!("unknown loss kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub learning_rate: f64,
    pub steps: usize,
    /// Comparison batches per gradient step.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Pair,
            learning_rate: 1e-2,
            steps: 200,
            batch_size: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub step: usize,
    pub loss: f64,
    /// `K choose 2` summed over the step's batches.
    pub comparisons: usize,
    /// Strictly ordered pairs among those comparisons.
    pub pair_count: usize,
}

struct Unit {
    features: Vec<FeatureVector>,
    ranks: Vec<u8>,
    pairs: Vec<(usize, usize)>,
    comparisons: usize,
}

/// Plain gradient descent on the chosen ranking loss.
///
/// The pairwise loss of one batch is its summed pair loss over
/// `K choose 2`; a step averages over its batches.
pub fn train_ranker(
    batches: &[ComparisonBatch],
    cfg: &TrainConfig,
    init: RankerParams,
) -> Result<(RankerParams, Vec<TrainLogEntry>), RewardError> {
    if cfg.batch_size == 0 {
        return Err(RewardError::Argument("batch size must be at least 1".into()));
    }
    if !cfg.learning_rate.is_finite() || cfg.learning_rate < 0.0 {
        return Err(RewardError::Argument("learning rate must be finite and non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let units: Vec<Unit> = batches
        .iter()
        .filter(|b| b.programs.len() >= 2)
        .map(|b| Unit {
            features: b
                .programs
                .iter()
                .map(|p| featurize_in_context(&init.features, b.context.as_deref(), &p.source))
                .collect(),
            ranks: b.programs.iter().map(|p| p.status.rank()).collect(),
            pairs: b.shuffled_pair_indices(&mut rng),
            comparisons: b.comparisons(),
        })
        .collect();
    if units.iter().all(|u| u.pairs.is_empty()) {
        return Err(RewardError::Training(
            "no batch contains two programs with different status ranks".into(),
        ));
    }

    let mut params = init;
    let mut log = Vec::with_capacity(cfg.steps);
    let mut order: Vec<usize> = (0..units.len()).collect();
    let mut cursor = order.len();
    let mut grad_w = vec![0.0; params.weights.len()];

    for step in 0..cfg.steps {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        let mut loss_sum = 0.0;
        let mut comparisons = 0;
        let mut pair_count = 0;

        let take = cfg.batch_size.min(units.len());
        for _ in 0..take {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let unit = &units[order[cursor]];
            cursor += 1;
            comparisons += unit.comparisons;
            pair_count += unit.pairs.len();

            let scores: Vec<f64> = unit.features.iter().map(|f| params.score_features(f)).collect();
            let (loss, dscore) = unit_loss(cfg.loss, unit, &scores)?;
            loss_sum += loss;
            for (f, d) in unit.features.iter().zip(&dscore) {
                if *d == 0.0 {
                    continue;
                }
                for &(i, x) in f.entries() {
                    grad_w[i] += d * x;
                }
                grad_b += d;
            }
        }

        let scale = 1.0 / take as f64;
        for (w, g) in params.weights.iter_mut().zip(&grad_w) {
            *w -= cfg.learning_rate * g * scale;
        }
        params.bias -= cfg.learning_rate * grad_b * scale;
        if !params.is_finite() {
            return Err(RewardError::Training(format!("parameters diverged at step {step}")));
        }
        log.push(TrainLogEntry {
            step,
            loss: loss_sum * scale,
            comparisons,
            pair_count,
        });
    }
    Ok((params, log))
}

/// Loss of one batch and its gradient with respect to each program's score.
fn unit_loss(kind: LossKind, unit: &Unit, scores: &[f64]) -> Result<(f64, Vec<f64>), RewardError> {
    let n = scores.len();
    let mut grad = vec![0.0; n];
    let loss = match kind {
        LossKind::Pair => {
            let norm = unit.comparisons.max(1) as f64;
            let mut total = 0.0;
            for &(w, l) in &unit.pairs {
                let (loss, g) = pairwise_loss_grad(scores[w], scores[l]);
                total += loss;
                grad[w] += g[0] / norm;
                grad[l] += g[1] / norm;
            }
            total / norm
        }
        LossKind::Point => {
            let mut total = 0.0;
            for i in 0..n {
                let (loss, g) = pointwise_loss_grad(scores[i], unit.ranks[i]);
                total += loss;
                grad[i] = g / n as f64;
            }
            total / n as f64
        }
        LossKind::List => {
            let order = canonical_order(&unit.ranks);
            let ordered: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
            let (loss, g) = listwise_loss_grad(&ordered)?;
            for (pos, &i) in order.iter().enumerate() {
                grad[i] = g[pos];
            }
            loss
        }
    };
    Ok((loss, grad))
}

/// Fraction of strictly ordered pairs the ranker orders correctly. Equal
/// scores count as wrong.
pub fn pairwise_accuracy(params: &RankerParams, batches: &[ComparisonBatch]) -> f64 {
    let mut correct = 0usize;
    let mut total = 0usize;
    for batch in batches {
        let scores: Vec<f64> = batch
            .programs
            .iter()
            .map(|p| params.score_in_context(batch.context.as_deref(), &p.source).value())
            .collect();
        for (w, l) in batch.pair_indices() {
            total += 1;
            if scores[w] > scores[l] {
                correct += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}
