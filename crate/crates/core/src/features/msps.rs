//! Multi-scale greedy search for per-feature weights.
//!
//! Starting from unit weights, each iteration tries `w_d +/- delta` for every
//! dimension and scale, scores each candidate by k-fold cross-validated
//! accuracy on the training set, and accepts the single best strict
//! improvement. The search stops when nothing improves or `max_iters` is hit.

use rand::seq::SliceRandom;

use super::FeatureWeights;
use crate::error::{Error, Result, ResultExt};
use crate::seeds;

/// Fits on one fold's training part and predicts the held-out part.
pub trait FoldClassifier {
    fn fit_predict(
        &self,
        train_x: &[Vec<f64>],
        train_y: &[usize],
        test_x: &[Vec<f64>],
    ) -> Result<Vec<usize>>;
}

impl<F> FoldClassifier for F
where
    F: Fn(&[Vec<f64>], &[usize], &[Vec<f64>]) -> Result<Vec<usize>>,
{
    fn fit_predict(
        &self,
        train_x: &[Vec<f64>],
        train_y: &[usize],
        test_x: &[Vec<f64>],
    ) -> Result<Vec<usize>> {
        self(train_x, train_y, test_x)
    }
}

/// 1-nearest-neighbour under Euclidean distance; lowest index wins ties.
#[derive(Debug, Clone, Copy, Default)]
pub struct NearestNeighbor;

impl FoldClassifier for NearestNeighbor {
    fn fit_predict(
        &self,
        train_x: &[Vec<f64>],
        train_y: &[usize],
        test_x: &[Vec<f64>],
    ) -> Result<Vec<usize>> {
        if train_x.is_empty() {
            return Err(Error::Training("nearest neighbour needs training data".into()));
        }
        Ok(test_x
            .iter()
            .map(|t| {
                let mut best = (f64::INFINITY, 0);
                for (x, &y) in train_x.iter().zip(train_y) {
                    let d: f64 = x.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d < best.0 {
                        best = (d, y);
                    }
                }
                best.1
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MspsConfig {
    /// Step sizes, largest first.
    pub scales: Vec<f64>,
    pub max_iters: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for MspsConfig {
    fn default() -> Self {
        MspsConfig {
            scales: vec![0.5, 0.25, 0.125],
            max_iters: 20,
            folds: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MspsResult {
    pub weights: FeatureWeights,
    /// Objective at unit weights followed by the objective after every
    /// accepted step.
    pub objective_trace: Vec<f64>,
}

/// Stratified fold index per sample.
fn fold_assignment(labels: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeds::rng(seed);
    let mut fold = vec![0; labels.len()];
    let max_label = labels.iter().copied().max().unwrap_or(0);
    let mut next = 0;
    for class in 0..=max_label {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            fold[i] = next % folds;
            next += 1;
        }
    }
    fold
}

fn cross_validated_accuracy<E: FoldClassifier + ?Sized>(
    features: &[Vec<f64>],
    labels: &[usize],
    folds: &[usize],
    k: usize,
    weights: &[f64],
    evaluator: &E,
) -> Result<f64> {
    let weighted: Vec<Vec<f64>> = features
        .iter()
        .map(|f| f.iter().zip(weights).map(|(x, w)| x * w).collect())
        .collect();
    let mut correct = 0usize;
    let mut evaluated = 0usize;
    for fold in 0..k {
        let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, f) in weighted.iter().enumerate() {
            if folds[i] == fold {
                vx.push(f.clone());
                vy.push(labels[i]);
            } else {
                tx.push(f.clone());
                ty.push(labels[i]);
            }
        }
        if vx.is_empty() || tx.is_empty() {
            continue;
        }
        let pred = evaluator.fit_predict(&tx, &ty, &vx)?;
        correct += pred.iter().zip(&vy).filter(|(p, y)| p == y).count();
        evaluated += vy.len();
    }
    if evaluated == 0 {
        return Err(Error::Validation("not enough samples for cross-validation".into()));
    }
    Ok(correct as f64 / evaluated as f64)
}

pub fn msps_optimize<E: FoldClassifier + ?Sized>(
    features: &[Vec<f64>],
    labels: &[usize],
    evaluator: &E,
    config: &MspsConfig,
) -> Result<MspsResult> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::Validation(
            "MSPS needs a non-empty training set with one label per row".into(),
        ));
    }
    if config.scales.is_empty() || config.scales.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Validation("MSPS scales must be non-empty and positive".into()));
    }
    if config.scales.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Validation("MSPS scales must be decreasing".into()));
    }
    let dim = features[0].len();
    let k = config.folds.max(2);
    let folds = fold_assignment(labels, k, config.seed);
    let mut weights = vec![1.0; dim];
    if config.max_iters == 0 {
        return Ok(MspsResult {
            weights: FeatureWeights::unit(dim),
            objective_trace: Vec::new(),
        });
    }
    let mut current = cross_validated_accuracy(features, labels, &folds, k, &weights, evaluator)
        .context_with(|| "MSPS initial evaluation".to_string())?;
    let mut trace = vec![current];

    for iteration in 0..config.max_iters {
        let mut best: Option<(f64, usize, f64)> = None;
        for d in 0..dim {
            for &delta in &config.scales {
                for sign in [1.0, -1.0] {
                    let candidate = (weights[d] + sign * delta).max(0.0);
                    if candidate == weights[d] {
                        continue;
                    }
                    let saved = weights[d];
                    weights[d] = candidate;
                    let score = cross_validated_accuracy(features, labels, &folds, k, &weights, evaluator)
                        .context_with(|| {
                            format!("MSPS iteration {iteration}, dimension {d}, step {}", sign * delta)
                        });
                    weights[d] = saved;
                    let score = score?;
                    let threshold = best.map_or(current, |b| b.0);
                    if score > threshold {
                        best = Some((score, d, candidate));
                    }
                }
            }
        }
        match best {
            Some((score, d, w)) => {
                weights[d] = w;
                current = score;
                trace.push(score);
            }
            None => break,
        }
    }
    Ok(MspsResult {
        weights: FeatureWeights::new(weights)?,
        objective_trace: trace,
    })
}
