//! The slow, accurate second-stage classifier (DS2).

use std::ops::Range;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;

use super::grid::{grid_search, Grid, GridInput, KernelKind};
use super::kernel::Kernel;
use super::multiclass::{train_multiclass, MulticlassModel, Strategy, TrainParams};
use super::query::{Assignment, Preprocess, Query};
use crate::datasets::Sample;
use crate::error::{Error, Result};
use crate::features::raw_features;
use crate::seeds;

pub trait StrongClassifier {
    /// Fit on training samples with labels in `1..=m`.
    fn train(&mut self, samples: &[&Sample], m: usize) -> Result<()>;

    fn classify(&self, queries: &[Query]) -> Result<Vec<Assignment>>;

    /// Configured per-sample cost floor.
    fn nominal_cost(&self) -> Duration {
        Duration::ZERO
    }
}

/// Block until `start + delay`. Sleeps for the bulk, spins for the tail.
pub fn wait_until(start: Instant, delay: Duration) {
    let deadline = start + delay;
    loop {
        let now = Instant::now();
        if now >= deadline {
            return;
        }
        let left = deadline - now;
        if left > Duration::from_micros(300) {
            std::thread::sleep(left - Duration::from_micros(200));
        } else {
            std::hint::spin_loop();
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceStrongConfig {
    /// Raw feature columns DS2 sees (the clean view of synthetic data).
    pub columns: Option<Range<usize>>,
    pub kernel: KernelKind,
    pub grid: Grid,
    pub delay: Duration,
    pub seed: u64,
}

impl Default for ReferenceStrongConfig {
    fn default() -> Self {
        ReferenceStrongConfig {
            columns: None,
            kernel: KernelKind::Rbf,
            grid: Grid::default(),
            delay: Duration::ZERO,
            seed: 0,
        }
    }
}

/// Probabilistic RBF SVM on its own feature view, with an artificial
/// per-sample delay emulating an expensive model.
#[derive(Debug, Clone)]
pub struct ReferenceStrong {
    pub config: ReferenceStrongConfig,
    model: Option<MulticlassModel>,
}

impl ReferenceStrong {
    pub fn new(config: ReferenceStrongConfig) -> Self {
        ReferenceStrong { config, model: None }
    }

    pub fn model(&self) -> Option<&MulticlassModel> {
        self.model.as_ref()
    }

    pub fn set_delay(&mut self, delay: Duration) {
        self.config.delay = delay;
    }
}

impl StrongClassifier for ReferenceStrong {
    fn train(&mut self, samples: &[&Sample], m: usize) -> Result<()> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let raw: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| raw_features(s).map(|f| f.values))
            .collect::<Result<_>>()?;
        let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
        let pre = Preprocess::fit(&raw, self.config.columns.clone(), None)?;
        let x = pre.apply_all(&raw)?;
        let base = TrainParams {
            seed: self.config.seed,
            ..TrainParams::new(Kernel::Linear, 1.0)
        };
        let single = self.config.grid.c.len() == 1
            && (self.config.grid.gamma.len() == 1 || self.config.kernel == KernelKind::Linear);
        let model = if single {
            let kernel = match self.config.kernel {
                KernelKind::Linear => Kernel::Linear,
                KernelKind::Rbf => Kernel::Rbf {
                    gamma: self.config.grid.gamma[0],
                },
            };
            let params = TrainParams {
                kernel,
                c: self.config.grid.c[0],
                ..base
            };
            train_multiclass(&x, &labels, m, Strategy::Probabilistic, &params)?
        } else {
            // Internal holdout on the training samples picks (C, gamma).
            let (fit_idx, hold_idx) = holdout(&labels, m, self.config.seed);
            let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
                (idx.iter().map(|&t| x[t].clone()).collect(), idx.iter().map(|&t| labels[t]).collect())
            };
            let (ax, ay) = pick(&fit_idx);
            let (bx, by) = pick(&hold_idx);
            let found = grid_search(
                &GridInput {
                    z1_x: &ax,
                    z1_y: &ay,
                    z2_x: &bx,
                    z2_y: &by,
                    m,
                },
                Strategy::Probabilistic,
                self.config.kernel,
                &self.config.grid,
                &base,
            )?;
            let kernel = match found.gamma {
                Some(gamma) => Kernel::Rbf { gamma },
                None => Kernel::Linear,
            };
            train_multiclass(
                &x,
                &labels,
                m,
                Strategy::Probabilistic,
                &TrainParams {
                    kernel,
                    c: found.c,
                    ..base
                },
            )?
        };
        self.model = Some(model.with_preprocess(pre));
        Ok(())
    }

    fn classify(&self, queries: &[Query]) -> Result<Vec<Assignment>> {
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| Error::Validation("strong classifier used before training".into()))?;
        queries
            .iter()
            .map(|q| {
                let start = Instant::now();
                let a = model.classify_query(q);
                wait_until(start, self.config.delay);
                a
            })
            .collect()
    }

    fn nominal_cost(&self) -> Duration {
        self.config.delay
    }
}

/// Per-class 70/30 partition of training positions. Classes with a single
/// sample stay on the fitting side.
fn holdout(labels: &[usize], m: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = seeds::stream_rng(seed, seeds::Stream::Split);
    let mut fit = Vec::new();
    let mut hold = Vec::new();
    for k in 1..=m {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&t| labels[t] == k).collect();
        members.shuffle(&mut rng);
        let h = if members.len() >= 2 {
            ((members.len() as f64 * 0.3).round() as usize).max(1)
        } else {
            0
        };
        hold.extend_from_slice(&members[..h]);
        fit.extend_from_slice(&members[h..]);
    }
    fit.sort_unstable();
    hold.sort_unstable();
    (fit, hold)
}

/// Wraps an already trained model; `train` is a no-op.
#[derive(Debug, Clone)]
pub struct ModelStrong {
    pub model: MulticlassModel,
    pub delay: Duration,
}

impl ModelStrong {
    pub fn new(model: MulticlassModel) -> Self {
        ModelStrong {
            model,
            delay: Duration::ZERO,
        }
    }
}

impl StrongClassifier for ModelStrong {
    fn train(&mut self, _samples: &[&Sample], _m: usize) -> Result<()> {
        Ok(())
    }

    fn classify(&self, queries: &[Query]) -> Result<Vec<Assignment>> {
        queries
            .iter()
            .map(|q| {
                let start = Instant::now();
                let a = self.model.classify_query(q);
                wait_until(start, self.delay);
                a
            })
            .collect()
    }

    fn nominal_cost(&self) -> Duration {
        self.delay
    }
}
