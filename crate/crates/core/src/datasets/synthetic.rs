use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Sample, ViewLayout};
use crate::error::{Error, Result};
use crate::seeds::{self, Stream};

/// Gaussian-mixture benchmark description. The last class is the
/// "impurity" majority class centred at the origin; every other class sits
/// at distance `separation` from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub counts: Vec<usize>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub separation: f64,
    /// Standard deviation of the noise added to form DS1's degraded view.
    pub ds1_noise: f64,
    /// Standard deviation of the impurity cluster (other clusters use 1).
    #[serde(default = "default_impurity_spread")]
    pub impurity_spread: f64,
}

fn default_dim() -> usize {
    8
}

fn default_impurity_spread() -> f64 {
    1.0
}

const LAR2_COUNTS: [usize; 2] = [501, 1351];
const EGG9_COUNTS: [usize; 9] = [501, 83, 286, 103, 835, 435, 254, 379, 9815];
const PRO7_COUNTS: [usize; 7] = [869, 659, 1783, 1931, 3297, 309, 28528];

impl SyntheticSpec {
    fn preset(name: &str, counts: &[usize], scale: f64) -> Self {
        SyntheticSpec {
            name: name.to_string(),
            counts: counts
                .iter()
                .map(|&c| ((c as f64 * scale).round() as usize).max(3))
                .collect(),
            dim: default_dim(),
            separation: 5.0,
            ds1_noise: 1.5,
            impurity_spread: default_impurity_spread(),
        }
    }

    /// Class sizes of the larvae group, multiplied by `scale`.
    pub fn lar2(scale: f64) -> Self {
        Self::preset("LAR-2", &LAR2_COUNTS, scale)
    }

    /// Class sizes of the helminth-egg group, multiplied by `scale`.
    pub fn egg9(scale: f64) -> Self {
        Self::preset("EGG-9", &EGG9_COUNTS, scale)
    }

    /// Class sizes of the protozoa group, multiplied by `scale`.
    pub fn pro7(scale: f64) -> Self {
        Self::preset("PRO-7", &PRO7_COUNTS, scale)
    }

    pub fn by_name(name: &str, scale: f64) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "lar-2" | "lar2" => Some(Self::lar2(scale)),
            "egg-9" | "egg9" => Some(Self::egg9(scale)),
            "pro-7" | "pro7" => Some(Self::pro7(scale)),
            _ => None,
        }
    }

    pub fn m(&self) -> usize {
        self.counts.len()
    }

    fn validate(&self) -> Result<()> {
        if self.counts.len() < 2 {
            return Err(Error::Validation("synthetic spec needs at least 2 classes".into()));
        }
        if let Some(k) = self.counts.iter().position(|&c| c == 0) {
            return Err(Error::Validation(format!(
                "class {} has a non-positive sample count",
                k + 1
            )));
        }
        if !(self.separation > 0.0) {
            return Err(Error::Validation("separation must be positive".into()));
        }
        if !(self.ds1_noise >= 0.0) || !(self.impurity_spread > 0.0) || self.dim == 0 {
            return Err(Error::Validation(
                "ds1_noise must be >= 0, impurity_spread > 0 and dim > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Draw a dataset whose features hold `[clean view | degraded view]`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let m = spec.m();
    let d = spec.dim;
    let mut rng = seeds::stream_rng(seed, Stream::Synthetic);

    let mut means = vec![vec![0.0; d]; m];
    for (k, mean) in means.iter_mut().enumerate().take(m - 1) {
        if m - 1 <= d {
            mean[k] = spec.separation;
        } else {
            let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            for (x, v) in mean.iter_mut().zip(&dir) {
                *x = v / norm * spec.separation;
            }
        }
    }

    let total: usize = spec.counts.iter().sum();
    let width = (total.max(1) as f64).log10().floor() as usize + 1;
    let mut samples = Vec::with_capacity(total);
    for (k, &count) in spec.counts.iter().enumerate() {
        let spread = if k == m - 1 { spec.impurity_spread } else { 1.0 };
        for _ in 0..count {
            let clean: Vec<f64> = means[k]
                .iter()
                .map(|&mu| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mu + spread * z
                })
                .collect();
            let degraded: Vec<f64> = clean
                .iter()
                .map(|&x| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x + spec.ds1_noise * z
                })
                .collect();
            let mut features = clean;
            features.extend(degraded);
            let id = format!("s{:0width$}", samples.len(), width = width);
            samples.push(Sample::tabular(id, features, k + 1));
        }
    }

    let mut class_names: Vec<String> = (1..m).map(|k| format!("class-{k}")).collect();
    class_names.push("impurities".into());
    let mut dataset = Dataset::with_classes(spec.name.clone(), samples, class_names)?;
    dataset.views = Some(ViewLayout {
        clean: 0..d,
        degraded: d..2 * d,
    });
    Ok(dataset)
}
