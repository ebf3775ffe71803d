//! DS1's handcrafted description of an aligned object image and its mask.
//!
//! A raw descriptor is the concatenation `bic (128) | shape (7) | texture (4)`.
//! Descriptors are standardized with statistics fitted on the training
//! partition and then scaled by per-dimension weights.

mod bic;
mod msps;
mod raster;
mod shape;
mod texture;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::datasets::Sample;
use crate::error::{Error, Result, ResultExt};

pub use bic::{bic_descriptor, bic_histograms, log_compress, quantize, BicHistograms, BIC_COLORS, BIC_LEN};
pub use msps::{msps_optimize, FoldClassifier, MspsConfig, MspsResult, NearestNeighbor};
pub use raster::{load_mask, load_rgb, rotate_rgb90, Mask};
pub use shape::{shape_features, MomentEllipse, ShapeFeatures, SHAPE_LEN};
pub use texture::{
    cooccurrence_counts, cooccurrence_features, gray_level, texture_from_counts, TextureFeatures,
    GRAY_LEVELS, TEXTURE_LEN,
};

pub const DESCRIPTOR_LEN: usize = BIC_LEN + SHAPE_LEN + TEXTURE_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    Bic,
    Shape,
    Texture,
    /// Features that came from a tabular file.
    Tabular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Named blocks as (block, length), in order.
    pub layout: Vec<(Block, usize)>,
}

impl FeatureVector {
    pub fn descriptor_layout() -> Vec<(Block, usize)> {
        vec![
            (Block::Bic, BIC_LEN),
            (Block::Shape, SHAPE_LEN),
            (Block::Texture, TEXTURE_LEN),
        ]
    }

    pub fn block(&self, which: Block) -> Option<&[f64]> {
        let mut start = 0;
        for &(b, len) in &self.layout {
            if b == which {
                return Some(&self.values[start..start + len]);
            }
            start += len;
        }
        None
    }
}

/// Non-negative per-dimension weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeights(Vec<f64>);

impl FeatureWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Validation("feature weights must be finite and >= 0".into()));
        }
        Ok(FeatureWeights(w))
    }

    pub fn unit(dim: usize) -> Self {
        FeatureWeights(vec![1.0; dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-dimension mean and standard deviation. Constant dimensions keep a
/// unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let dim = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            if r.len() != dim {
                return Err(Error::Shape(format!("row of length {} in {dim}-dim data", r.len())));
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::Shape(format!(
                "expected {} features, got {}",
                self.dim(),
                row.len()
            )));
        }
        Ok(row
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }
}

/// Raw `bic | shape | texture` descriptor of one object.
pub fn describe(image: &RgbImage, mask: &Mask) -> Result<FeatureVector> {
    let mut values = bic_descriptor(image, mask)?;
    values.extend(shape_features(mask)?.to_vec());
    values.extend(cooccurrence_features(image, mask)?.to_vec());
    Ok(FeatureVector {
        values,
        layout: FeatureVector::descriptor_layout(),
    })
}

/// Unstandardized features of a sample: the image descriptor when the
/// sample has an image and mask, its tabular vector otherwise.
pub fn raw_features(sample: &Sample) -> Result<FeatureVector> {
    match (&sample.image_ref, &sample.mask_ref, &sample.features) {
        (Some(img), Some(mask), _) => {
            let image = load_rgb(img)?;
            let mask = load_mask(mask)?;
            describe(&image, &mask).context_with(|| format!("sample '{}'", sample.id))
        }
        (_, _, Some(f)) => Ok(FeatureVector {
            values: f.clone(),
            layout: vec![(Block::Tabular, f.len())],
        }),
        _ => Err(Error::Validation(format!(
            "sample '{}' has neither features nor an image+mask pair",
            sample.id
        ))),
    }
}

/// Standardize with training statistics, then apply weights.
pub fn weight_features(raw: &FeatureVector, stats: &Standardizer, weights: &FeatureWeights) -> Result<FeatureVector> {
    if weights.len() != raw.values.len() {
        return Err(Error::Shape(format!(
            "{} weights for {} features",
            weights.len(),
            raw.values.len()
        )));
    }
    let values = stats
        .apply(&raw.values)?
        .into_iter()
        .zip(weights.values())
        .map(|(v, w)| v * w)
        .collect();
    Ok(FeatureVector {
        values,
        layout: raw.layout.clone(),
    })
}

pub fn extract_features(sample: &Sample, stats: &Standardizer, weights: &FeatureWeights) -> Result<FeatureVector> {
    weight_features(&raw_features(sample)?, stats, weights)
}
