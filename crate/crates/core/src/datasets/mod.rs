//! Datasets, splits and the synthetic benchmark generator.

mod io;
mod split;
mod synthetic;

use std::collections::HashSet;
use std::ops::Range;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, write_tabular, DatasetFormat};
pub use split::{balance_training, stratified_split, Fractions, Split, SplitDocument};
pub use synthetic::{generate_synthetic, SyntheticSpec};

/// One object instance. Labels are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub features: Option<Vec<f64>>,
    pub image_ref: Option<PathBuf>,
    pub mask_ref: Option<PathBuf>,
    pub label: usize,
}

impl Sample {
    pub fn tabular(id: impl Into<String>, features: Vec<f64>, label: usize) -> Self {
        Sample {
            id: id.into(),
            features: Some(features),
            image_ref: None,
            mask_ref: None,
            label,
        }
    }

    pub fn image(
        id: impl Into<String>,
        image: impl Into<PathBuf>,
        mask: impl Into<PathBuf>,
        label: usize,
    ) -> Self {
        Sample {
            id: id.into(),
            features: None,
            image_ref: Some(image.into()),
            mask_ref: Some(mask.into()),
            label,
        }
    }

    pub fn has_image(&self) -> bool {
        self.image_ref.is_some() && self.mask_ref.is_some()
    }
}

/// Column ranges of the two feature views carried by synthetic data: the
/// clean view feeds DS2, the degraded one DS1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewLayout {
    pub clean: Range<usize>,
    pub degraded: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub samples: Vec<Sample>,
    pub m: usize,
    pub class_names: Vec<String>,
    #[serde(default)]
    pub views: Option<ViewLayout>,
}

impl Dataset {
    /// Build a dataset, checking every invariant. `m` is the largest label.
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let m = samples.iter().map(|s| s.label).max().unwrap_or(0);
        let class_names = (1..=m).map(|k| format!("class-{k}")).collect();
        Self::with_classes(name, samples, class_names)
    }

    pub fn with_classes(
        name: impl Into<String>,
        samples: Vec<Sample>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let m = class_names.len();
        if m < 2 {
            return Err(Error::Validation(format!(
                "a dataset needs at least 2 classes, got {m}"
            )));
        }
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Validation(format!("duplicate sample id '{}'", s.id)));
            }
            if s.label == 0 || s.label > m {
                return Err(Error::Validation(format!(
                    "sample '{}' has label {} outside [1, {m}]",
                    s.id, s.label
                )));
            }
            if s.features.is_none() && !s.has_image() {
                return Err(Error::Validation(format!(
                    "sample '{}' has neither features nor an image+mask pair",
                    s.id
                )));
            }
        }
        Ok(Dataset {
            name: name.into(),
            samples,
            m,
            class_names,
            views: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Sample count per class, index `k - 1` for class `k`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.m];
        for s in &self.samples {
            counts[s.label - 1] += 1;
        }
        counts
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.samples
            .iter()
            .find_map(|s| s.features.as_ref().map(Vec::len))
    }

    /// Feature rows of the given samples restricted to `columns`
    /// (all columns when `None`).
    pub fn feature_rows(
        &self,
        indices: &[usize],
        columns: Option<&Range<usize>>,
    ) -> Result<Vec<Vec<f64>>> {
        indices
            .iter()
            .map(|&i| {
                let s = &self.samples[i];
                let f = s.features.as_ref().ok_or_else(|| {
                    Error::Validation(format!("sample '{}' has no feature vector", s.id))
                })?;
                match columns {
                    None => Ok(f.clone()),
                    Some(r) if r.end <= f.len() => Ok(f[r.clone()].to_vec()),
                    Some(r) => Err(Error::Shape(format!(
                        "columns {}..{} out of range for sample '{}' with {} features",
                        r.start,
                        r.end,
                        s.id,
                        f.len()
                    ))),
                }
            })
            .collect()
    }
}
