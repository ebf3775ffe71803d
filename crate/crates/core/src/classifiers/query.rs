use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datasets::Sample;
use crate::error::{Error, Result};
use crate::features::{describe, load_mask, load_rgb, FeatureWeights, Standardizer};

/// One sample presented to a classifier: a feature vector, an image+mask
/// pair, or both (the image wins).
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub id: &'a str,
    pub features: Option<&'a [f64]>,
    pub image: Option<&'a Path>,
    pub mask: Option<&'a Path>,
}

impl<'a> Query<'a> {
    pub fn from_sample(s: &'a Sample) -> Self {
        Query {
            id: &s.id,
            features: s.features.as_deref(),
            image: s.image_ref.as_deref(),
            mask: s.mask_ref.as_deref(),
        }
    }

    pub fn tabular(id: &'a str, features: &'a [f64]) -> Self {
        Query {
            id,
            features: Some(features),
            image: None,
            mask: None,
        }
    }

    /// Unprocessed feature vector of the query.
    pub fn raw(&self) -> Result<Vec<f64>> {
        match (self.image, self.mask, self.features) {
            (Some(img), Some(mask), _) => {
                let fv = describe(&load_rgb(img)?, &load_mask(mask)?)
                    .map_err(|e| e.context(format!("sample '{}'", self.id)))?;
                Ok(fv.values)
            }
            (_, _, Some(f)) => Ok(f.to_vec()),
            _ => Err(Error::Validation(format!("query '{}' has no payload", self.id))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: String,
    /// 1-based class index.
    pub class: usize,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

/// Column selection, standardization and weighting applied to raw feature
/// vectors before they reach a model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    #[serde(default)]
    pub columns: Option<Range<usize>>,
    #[serde(default)]
    pub standardizer: Option<Standardizer>,
    #[serde(default)]
    pub weights: Option<FeatureWeights>,
}

impl Preprocess {
    pub fn columns(columns: Option<Range<usize>>) -> Self {
        Preprocess {
            columns,
            ..Preprocess::default()
        }
    }

    /// Fit standardization statistics on `raw` training rows.
    pub fn fit(raw: &[Vec<f64>], columns: Option<Range<usize>>, weights: Option<FeatureWeights>) -> Result<Self> {
        let base = Preprocess::columns(columns);
        let selected: Vec<Vec<f64>> = raw.iter().map(|r| base.select(r)).collect::<Result<_>>()?;
        let standardizer = Standardizer::fit(&selected)?;
        if let Some(w) = &weights {
            if w.len() != standardizer.dim() {
                return Err(Error::Shape(format!(
                    "{} weights for {} features",
                    w.len(),
                    standardizer.dim()
                )));
            }
        }
        Ok(Preprocess {
            standardizer: Some(standardizer),
            weights,
            ..base
        })
    }

    fn select(&self, row: &[f64]) -> Result<Vec<f64>> {
        match &self.columns {
            Some(r) if r.end > row.len() => Err(Error::Shape(format!(
                "columns {}..{} requested from a {}-dim vector",
                r.start,
                r.end,
                row.len()
            ))),
            Some(r) => Ok(row[r.clone()].to_vec()),
            None => Ok(row.to_vec()),
        }
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.select(row)?;
        if let Some(s) = &self.standardizer {
            v = s.apply(&v)?;
        }
        if let Some(w) = &self.weights {
            if w.len() != v.len() {
                return Err(Error::Shape(format!("{} weights for {} features", w.len(), v.len())));
            }
            v.iter_mut().zip(w.values()).for_each(|(x, w)| *x *= w);
        }
        Ok(v)
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preprocess_selects_then_scales() {
        let raw = vec![vec![9.0, 1.0, 2.0], vec![9.0, 3.0, 6.0]];
        let p = Preprocess::fit(&raw, Some(1..3), Some(FeatureWeights::new(vec![1.0, 0.5]).unwrap())).unwrap();
        assert_eq!(p.apply(&raw[0]).unwrap(), vec![-1.0, -0.5]);
        assert!(p.apply(&[1.0]).is_err());
        assert_eq!(Preprocess::default().apply(&raw[1]).unwrap(), raw[1]);
    }
}
