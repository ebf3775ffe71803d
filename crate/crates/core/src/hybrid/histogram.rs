use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bin_index;
use crate::classifiers::Assignment;
use crate::error::{Error, Result, ResultExt};

const FORMAT: &str = "hybrid-cascade/error-histogram";
const VERSION: u32 = 1;

/// Per predicted class `j` and confidence bin `i`, the fraction of
/// validation samples predicted `j` in bin `i` that were wrong.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub m: usize,
    pub edges: Vec<f64>,
    /// `p_error[j-1][i-1]`.
    pub p_error: Vec<Vec<f64>>,
    pub counts: Vec<Vec<usize>>,
    pub errors: Vec<Vec<usize>>,
    /// Laplace smoothing `(errors + 1) / (counts + 2)`; empty cells are 0
    /// otherwise.
    pub smoothing: bool,
}

pub fn estimate_error_histograms(
    assignments: &[Assignment],
    labels: &[usize],
    m: usize,
    n: usize,
    smoothing: bool,
) -> Result<ErrorHistogram> {
    if n < 2 {
        return Err(Error::Domain(format!("bin count must be at least 2, got {n}")));
    }
    if assignments.is_empty() {
        return Err(Error::Calibration("no validation assignments to calibrate on".into()));
    }
    if assignments.len() != labels.len() {
        return Err(Error::Calibration(format!(
            "{} assignments but {} labels",
            assignments.len(),
            labels.len()
        )));
    }
    let mut counts = vec![vec![0usize; n]; m];
    let mut errors = vec![vec![0usize; n]; m];
    for (a, &truth) in assignments.iter().zip(labels) {
        if a.class == 0 || a.class > m || truth == 0 || truth > m {
            return Err(Error::Validation(format!(
                "sample '{}': class {} / label {truth} outside 1..={m}",
                a.id, a.class
            )));
        }
        let i = bin_index(a.confidence, n).context_with(|| format!("sample '{}'", a.id))?;
        counts[a.class - 1][i - 1] += 1;
        if a.class != truth {
            errors[a.class - 1][i - 1] += 1;
        }
    }
    Ok(ErrorHistogram::from_counts(counts, errors, smoothing))
}

impl ErrorHistogram {
    pub fn from_counts(counts: Vec<Vec<usize>>, errors: Vec<Vec<usize>>, smoothing: bool) -> Self {
        let m = counts.len();
        let n = counts.first().map_or(0, Vec::len);
        let p_error = counts
            .iter()
            .zip(&errors)
            .map(|(c, e)| {
                c.iter()
                    .zip(e)
                    .map(|(&c, &e)| match (smoothing, c) {
                        (true, _) => (e as f64 + 1.0) / (c as f64 + 2.0),
                        (false, 0) => 0.0,
                        (false, _) => e as f64 / c as f64,
                    })
                    .collect()
            })
            .collect();
        ErrorHistogram {
            format: FORMAT.into(),
            version: VERSION,
            n,
            m,
            edges: (0..=n).map(|k| k as f64 / n as f64).collect(),
            p_error,
            counts,
            errors,
            smoothing,
        }
    }

    /// `P_error` of predicted class `class` in bin `bin` (both 1-based).
    pub fn get(&self, class: usize, bin: usize) -> f64 {
        self.p_error[class - 1][bin - 1]
    }

    pub fn total_errors(&self) -> usize {
        self.errors.iter().flatten().sum()
    }

    pub fn total_count(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    fn check(&self) -> Result<()> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Validation(format!(
                "not an error histogram document (format '{}', version {})",
                self.format, self.version
            )));
        }
        let shaped = |g: &Vec<Vec<usize>>| g.len() == self.m && g.iter().all(|r| r.len() == self.n);
        if !shaped(&self.counts) || !shaped(&self.errors) || self.edges.len() != self.n + 1 {
            return Err(Error::Validation("histogram arrays do not match n and m".into()));
        }
        let rebuilt = ErrorHistogram::from_counts(self.counts.clone(), self.errors.clone(), self.smoothing);
        if rebuilt.p_error != self.p_error {
            return Err(Error::Validation("p_error disagrees with counts and errors".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let h: ErrorHistogram = serde_json::from_str(text)?;
        h.check()?;
        Ok(h)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).context_with(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?).context_with(|| format!("reading {}", path.display()))
    }
}
