//! Budgeted choice of the test samples DS2 will re-examine.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::bin_index;
use super::histogram::ErrorHistogram;
use crate::classifiers::Assignment;
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binned {
    pub id: String,
    pub class: usize,
    pub confidence: f64,
    pub bin: usize,
}

/// DS1 assignments with their confidence bins for a fixed `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedAssignments {
    pub n: usize,
    pub items: Vec<Binned>,
}

impl BinnedAssignments {
    pub fn new(assignments: &[Assignment], n: usize) -> Result<Self> {
        let items = assignments
            .iter()
            .map(|a| {
                Ok(Binned {
                    id: a.id.clone(),
                    class: a.class,
                    confidence: a.confidence,
                    bin: bin_index(a.confidence, n)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(BinnedAssignments { n, items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    /// (class, bin), both 1-based; `None` for the random baseline.
    pub cell: Option<(usize, usize)>,
    pub p_error: f64,
    pub quota: usize,
    pub drawn: Vec<String>,
    /// Drawn during the second pass that spends leftover budget.
    pub fill: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPlan {
    pub budget: usize,
    pub seed: u64,
    pub entries: Vec<PlanEntry>,
}

impl SelectionPlan {
    /// Selected ids in draw order.
    pub fn selected(&self) -> Vec<&str> {
        self.entries
            .iter()
            .flat_map(|e| e.drawn.iter().map(String::as_str))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.iter().map(|e| e.drawn.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Visit cells by decreasing `P_error` (ties: lower bin, then lower class),
/// drawing `ceil(M * P_error)` members from each, capped by the cell size
/// and the remaining budget; then spend any leftover budget in the same
/// order.
pub fn select_for_reclassification(
    assignments: &BinnedAssignments,
    hist: &ErrorHistogram,
    budget: usize,
    seed: u64,
) -> Result<SelectionPlan> {
    if assignments.n != hist.n {
        return Err(Error::CalibrationMismatch {
            expected: hist.n,
            found: assignments.n,
        });
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); hist.m * hist.n];
    for (t, b) in assignments.items.iter().enumerate() {
        if b.class == 0 || b.class > hist.m || b.bin == 0 || b.bin > hist.n {
            return Err(Error::Validation(format!(
                "sample '{}' falls outside the {}x{} histogram",
                b.id, hist.m, hist.n
            )));
        }
        members[(b.class - 1) * hist.n + b.bin - 1].push(t);
    }
    let mut cells: Vec<(usize, usize)> = (1..=hist.m)
        .flat_map(|j| (1..=hist.n).map(move |i| (j, i)))
        .filter(|&(j, i)| !members[(j - 1) * hist.n + i - 1].is_empty())
        .collect();
    cells.sort_by(|&(ja, ia), &(jb, ib)| {
        hist.get(jb, ib)
            .total_cmp(&hist.get(ja, ia))
            .then(ia.cmp(&ib))
            .then(ja.cmp(&jb))
    });

    let mut rng = seeds::rng(seed);
    let mut remaining = budget.min(assignments.len());
    let mut entries = Vec::new();
    for fill in [false, true] {
        for &(j, i) in &cells {
            if remaining == 0 {
                break;
            }
            let pool = &mut members[(j - 1) * hist.n + i - 1];
            if pool.is_empty() {
                continue;
            }
            let p = hist.get(j, i);
            let quota = if fill {
                pool.len()
            } else {
                // The small slack keeps exact products such as 5 * 0.2 at 1.
                ((budget as f64 * p) - 1e-9).ceil().max(0.0) as usize
            };
            let take = quota.min(pool.len()).min(remaining);
            if take == 0 {
                continue;
            }
            let (chosen, _) = pool.partial_shuffle(&mut rng, take);
            let chosen: Vec<usize> = chosen.to_vec();
            pool.retain(|t| !chosen.contains(t));
            remaining -= take;
            entries.push(PlanEntry {
                cell: Some((j, i)),
                p_error: p,
                quota,
                drawn: chosen.iter().map(|&t| assignments.items[t].id.clone()).collect(),
                fill,
            });
        }
    }
    Ok(SelectionPlan { budget, seed, entries })
}

/// Uniform sample of `min(M, N)` assignments without replacement.
pub fn random_selection_baseline(assignments: &[Assignment], budget: usize, seed: u64) -> SelectionPlan {
    let mut idx: Vec<usize> = (0..assignments.len()).collect();
    let take = budget.min(idx.len());
    let (chosen, _) = idx.partial_shuffle(&mut seeds::rng(seed), take);
    let drawn: Vec<String> = chosen.iter().map(|&t| assignments[t].id.clone()).collect();
    let entries = if drawn.is_empty() {
        Vec::new()
    } else {
        vec![PlanEntry {
            cell: None,
            p_error: 0.0,
            quota: take,
            drawn,
            fill: false,
        }]
    };
    SelectionPlan { budget, seed, entries }
}
