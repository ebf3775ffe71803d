use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::histogram::ErrorHistogram;
use super::selector::{random_selection_baseline, select_for_reclassification, BinnedAssignments, SelectionPlan};
use crate::classifiers::{Assignment, MulticlassModel, Query, StrongClassifier};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingOutcome {
    pub id: String,
    pub ds1: Assignment,
    pub routed: bool,
    pub ds2: Option<Assignment>,
    pub final_class: usize,
    /// DS1 time, a share of the selection time, and DS2 time when routed.
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    ErrorGuided,
    Random,
}

#[derive(Debug, Clone)]
pub struct RoutingRun {
    pub outcomes: Vec<RoutingOutcome>,
    pub plan: SelectionPlan,
    pub total: Duration,
}

/// DS1 on every sample, error-guided selection of at most `budget`
/// samples, DS2 on the selected ones.
pub fn route(
    batch: &[Query],
    ds1: &MulticlassModel,
    ds2: &dyn StrongClassifier,
    hist: &ErrorHistogram,
    budget: usize,
    seed: u64,
) -> Result<Vec<RoutingOutcome>> {
    route_with(batch, ds1, ds2, Some(hist), SelectionMode::ErrorGuided, budget, seed).map(|r| r.outcomes)
}

/// Like [`route`] but the routed subset is drawn uniformly (`hist` may be
/// `None` then).
pub fn route_with(
    batch: &[Query],
    ds1: &MulticlassModel,
    ds2: &dyn StrongClassifier,
    hist: Option<&ErrorHistogram>,
    mode: SelectionMode,
    budget: usize,
    seed: u64,
) -> Result<RoutingRun> {
    let started = Instant::now();
    if let Some(h) = hist {
        if h.m != ds1.m {
            return Err(Error::CalibrationMismatch {
                expected: h.m,
                found: ds1.m,
            });
        }
    }
    let mut first = Vec::with_capacity(batch.len());
    let mut times = Vec::with_capacity(batch.len());
    for q in batch {
        let t0 = Instant::now();
        first.push(ds1.classify_query(q)?);
        times.push(t0.elapsed());
    }

    let t0 = Instant::now();
    let plan = match (mode, hist) {
        (SelectionMode::ErrorGuided, Some(h)) => {
            let binned = BinnedAssignments::new(&first, h.n)?;
            select_for_reclassification(&binned, h, budget, seed)?
        }
        (SelectionMode::ErrorGuided, None) => {
            return Err(Error::Calibration("error-guided routing needs a histogram".into()))
        }
        (SelectionMode::Random, _) => random_selection_baseline(&first, budget, seed),
    };
    let share = if batch.is_empty() {
        Duration::ZERO
    } else {
        t0.elapsed() / batch.len() as u32
    };

    let position: HashMap<&str, usize> = batch.iter().enumerate().map(|(t, q)| (q.id, t)).collect();
    let mut second: Vec<Option<Assignment>> = vec![None; batch.len()];
    for id in plan.selected() {
        let t = position[id];
        let t0 = Instant::now();
        let result = ds2.classify(&batch[t..=t]).and_then(|mut v| {
            v.pop()
                .ok_or_else(|| Error::Adapter("strong classifier returned no assignment".into()))
        });
        match result {
            Ok(a) => {
                times[t] += t0.elapsed();
                second[t] = Some(a);
            }
            Err(e) => {
                let fallback = first
                    .iter()
                    .zip(&times)
                    .map(|(a, &elapsed)| RoutingOutcome {
                        id: a.id.clone(),
                        ds1: a.clone(),
                        routed: false,
                        ds2: None,
                        final_class: a.class,
                        elapsed: elapsed + share,
                    })
                    .collect();
                return Err(Error::Routing {
                    sample_id: id.to_string(),
                    message: e.to_string(),
                    fallback: Box::new(fallback),
                });
            }
        }
    }

    let outcomes = first
        .into_iter()
        .zip(second)
        .zip(times)
        .map(|((a, b), elapsed)| RoutingOutcome {
            id: a.id.clone(),
            final_class: b.as_ref().map_or(a.class, |b| b.class),
            routed: b.is_some(),
            ds1: a,
            ds2: b,
            elapsed: elapsed + share,
        })
        .collect();
    Ok(RoutingRun {
        outcomes,
        plan,
        total: started.elapsed(),
    })
}
