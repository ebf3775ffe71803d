//! Error-histogram calibration, budgeted selection and DS1 -> DS2 routing.

mod histogram;
mod router;
mod selector;

pub use histogram::{estimate_error_histograms, ErrorHistogram};
pub use router::{route, route_with, RoutingOutcome, RoutingRun, SelectionMode};
pub use selector::{
    random_selection_baseline, select_for_reclassification, Binned, BinnedAssignments, PlanEntry, SelectionPlan,
};

use crate::error::{Error, Result};

/// 1-based equal-width bin of a confidence over `[0, 1]`; `c = 1` falls in
/// the last bin.
pub fn bin_index(c: f64, n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::Domain(format!("bin count must be at least 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Domain(format!("confidence {c} outside [0, 1]")));
    }
    Ok(((c * n as f64).floor() as usize + 1).min(n))
}
