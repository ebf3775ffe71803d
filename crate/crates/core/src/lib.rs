//! Budgeted two-stage classification.
//!
//! A fast classifier (DS1) labels every sample with a confidence. Error
//! rates per predicted class and confidence bin, measured on a validation
//! set, decide which test samples a slow, more accurate classifier (DS2)
//! gets to re-examine within a fixed budget.
//!
//! ```no_run
//! use hybrid_cascade::harness::{run_experiment, render_report, ExperimentConfig};
//!
//! let cfg = ExperimentConfig::from_toml("[dataset]\npreset = \"egg9\"\nscale = 0.1\n")?;
//! let report = run_experiment(&cfg, std::path::Path::new("."))?;
//! println!("{}", render_report(&report));
//! # Ok::<(), hybrid_cascade::Error>(())
//! ```

pub mod classifiers;
pub mod datasets;
pub mod error;
pub mod features;
pub mod harness;
pub mod hybrid;
pub mod seeds;

pub use error::{Error, Result};
