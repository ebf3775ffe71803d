//! Metrics, timing, the repeated experimental protocol and reporting.

mod config;
mod experiment;
mod metrics;
mod report;
mod timing;

pub use config::{DatasetConfig, Ds1Config, Ds2Config, ExperimentConfig, Technique};
pub use experiment::{
    case_analysis, run_experiment, sweep_bins, CaseAnalysis, ChosenParams, Experiment, ExperimentReport,
    RepetitionResult, SweepReport, SweepRow, TechniqueResult, TechniqueSummary,
};
pub use metrics::{cohen_kappa, per_class_accuracy, ConfusionMatrix, MeanStd};
pub use report::{render_comparison, render_report, render_sweep};
pub use timing::{time_per_sample, SampleTiming};
