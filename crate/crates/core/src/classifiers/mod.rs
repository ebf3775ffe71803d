//! DS1 classifiers (SMO-trained SVMs, Platt scaling, multiclass strategies,
//! OPF), grid search, and the DS2 interface.

mod adapter;
mod coupling;
mod grid;
mod kernel;
mod multiclass;
mod opf;
mod platt;
mod query;
mod smo;
mod strong;

pub use adapter::{serve, ExternalStrong, Request, Response, ServeStats, DEFAULT_TIMEOUT};
pub use coupling::{coupling_matrix, coupling_objective, pairwise_coupling};
pub use grid::{grid_search, CellResult, Grid, GridInput, GridOutcome, KernelKind};
pub use kernel::{Gram, Kernel};
pub use multiclass::{train_multiclass, BinaryUnit, MulticlassModel, Strategy, TrainParams};
pub use opf::{euclidean, train_opf, OpfModel};
pub use platt::{platt_calibrate, platt_nll, PlattParams};
pub use query::{Assignment, Preprocess, Query};
pub use smo::{dual_objective, solve_dual, train_binary_svm, BinarySvmModel, DualSolution, SmoConfig};
pub use strong::{wait_until, ModelStrong, ReferenceStrong, ReferenceStrongConfig, StrongClassifier};
