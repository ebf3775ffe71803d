use std::path::PathBuf;

use thiserror::Error;

use crate::hybrid::RoutingOutcome;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("cannot stratify: class {class} has {count} samples, need at least 3")]
    Stratification { class: usize, count: usize },

    #[error("empty region: mask has no foreground pixels")]
    EmptyRegion,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate texture: mask has no valid pixel pair")]
    DegenerateTexture,

    #[error("SMO did not converge after {iterations} iterations (KKT violation {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("histogram was built with {expected} bins but assignments use {found}")]
    CalibrationMismatch { expected: usize, found: usize },

    #[error("pairwise coupling failed: singular system for r = {0:?}")]
    Coupling(Vec<Vec<f64>>),

    #[error("training error: {0}")]
    Training(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// DS2 failed while classifying routed samples. `fallback` holds one
    /// outcome per batch sample with the DS1 label kept.
    #[error("routing failed at sample {sample_id}: {message}")]
    Routing {
        sample_id: String,
        message: String,
        fallback: Box<Vec<RoutingOutcome>>,
    },

    #[error("external classifier: {0}")]
    Adapter(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code for the CLI: 2 data error, 3 convergence or
    /// calibration error. Usage errors (1) are raised by argument parsing.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Convergence { .. }
            | Error::Calibration(_)
            | Error::CalibrationMismatch { .. }
            | Error::Coupling(_) => 3,
            _ => 2,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context_with<F: FnOnce() -> String>(self, f: F) -> Result<T>;
}

impl<T, E: Into<Error>> ResultExt<T> for std::result::Result<T, E> {
    fn context_with<F: FnOnce() -> String>(self, f: F) -> Result<T> {
        self.map_err(|e| e.into().context(f()))
    }
}
