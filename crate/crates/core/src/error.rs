use thiserror::Error;

/// Errors produced by network evaluation, bounding, search and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid class pair (t = {true_class}, gamma = {adv_class}) for {outputs} outputs")]
    InvalidClass {
        true_class: usize,
        adv_class: usize,
        outputs: usize,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("box has no dimension of positive width")]
    DegenerateBox,

    #[error("point lies outside the box (coordinate {index})")]
    Domain { index: usize },

    #[error("power method did not converge within {iterations} iterations")]
    ConvergenceFailure { iterations: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inconsistent convolution: {0}")]
    Convolution(String),

    #[error("malformed model file (line {line}): {message}")]
    MalformedFile { line: usize, message: String },

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("shape mismatch for array `{name}`: {message}")]
    ShapeMismatch { name: String, message: String },

    #[error("dataset row {row}: {message}")]
    Dataset { row: usize, message: String },

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
