use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("column index {index} out of range for {cols} columns")]
    IndexOutOfRange { index: usize, cols: usize },

    #[error("index set is not strictly increasing")]
    NotSorted,

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("data length {len} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, len: usize },

    #[error("non-finite value in {context}")]
    NonFiniteInput { context: &'static str },

    #[error("cannot sample {k} distinct indices out of {n}")]
    KTooLarge { n: usize, k: usize },

    #[error("loss must be positive, got {0}")]
    NonPositiveLoss(f64),

    #[error("validation observed at step {step}, which is not a positive multiple of {n_eval}")]
    CadenceViolation { step: u64, n_eval: u64 },

    #[error("non-finite {what} at step {step}{}", param.map(|p| format!(" (parameter {p})")).unwrap_or_default())]
    NonFiniteLoss {
        step: u64,
        param: Option<usize>,
        what: &'static str,
    },

    #[error("invalid hyperparameter `{name}`: {reason}")]
    InvalidHyper { name: &'static str, reason: String },
}
