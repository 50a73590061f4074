use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum IhtError {
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("thresholding margin undefined: k = {k} must satisfy 1 <= k < p = {p}")]
    MarginUndefined { k: usize, p: usize },

    #[error(
        "power iteration did not converge after {iterations} iterations \
         (last estimate {last_estimate:.6e})"
    )]
    PowerIterationNoConvergence {
        iterations: usize,
        last_estimate: f64,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid response for {kind} loss: sample {index} has value {value}")]
    InvalidResponse {
        kind: &'static str,
        index: usize,
        value: f64,
    },

    #[error("support index {index} out of range for dimension {p}")]
    SupportOutOfRange { index: usize, p: usize },

    #[error("empty support")]
    EmptySupport,

    #[error("non-finite objective at IHT iteration {iteration}; the step size is likely too large")]
    Diverged { iteration: usize },

    #[error(
        "restricted Newton solve did not reach gradient tolerance {tol:.3e} \
         in {max_iters} iterations (last inf-norm {grad_inf:.3e})"
    )]
    NewtonNoConvergence {
        tol: f64,
        max_iters: usize,
        grad_inf: f64,
    },

    #[error("singular restricted system and no ridge fallback applicable")]
    SingularSystem,

    #[error("top-{k} support is ambiguous: zero thresholding gap")]
    AmbiguousTopK { k: usize },

    #[error("vector has no nonzero entry")]
    AllZero,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse failure at {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, IhtError>;
