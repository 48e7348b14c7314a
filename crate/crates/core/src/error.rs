use thiserror::Error;

/// Errors produced by the pulse toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PulseError {
    #[error("site {site} out of range for a {n}-qubit register")]
    SiteOutOfRange { site: usize, n: usize },

    #[error("register of {n} qubits exceeds capacity of {max}")]
    Capacity { n: usize, max: usize },

    #[error("time {t} outside the pulse interval [0, {period}]")]
    TimeOutOfRange { t: f64, period: f64 },

    #[error("unknown pulse shape `{0}`")]
    UnknownShape(String),

    #[error("unknown model preset `{0}`")]
    UnknownModel(String),

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("numerical divergence: {0} (try a larger step count)")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported order {order}: {message}")]
    UnsupportedOrder { order: usize, message: String },

    #[error("ambiguous residual {residual:e} at order {order} on cluster {cluster}")]
    Ambiguous {
        order: usize,
        cluster: String,
        residual: f64,
    },

    #[error("search budget exceeded: {count} candidates > {budget}")]
    Budget { count: u128, budget: u128 },

    #[error("singular constraint system: {0}")]
    Singular(String),

    #[error("optimizer did not converge: best objective {objective:e}")]
    NoConvergence {
        objective: f64,
        best: Box<crate::optimize::Design>,
    },

    #[error("pulse file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, PulseError>;
