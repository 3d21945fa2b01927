use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("not a sub-configuration: excess multiplicity at {0}")]
    NotSubconfiguration(String),
    #[error("probability {0} outside the open interval (0,1)")]
    InvalidProbability(f64),
    #[error("retention vector invalid: {0}")]
    InvalidRetentionVector(String),
    #[error(
        "quadrature error estimate {estimate:e} exceeds tolerance {tolerance:e} \
         at {cells} cells per axis"
    )]
    QuadratureFailure {
        estimate: f64,
        tolerance: f64,
        cells: usize,
    },
    #[error("density value {value} exceeds declared bound {bound} at a proposed point")]
    RejectionBoundViolated { value: f64, bound: f64 },
    #[error("enumeration budget exceeded: {required} entries, budget {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
    #[error("zero mass at conditioning configuration {0}")]
    ZeroMassAt(String),
    #[error("configuration too large for exact enumeration: total multiplicity {total} > {cap}")]
    TooLarge { total: u64, cap: u64 },
    #[error("table shapes differ: {0}")]
    ShapeMismatch(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
