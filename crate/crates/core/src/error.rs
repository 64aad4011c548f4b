use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions {dims:?} for {family}: {reason}")]
    InvalidDims {
        family: String,
        dims: [usize; 3],
        reason: String,
    },
    #[error("configuration has length {got}, expected {expected}")]
    BadConfigLength { got: usize, expected: usize },
    #[error("non-finite log amplitude")]
    NonFiniteResult,
    #[error("log-derivative requested at a zero-amplitude configuration")]
    DerivativeAtZeroAmplitude,
    #[error("no exact construction for {0}")]
    UnsupportedCombination(String),
    #[error("system with {n} qubits exceeds the limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("iterative eigensolver did not converge after {iterations} iterations")]
    ConvergenceFailure { iterations: usize },
    #[error("conjugate gradient stopped at residual {residual:e} after {iterations} iterations")]
    CgNoConvergence { iterations: usize, residual: f64 },
    #[error("parameters became non-finite at iteration {iteration}")]
    DivergedGradient { iteration: usize },
    #[error("no magnetization jump above {threshold} found")]
    NoJumpDetected { threshold: f64 },
    #[error("invalid sweep plan: {0}")]
    InvalidPlan(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("could not find a nonzero-amplitude start state after {0} attempts")]
    NoValidStart(usize),
    #[error("fast and reference connected elements disagree: {0}")]
    Equivalence(String),
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
