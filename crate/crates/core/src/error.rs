use thiserror::Error;

/// Errors raised by the solvers, the certification harness and the scenario runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    #[error("grid spacing h={h} incompatible with domain: {reason}")]
    BadSpacing { h: f64, reason: String },
    #[error("invalid time grid: {0}")]
    BadTimeGrid(String),
    #[error("invalid exponents: {0}")]
    BadExponents(String),
    #[error("field contains a non-finite value at level {level}, node {node}")]
    NonFinite { level: usize, node: usize },
    #[error("field shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("coefficient out of bounds: a={value} not in [{lo}, {hi}] at level {level}, node {node}")]
    CoefficientOutOfBounds {
        value: f64,
        lo: f64,
        hi: f64,
        level: usize,
        node: usize,
    },
    #[error("linear solve failed at step {step}: {reason}")]
    SolveFailed { step: usize, reason: String },
    #[error("kernel time t={t} below resolution limit h^2={limit}")]
    KernelTimeTooSmall { t: f64, limit: f64 },
    #[error("grid too coarse: {0}")]
    TooCoarse(String),
    #[error("empty cylinder: {0}")]
    EmptyCylinder(String),
    #[error("positivity violated: species {species} reached {value} at step {step}")]
    Positivity {
        species: usize,
        value: f64,
        step: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },
    #[error("config error: missing key `{0}`")]
    MissingKey(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
