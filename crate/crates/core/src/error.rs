use thiserror::Error;

/// Errors surfaced by the library.
///
/// The split matters to callers: `Input`, `DegenerateInput` and
/// `SupportViolation` mean the data or arguments cannot be used as given,
/// while `KernelConstruction` and `Numerical` mean a computation failed on
/// data that passed validation.
#[derive(Error, Debug)]
pub enum Error {
    /// Malformed arguments or records (duplicate pair, self loop, bad flag value, ...).
    #[error("input error: {0}")]
    Input(String),
    /// Structurally valid input that carries no usable information
    /// (no present edges, zero dispersion, too few nodes).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    /// The moment system for a boundary kernel could not be solved.
    #[error("kernel construction failed: {0}")]
    KernelConstruction(String),
    /// A numeric routine lost its footing (flat density, infeasible normalization, ...).
    #[error("numerical error: {0}")]
    Numerical(String),
    /// A covariate level present in the target population has zero mass in the source.
    #[error("support violation: level {level:?} has zero probability in population 1")]
    SupportViolation { level: String },
}

pub type Result<T> = std::result::Result<T, Error>;
