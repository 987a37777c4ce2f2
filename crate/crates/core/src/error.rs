use thiserror::Error;

/// Errors raised by the analytic, sampling and detection routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model constant lies outside its admissible domain.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// A real argument falls inside the spectral support or on a removable point.
    #[error("argument outside the domain of evaluation: {0}")]
    Domain(String),

    /// Evaluation at a pole of a rational map.
    #[error("evaluation at a pole: {0}")]
    Pole(String),

    /// An operation's precondition does not hold (e.g. a critical spike).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Input violating a documented calling contract (e.g. unsorted eigenvalues).
    #[error("contract violated: {0}")]
    Contract(String),

    /// A matrix that must be positive definite is (numerically) singular.
    #[error("numerically singular matrix: {0}")]
    NumericalRank(String),

    /// Inconsistent or incomplete configuration; every violation is listed.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
}

impl Error {
    /// True for errors caused by user-supplied configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        !matches!(self, Error::NumericalRank(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
