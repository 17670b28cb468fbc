use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: asymmetry {asymmetry:.3e} exceeds {limit:.3e}")]
    NotHermitian { asymmetry: f64, limit: f64 },

    #[error("matrix is not positive definite: min eigenvalue {min_eig:.3e}, max eigenvalue {max_eig:.3e}")]
    NotPositiveDefinite { min_eig: f64, max_eig: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("log argument is not positive: tr[C W] = {value:.3e}")]
    LogDomain { value: f64 },

    #[error("{solver} reached its iteration cap ({iterations}) with gap {gap:.3e}")]
    IterationCap {
        solver: &'static str,
        iterations: usize,
        gap: f64,
        best_objective: f64,
    },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
