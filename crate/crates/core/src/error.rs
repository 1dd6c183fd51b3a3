use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh parameter: {0}")]
    InvalidMesh(String),

    #[error("element {element}: non-positive Jacobian determinant {det:e}")]
    NonPositiveJacobian { element: usize, det: f64 },

    #[error("perturbation failed: vertex {vertex} tangles an element after {retries} redraws")]
    TangledPerturbation { vertex: usize, retries: usize },

    #[error("quadrature rule with {0} points per direction is out of range 1..=20")]
    QuadratureOrder(usize),

    #[error("point ({0}, {1}) lies outside the master element [-1,1]^2")]
    OutsideMaster(f64, f64),

    #[error("element {element} is crossed by coefficient discontinuity {line}")]
    MisalignedDiscontinuity { element: usize, line: String },

    #[error("element {element}: Gram matrix is not positive definite")]
    GramNotSpd { element: usize },

    #[error("global system is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("scenario '{0}' has no exact solution")]
    NoExactSolution(String),

    #[error("rate fit needs at least 3 records, got {0}")]
    TooFewRecords(usize),

    #[error("point ({0}, {1}) is not inside any element")]
    PointNotFound(f64, f64),

    #[error("line sample needs at least 1 interval")]
    EmptySample,

    #[error("config {}: {message}", line.map(|l| format!("line {l}")).unwrap_or_else(|| "error".into()))]
    Config { line: Option<usize>, message: String },

    #[error("linear algebra: {0}")]
    LinearAlgebra(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Parse(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn config(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl Error {
    /// Wraps the error with a description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by invalid user configuration.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } => true,
            Error::Context { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
