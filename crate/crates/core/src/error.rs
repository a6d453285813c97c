use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible point: {0}")]
    Infeasible(String),

    #[error("degenerate geodesic: endpoints coincide or are antipodal")]
    DegenerateGeodesic,

    #[error("composition error: {0}")]
    Composition(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// The iterative solver ran out of iterations. Carries the best iterate
    /// (flattened coordinates) and its objective value.
    #[error("solver did not converge after {iterations} iterations (best objective {objective})")]
    Convergence {
        iterations: usize,
        objective: f64,
        best: Vec<f64>,
    },

    #[error("complete or quasi-complete separation: logistic MLE does not exist")]
    Separation,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("no B <= {cap} satisfies P(B; delta) <= alpha (alpha={alpha}, delta={delta})")]
    InfeasibleLevel { alpha: f64, delta: f64, cap: u32 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("validation error at row {row}: {message}")]
    Validation { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
