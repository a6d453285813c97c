//! Concrete outcome spaces.

pub mod euclidean;
pub mod frobenius;
pub mod sphere;
pub mod wasserstein;

pub use euclidean::Interval;
pub use frobenius::{FrobeniusSpace, MatrixKind, SymMatrix};
pub use sphere::{OrthantSphere, SpherePoint, TangentVector};
pub use wasserstein::{QuantileFunction, QuantileSpace};
