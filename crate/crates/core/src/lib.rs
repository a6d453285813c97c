//! Geodesic causal inference: average treatment effects for outcomes that
//! live in geodesic metric spaces (covariance and Laplacian matrices,
//! compositional data on the sphere, distributions in Wasserstein space).

pub mod cli;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod frechet;
pub mod geodesic;
pub mod hulc;
pub mod observation;
pub mod propensity;
pub mod simulation;
pub mod spaces;

pub use error::{Error, Result};
pub use estimators::{EstimatorConfig, GateEstimate, Method};
pub use geodesic::{geodesic_eval, ExtensionRule, GeodesicSegment, GeodesicSpace};
pub use observation::{FeatureMap, Observation};
