//! Observation triples and covariate feature maps.

use crate::error::{Error, Result};

/// One unit: outcome `y`, binary treatment, covariates `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<P> {
    pub y: P,
    pub treated: bool,
    pub x: Vec<f64>,
}

impl<P> Observation<P> {
    pub fn new(y: P, treated: bool, x: Vec<f64>) -> Self {
        Self { y, treated, x }
    }

    pub fn treatment(&self) -> f64 {
        if self.treated {
            1.0
        } else {
            0.0
        }
    }
}

/// Number of treated and control units.
pub fn arm_counts<P>(samples: &[Observation<P>]) -> (usize, usize) {
    let treated = samples.iter().filter(|s| s.treated).count();
    (treated, samples.len() - treated)
}

/// Common covariate dimension of a sample.
pub fn covariate_dim<P>(samples: &[Observation<P>]) -> Result<usize> {
    let p = samples
        .first()
        .map(|s| s.x.len())
        .ok_or_else(|| Error::DegenerateData("empty sample".into()))?;
    if samples.iter().any(|s| s.x.len() != p) {
        return Err(Error::Shape("observations have differing covariate dimensions".into()));
    }
    Ok(p)
}

/// Covariate transformation applied before fitting a nuisance model. `Square`
/// is the misspecification device of the simulations (`X^2` in place of `X`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMap {
    #[default]
    Identity,
    Square,
}

impl FeatureMap {
    pub fn apply(self, x: &[f64]) -> Vec<f64> {
        match self {
            FeatureMap::Identity => x.to_vec(),
            FeatureMap::Square => x.iter().map(|v| v * v).collect(),
        }
    }

    pub fn from_correct(correct: bool) -> Self {
        if correct {
            FeatureMap::Identity
        } else {
            FeatureMap::Square
        }
    }
}
