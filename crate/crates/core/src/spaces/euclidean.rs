//! The real line and closed intervals of it.
//!
//! Mostly a test space: on the unbounded line every estimator reduces to its
//! classical closed form.

use crate::error::{Error, Result};
use crate::geodesic::GeodesicSpace;

const TOL: f64 = 1e-12;

/// Closed interval `[lo, hi]` with the absolute-difference metric. Either
/// bound may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidArgument(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn real_line() -> Self {
        Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

impl GeodesicSpace for Interval {
    type Point = f64;

    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn dim(&self) -> usize {
        1
    }

    fn distance(&self, a: &f64, b: &f64) -> f64 {
        (a - b).abs()
    }

    fn check(&self, p: &f64) -> Result<()> {
        if !p.is_finite() {
            return Err(Error::Infeasible(format!("{p} is not finite")));
        }
        if *p < self.lo - TOL || *p > self.hi + TOL {
            return Err(Error::Infeasible(format!("{p} outside [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }

    fn extend(&self, a: &f64, b: &f64, t: f64) -> f64 {
        a + t * (b - a)
    }

    fn project(&self, raw: f64) -> Result<f64> {
        if raw.is_nan() {
            return Err(Error::InvalidArgument("cannot project NaN".into()));
        }
        Ok(raw.clamp(self.lo, self.hi))
    }

    fn weighted_frechet_mean(&self, points: &[f64], weights: &[f64]) -> Result<f64> {
        crate::frechet::validate_weights(points.len(), weights)?;
        let total: f64 = weights.iter().sum();
        let moment: f64 = points.iter().zip(weights).map(|(y, w)| w * y).sum();
        if total > 0.0 {
            return self.project(moment / total);
        }
        if !self.is_bounded() {
            // no minimizer exists; keep the regression closed form (the
            // unique stationary point) so predictions stay linear in x
            if total != 0.0 {
                return Ok(moment / total);
            }
            return Err(Error::Estimation(
                "zero total weight on an unbounded interval: objective has no minimizer".into(),
            ));
        }
        // concave objective: the minimum sits at an end point
        let obj = |nu: f64| self.frechet_objective(&nu, points, weights);
        Ok(if obj(self.lo) <= obj(self.hi) { self.lo } else { self.hi })
    }

    fn coordinates(&self, p: &f64) -> Vec<f64> {
        vec![*p]
    }

    fn from_coordinates(&self, coords: &[f64]) -> Result<f64> {
        match coords {
            [y] => {
                self.check(y)?;
                Ok(*y)
            }
            _ => Err(Error::Shape(format!("expected 1 coordinate, got {}", coords.len()))),
        }
    }
}
