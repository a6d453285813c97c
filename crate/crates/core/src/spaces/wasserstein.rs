//! One-dimensional Wasserstein space on a fixed quantile grid.
//!
//! A distribution is represented by its quantile function sampled at the grid
//! midpoints `p_k = (k - 0.5) / G`. The 2-Wasserstein distance is then the
//! root mean squared difference of quantiles, and McCann's interpolant is the
//! pointwise convex combination of quantile functions.

use crate::error::{Error, Result};
use crate::frechet;
use crate::geodesic::GeodesicSpace;

pub const DEFAULT_GRID: usize = 201;

const MONOTONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFunction(Vec<f64>);

impl QuantileFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Point mass at `x` on a grid of size `g`.
    pub fn dirac(x: f64, g: usize) -> Self {
        Self(vec![x; g])
    }
}

/// Quantile functions on a midpoint grid of size `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSpace {
    grid: Vec<f64>,
    metric: Vec<f64>,
}

impl Default for QuantileSpace {
    fn default() -> Self {
        Self::new(DEFAULT_GRID).expect("default grid is valid")
    }
}

impl QuantileSpace {
    pub fn new(g: usize) -> Result<Self> {
        if g < 2 {
            return Err(Error::InvalidArgument("quantile grid needs at least 2 levels".into()));
        }
        let grid = (1..=g).map(|k| (k as f64 - 0.5) / g as f64).collect();
        Ok(Self { grid, metric: vec![1.0 / g as f64; g] })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Quantile function evaluated on the grid.
    pub fn from_quantile_fn(&self, q: impl Fn(f64) -> f64) -> QuantileFunction {
        QuantileFunction(self.grid.iter().map(|&p| q(p)).collect())
    }

    /// Empirical quantiles of a sample, linear between order statistics
    /// (`h = (n - 1) p`).
    pub fn empirical(&self, sample: &[f64]) -> Result<QuantileFunction> {
        if sample.is_empty() {
            return Err(Error::InvalidArgument("empty sample".into()));
        }
        if sample.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("sample has non-finite values".into()));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let values = self
            .grid
            .iter()
            .map(|&p| {
                let h = (n - 1) as f64 * p;
                let lo = h.floor() as usize;
                let hi = (lo + 1).min(n - 1);
                sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
            })
            .collect();
        Ok(QuantileFunction(values))
    }

    fn same_shape(&self, q: &QuantileFunction) -> Result<()> {
        if q.0.len() != self.grid.len() {
            return Err(Error::Shape(format!(
                "quantile function has {} values, grid has {}",
                q.0.len(),
                self.grid.len()
            )));
        }
        Ok(())
    }

    /// McCann interpolant `(1 - t) a + t b` in the quantile domain. No
    /// projection: for `t` outside `[0, 1]` the result may be non-monotone.
    pub fn mccann_interpolant(&self, a: &QuantileFunction, b: &QuantileFunction, t: f64) -> Result<QuantileFunction> {
        self.same_shape(a)?;
        self.same_shape(b)?;
        Ok(self.extend(a, b, t))
    }
}

/// Pool-adjacent-violators: L2 projection onto nondecreasing sequences.
pub fn isotonic(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, c2) = blocks[blocks.len() - 1];
            let (m1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let c = c1 + c2;
            *blocks.last_mut().unwrap() = ((m1 * c1 as f64 + m2 * c2 as f64) / c as f64, c);
        }
    }
    blocks.into_iter().flat_map(|(m, c)| std::iter::repeat_n(m, c)).collect()
}

impl GeodesicSpace for QuantileSpace {
    type Point = QuantileFunction;

    fn name(&self) -> &'static str {
        "wasserstein"
    }

    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn distance(&self, a: &QuantileFunction, b: &QuantileFunction) -> f64 {
        let g = self.grid.len() as f64;
        (a.0.iter().zip(&b.0).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / g).sqrt()
    }

    fn check(&self, p: &QuantileFunction) -> Result<()> {
        self.same_shape(p)?;
        if p.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Infeasible("non-finite quantile".into()));
        }
        for (k, w) in p.0.windows(2).enumerate() {
            let scale = 1.0 + w[0].abs().max(w[1].abs());
            if w[1] < w[0] - MONOTONE_TOL * scale {
                return Err(Error::Infeasible(format!(
                    "quantiles decrease between levels {k} and {}",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    fn extend(&self, a: &QuantileFunction, b: &QuantileFunction, t: f64) -> QuantileFunction {
        QuantileFunction(a.0.iter().zip(&b.0).map(|(x, y)| (1.0 - t) * x + t * y).collect())
    }

    fn project(&self, raw: QuantileFunction) -> Result<QuantileFunction> {
        self.same_shape(&raw)?;
        if raw.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite quantile".into()));
        }
        if raw.0.windows(2).all(|w| w[0] <= w[1]) {
            return Ok(raw);
        }
        Ok(QuantileFunction(isotonic(&raw.0)))
    }

    fn weighted_frechet_mean(&self, points: &[QuantileFunction], weights: &[f64]) -> Result<QuantileFunction> {
        frechet::validate_weights(points.len(), weights)?;
        for p in points {
            self.same_shape(p)?;
        }
        let coords: Vec<&[f64]> = points.iter().map(|p| p.0.as_slice()).collect();
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            return self.project(QuantileFunction(frechet::weighted_average(&coords, weights)));
        }
        let project = |x: Vec<f64>| self.project(QuantileFunction(x)).map(|q| q.0);
        let values = frechet::projected_gradient(&coords, weights, &self.metric, project)?;
        Ok(QuantileFunction(values))
    }

    fn coordinates(&self, p: &QuantileFunction) -> Vec<f64> {
        p.0.clone()
    }

    fn from_coordinates(&self, coords: &[f64]) -> Result<QuantileFunction> {
        let q = QuantileFunction(coords.to_vec());
        self.same_shape(&q)?;
        if q.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Infeasible("non-finite quantile".into()));
        }
        // small violations are isotonized, larger ones rejected
        self.check(&q)?;
        self.project(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{boundary_hit, BoundaryHit};

    #[test]
    fn grid_midpoints() {
        let s = QuantileSpace::new(4).unwrap();
        assert_eq!(s.grid(), &[0.125, 0.375, 0.625, 0.875]);
        assert_eq!(QuantileSpace::default().len(), 201);
    }

    #[test]
    fn dirac_distance() {
        let s = QuantileSpace::default();
        let d = s.distance(&QuantileFunction::dirac(0.0, 201), &QuantileFunction::dirac(3.0, 201));
        assert!((d - 3.0).abs() < 1e-14);
    }

    #[test]
    fn pava() {
        assert_eq!(isotonic(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(isotonic(&[0.0, 1.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn empirical_quantiles_interpolate_order_statistics() {
        let s = QuantileSpace::new(2).unwrap();
        // p = 0.25, 0.75 on sample {0, 1, 2, 3, 4}: h = 1, 3
        let q = s.empirical(&[4.0, 0.0, 2.0, 1.0, 3.0]).unwrap();
        assert_eq!(q.values(), &[1.0, 3.0]);
    }

    #[test]
    fn location_shift_extends_without_boundary() {
        let s = QuantileSpace::new(11).unwrap();
        let a = s.from_quantile_fn(|p| p);
        let b = s.from_quantile_fn(|p| p + 2.0);
        assert!(matches!(boundary_hit(&s, &a, &b).unwrap(), BoundaryHit::Unbounded));
        // scale contraction eventually breaks monotonicity
        let c = s.from_quantile_fn(|p| 0.5 * p);
        match boundary_hit(&s, &a, &c).unwrap() {
            BoundaryHit::Hit { param, .. } => assert!((param - 2.0).abs() < 1e-8),
            BoundaryHit::Unbounded => panic!("expected a boundary"),
        }
    }

    #[test]
    fn slightly_non_monotone_input_is_isotonized() {
        let s = QuantileSpace::new(3).unwrap();
        let q = s.from_coordinates(&[0.0, 1.0, 1.0 - 1e-14]).unwrap();
        assert!(q.values().windows(2).all(|w| w[0] <= w[1]));
        assert!(s.from_coordinates(&[0.0, 1.0, 0.5]).is_err());
    }
}
