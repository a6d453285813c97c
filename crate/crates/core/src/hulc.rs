//! HulC confidence intervals for the GATE contrast `d(theta_0, theta_1)`.
//!
//! The sample is split at random into `B*` disjoint parts, the estimator is run
//! on each part, and the interval is the hull `[min, max]` of the per-part
//! contrasts. With `P(B; delta) = (1/2 - delta)^B + (1/2 + delta)^B`, `B` is the
//! smallest integer with `P(B; delta) <= alpha`, and `B* in {B - 1, B}` is
//! randomized so that the miscoverage is exactly `alpha` for median-unbiased
//! estimators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{estimate, split_even, EstimatorConfig, Method};
use crate::geodesic::GeodesicSpace;
use crate::observation::Observation;

pub const MAX_SPLITS: u32 = 64;
const MIN_SPLIT_SIZE: usize = 4;
const PARTITION_RETRIES: usize = 100;

/// `P(B; delta)`.
pub fn miscoverage(b: u32, delta: f64) -> f64 {
    (0.5 - delta).powi(b as i32) + (0.5 + delta).powi(b as i32)
}

fn check_level(alpha: f64, delta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Configuration(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    if !(0.0..0.5).contains(&delta) {
        return Err(Error::Configuration(format!("delta = {delta} must lie in [0, 0.5)")));
    }
    Ok(())
}

/// Smallest `B` with `P(B; delta) <= alpha`, and the randomization weight
/// `tau = (alpha - P(B)) / (P(B - 1) - P(B))`.
pub fn hulc_breaks(alpha: f64, delta: f64) -> Result<(u32, f64)> {
    check_level(alpha, delta)?;
    let b = (1..=MAX_SPLITS)
        .find(|&b| miscoverage(b, delta) <= alpha)
        .ok_or(Error::InfeasibleLevel { alpha, delta, cap: MAX_SPLITS })?;
    let (p, prev) = (miscoverage(b, delta), miscoverage(b - 1, delta));
    let tau = ((alpha - p) / (prev - p)).clamp(0.0, 1.0);
    Ok((b, tau))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HulcConfig {
    pub alpha: f64,
    pub delta: f64,
    pub seed: u64,
    pub method: Method,
    pub estimator: EstimatorConfig,
}

impl Default for HulcConfig {
    fn default() -> Self {
        Self { alpha: 0.05, delta: 0.0, seed: 0, method: Method::Dr, estimator: EstimatorConfig::default() }
    }
}

impl HulcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Configuration(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        check_level(self.alpha, self.delta)?;
        self.estimator.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HulcInterval {
    pub lo: f64,
    pub hi: f64,
    pub b: u32,
    pub tau: f64,
    pub b_star: usize,
    pub split_contrasts: Vec<f64>,
}

impl HulcInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Draw `B*` and a valid random partition of `0..n` into `B*` parts.
pub fn hulc_splits<P>(samples: &[Observation<P>], cfg: &HulcConfig) -> Result<(u32, f64, Vec<Vec<usize>>)> {
    let (b, tau) = hulc_breaks(cfg.alpha, cfg.delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u: f64 = rng.random();
    let b_star = if u <= tau || b == 1 { b } else { b - 1 } as usize;
    let n = samples.len();
    if n < b_star * MIN_SPLIT_SIZE {
        return Err(Error::Partition(format!("n = {n} is too small for {b_star} splits")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..PARTITION_RETRIES {
        order.shuffle(&mut rng);
        let parts = split_even(&order, b_star);
        let valid = parts.iter().all(|part| {
            let treated = part.iter().filter(|&&i| samples[i].treated).count();
            treated > 0 && treated < part.len()
        });
        if valid {
            return Ok((b, tau, parts));
        }
    }
    Err(Error::Partition(format!(
        "no split into {b_star} parts with both arms in each after {PARTITION_RETRIES} tries"
    )))
}

/// HulC interval for the contrast of `cfg.method`.
pub fn hulc_interval<S>(space: &S, samples: &[Observation<S::Point>], cfg: &HulcConfig) -> Result<HulcInterval>
where
    S: GeodesicSpace + Sync + ?Sized,
    S::Point: Send + Sync,
{
    cfg.validate()?;
    let (b, tau, parts) = hulc_splits(samples, cfg)?;
    let split_contrasts: Vec<f64> = parts
        .par_iter()
        .enumerate()
        .map(|(k, part)| {
            let sub: Vec<Observation<S::Point>> = part.iter().map(|&i| samples[i].clone()).collect();
            let est_cfg = EstimatorConfig { seed: cfg.seed.wrapping_add(1 + k as u64), ..cfg.estimator.clone() };
            estimate(space, &sub, cfg.method, &est_cfg).map(|e| e.contrast)
        })
        .collect::<Result<_>>()?;
    let lo = split_contrasts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = split_contrasts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(HulcInterval { lo, hi, b, tau, b_star: parts.len(), split_contrasts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::euclidean::Interval;

    #[test]
    fn breaks_at_five_percent() {
        let (b, tau) = hulc_breaks(0.05, 0.0).unwrap();
        assert_eq!(b, 6);
        assert!((tau - 0.6).abs() < 1e-15);
    }

    #[test]
    fn breaks_edge_cases() {
        assert_eq!(hulc_breaks(1.0, 0.0).unwrap().0, 1);
        assert!(matches!(hulc_breaks(0.05, 0.49), Err(Error::InfeasibleLevel { .. })));
        assert!(hulc_breaks(0.0, 0.0).is_err());
        assert!(hulc_breaks(0.05, 0.5).is_err());
    }

    #[test]
    fn breaks_monotone() {
        let alphas = [0.01, 0.05, 0.1, 0.2, 0.5];
        for d in [0.0, 0.1, 0.2] {
            let bs: Vec<u32> = alphas.iter().map(|a| hulc_breaks(*a, d).unwrap().0).collect();
            assert!(bs.windows(2).all(|w| w[0] >= w[1]));
        }
        let deltas: Vec<u32> = [0.0, 0.05, 0.1, 0.2, 0.3].iter().map(|d| hulc_breaks(0.05, *d).unwrap().0).collect();
        assert!(deltas.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn constant_effect_gives_degenerate_interval() {
        let obs: Vec<Observation<f64>> = (0..60)
            .map(|i| {
                let t = i % 2 == 0;
                let x = (i as f64 * 0.37).sin();
                Observation::new(if t { 3.0 } else { 1.0 }, t, vec![x])
            })
            .collect();
        let iv = hulc_interval(&Interval::real_line(), &obs, &HulcConfig::default()).unwrap();
        assert!((iv.lo - 2.0).abs() < 1e-12 && (iv.hi - 2.0).abs() < 1e-12);
        assert!(iv.b_star == 5 || iv.b_star == 6);
        assert_eq!(iv.split_contrasts.len(), iv.b_star);
    }

    #[test]
    fn too_small_sample_is_a_partition_error() {
        let obs: Vec<Observation<f64>> = (0..10).map(|i| Observation::new(0.0, i % 2 == 0, vec![i as f64])).collect();
        let r = hulc_interval(&Interval::real_line(), &obs, &HulcConfig::default());
        assert!(matches!(r, Err(Error::Partition(_))));
    }
}
