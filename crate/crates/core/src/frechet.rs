//! Weighted Fréchet means and global Fréchet regression.
//!
//! Global Fréchet regression predicts the conditional Fréchet mean at `x` as a
//! weighted Fréchet mean of the outcomes in one treatment group, with weights
//! `1 + (X_i - Xbar)' Sigma^-1 (x - Xbar)` built from the full-sample covariate
//! mean and covariance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geodesic::GeodesicSpace;
use crate::observation::{covariate_dim, FeatureMap, Observation};

const PG_MAX_ITERS: usize = 10_000;
const PG_TOL: f64 = 1e-9;

/// Points with real weights (negative weights allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample<P> {
    points: Vec<P>,
    weights: Vec<f64>,
}

impl<P: Clone> WeightedSample<P> {
    pub fn new(points: Vec<P>, weights: Vec<f64>) -> Result<Self> {
        validate_weights(points.len(), &weights)?;
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Vec<P>) -> Result<Self> {
        let w = vec![1.0; points.len()];
        Self::new(points, w)
    }

    pub fn points(&self) -> &[P] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Minimizer of `sum_i w_i d^2(nu, y_i)` over the feasible set.
pub fn weighted_frechet_mean<S: GeodesicSpace + ?Sized>(
    space: &S,
    sample: &WeightedSample<S::Point>,
) -> Result<S::Point> {
    space.weighted_frechet_mean(&sample.points, &sample.weights)
}

pub(crate) fn validate_weights(n: usize, weights: &[f64]) -> Result<()> {
    if weights.len() != n {
        return Err(Error::Shape(format!("{n} points but {} weights", weights.len())));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidArgument("non-finite weight".into()));
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Err(Error::InvalidArgument("at least one weight must be nonzero".into()));
    }
    Ok(())
}

pub(crate) fn weighted_average(coords: &[&[f64]], weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut acc = vec![0.0; coords[0].len()];
    for (c, w) in coords.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        acc.iter_mut().zip(c.iter()).for_each(|(a, x)| *a += w * x);
    }
    acc.iter_mut().for_each(|a| *a /= total);
    acc
}

/// Projected gradient descent with backtracking for
/// `sum_i w_i |nu - y_i|^2_M` over a convex set given by its projection,
/// where `M = diag(metric)`. Starts from the best input point.
pub(crate) fn projected_gradient(
    coords: &[&[f64]],
    weights: &[f64],
    metric: &[f64],
    project: impl Fn(Vec<f64>) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let objective = |nu: &[f64]| -> f64 {
        coords
            .iter()
            .zip(weights)
            .map(|(y, w)| {
                w * nu.iter().zip(y.iter()).zip(metric).map(|((a, b), m)| m * (a - b) * (a - b)).sum::<f64>()
            })
            .sum()
    };
    let total: f64 = weights.iter().sum();
    let abs_total: f64 = weights.iter().map(|w| w.abs()).sum();
    let moment = {
        let mut acc = vec![0.0; coords[0].len()];
        for (c, w) in coords.iter().zip(weights) {
            acc.iter_mut().zip(c.iter()).for_each(|(a, x)| *a += w * x);
        }
        acc
    };
    let (mut x, mut fx) = coords
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w != 0.0)
        .map(|(c, _)| (c.to_vec(), objective(c)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("validated weights have a nonzero entry");
    let mut step = 0.5 / abs_total;
    for _ in 0..PG_MAX_ITERS {
        // gradient in the M-metric: 2 (W nu - sum_i w_i y_i)
        let grad: Vec<f64> = x.iter().zip(&moment).map(|(v, m)| 2.0 * (total * v - m)).collect();
        let mut improved = None;
        let mut trial = step;
        while trial > 1e-300 {
            let cand: Vec<f64> = x.iter().zip(&grad).map(|(v, g)| v - trial * g).collect();
            let cand = project(cand)?;
            let fc = objective(&cand);
            if fc < fx {
                improved = Some((cand, fc));
                break;
            }
            trial *= 0.5;
            if trial < step * 1e-12 {
                break;
            }
        }
        match improved {
            None => return Ok(x),
            Some((cand, fc)) => {
                let decrease = fx - fc;
                x = cand;
                fx = fc;
                step = trial * 2.0;
                if decrease <= PG_TOL * (1.0 + fx.abs()) {
                    return Ok(x);
                }
            }
        }
    }
    Err(Error::Convergence { iterations: PG_MAX_ITERS, objective: fx, best: x })
}

/// Global Fréchet regression for one treatment group.
#[derive(Debug, Clone)]
pub struct GfrModel<P> {
    treated: bool,
    feature_map: FeatureMap,
    /// Centered features `X_i - Xbar` for every unit in the full sample.
    centered: Vec<DVector<f64>>,
    /// Indices of the group members within the full sample.
    members: Vec<usize>,
    outcomes: Vec<P>,
    xbar: DVector<f64>,
    sigma_inv: DMatrix<f64>,
}

impl<P: Clone> GfrModel<P> {
    /// Fit the group-`treated` model. The covariate mean and covariance use all
    /// `n` units; only the group's outcomes enter the predictions.
    pub fn fit(samples: &[Observation<P>], treated: bool, feature_map: FeatureMap) -> Result<Self> {
        let p = covariate_dim(samples)?;
        let n = samples.len();
        let features: Vec<DVector<f64>> =
            samples.iter().map(|s| DVector::from_vec(feature_map.apply(&s.x))).collect();
        let xbar = features.iter().fold(DVector::zeros(p), |acc, f| acc + f) / n as f64;
        let centered: Vec<DVector<f64>> = features.iter().map(|f| f - &xbar).collect();
        let mut sigma = DMatrix::<f64>::zeros(p, p);
        for c in &centered {
            sigma += c * c.transpose();
        }
        sigma /= n as f64;
        let sigma_inv = invert_covariance(sigma);
        let members: Vec<usize> = (0..n).filter(|&i| samples[i].treated == treated).collect();
        if members.is_empty() {
            return Err(Error::Estimation(format!(
                "no units in the {} group",
                if treated { "treated" } else { "control" }
            )));
        }
        let outcomes = members.iter().map(|&i| samples[i].y.clone()).collect();
        Ok(Self { treated, feature_map, centered, members, outcomes, xbar, sigma_inv })
    }

    pub fn treated(&self) -> bool {
        self.treated
    }

    pub fn feature_map(&self) -> FeatureMap {
        self.feature_map
    }

    pub fn group_size(&self) -> usize {
        self.members.len()
    }

    pub fn sample_size(&self) -> usize {
        self.centered.len()
    }

    pub fn xbar(&self) -> &DVector<f64> {
        &self.xbar
    }

    fn direction(&self, x: &[f64]) -> Result<DVector<f64>> {
        let f = DVector::from_vec(self.feature_map.apply(x));
        if f.len() != self.xbar.len() {
            return Err(Error::Shape(format!(
                "covariate has dimension {}, model expects {}",
                f.len(),
                self.xbar.len()
            )));
        }
        Ok(&self.sigma_inv * (f - &self.xbar))
    }

    /// `w_i(x) = 1 + (X_i - Xbar)' Sigma^-1 (x - Xbar)` for all `n` units.
    pub fn weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = self.direction(x)?;
        Ok(self.centered.iter().map(|c| 1.0 + c.dot(&v)).collect())
    }

    /// Weights restricted to the group members, in member order.
    pub fn group_weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = self.direction(x)?;
        Ok(self.members.iter().map(|&i| 1.0 + self.centered[i].dot(&v)).collect())
    }

    /// `mu_t(x)`: weighted Fréchet mean of the group outcomes.
    pub fn predict<S>(&self, space: &S, x: &[f64]) -> Result<P>
    where
        S: GeodesicSpace<Point = P> + ?Sized,
    {
        let w = self.group_weights(x)?;
        if w.iter().all(|v| *v == 0.0) {
            return Err(Error::Estimation("all regression weights vanish at this covariate".into()));
        }
        space.weighted_frechet_mean(&self.outcomes, &w)
    }
}

/// Inverse of a covariance matrix, with a `1e-8 * trace` ridge when singular.
fn invert_covariance(sigma: DMatrix<f64>) -> DMatrix<f64> {
    let p = sigma.nrows();
    if let Some(ch) = sigma.clone().cholesky() {
        return ch.inverse();
    }
    let trace = sigma.trace();
    if trace <= 0.0 {
        // constant covariates carry no information; every weight is 1
        return DMatrix::zeros(p, p);
    }
    let ridged = sigma + DMatrix::identity(p, p) * (1e-8 * trace);
    match ridged.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => ridged.pseudo_inverse(1e-12).unwrap_or_else(|_| DMatrix::zeros(p, p)),
    }
}

/// `mu_0` and `mu_1` fitted on the same sample.
#[derive(Debug, Clone)]
pub struct OutcomeModels<P> {
    pub control: GfrModel<P>,
    pub treated: GfrModel<P>,
}

impl<P: Clone> OutcomeModels<P> {
    pub fn fit(samples: &[Observation<P>], feature_map: FeatureMap) -> Result<Self> {
        Ok(Self {
            control: GfrModel::fit(samples, false, feature_map)?,
            treated: GfrModel::fit(samples, true, feature_map)?,
        })
    }

    pub fn arm(&self, treated: bool) -> &GfrModel<P> {
        if treated {
            &self.treated
        } else {
            &self.control
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::euclidean::Interval;

    fn scalar_obs(xs: &[f64], ys: &[f64], ts: &[bool]) -> Vec<Observation<f64>> {
        xs.iter().zip(ys).zip(ts).map(|((x, y), t)| Observation::new(*y, *t, vec![*x])).collect()
    }

    #[test]
    fn weights_at_the_mean_are_one() {
        let obs = scalar_obs(&[-1.0, 0.5, 2.0, 3.5], &[0.0; 4], &[true, false, true, false]);
        let m = GfrModel::fit(&obs, true, FeatureMap::Identity).unwrap();
        let w = m.weights(&[m.xbar()[0]]).unwrap();
        assert!(w.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn balanced_binary_covariate() {
        // Xbar = 0, Sigma = 1: at x = 1 the weights are 1 - 1 = 0 and 1 + 1 = 2
        let obs = scalar_obs(&[-1.0, 1.0], &[0.0, 0.0], &[true, true]);
        let m = GfrModel::fit(&obs, true, FeatureMap::Identity).unwrap();
        assert_eq!(m.weights(&[1.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn weights_sum_to_n() {
        let xs = [0.3, -0.7, 1.2, 0.1, -0.4];
        let obs = scalar_obs(&xs, &[0.0; 5], &[true, false, true, true, false]);
        let m = GfrModel::fit(&obs, false, FeatureMap::Identity).unwrap();
        for x in [-2.0, 0.0, 0.9, 5.0] {
            let s: f64 = m.weights(&[x]).unwrap().iter().sum();
            assert!((s - 5.0).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_outcomes_predict_the_constant() {
        let xs = [0.3, -0.7, 1.2, 0.1, -0.4];
        let obs = scalar_obs(&xs, &[4.0; 5], &[true, false, true, true, false]);
        let m = GfrModel::fit(&obs, true, FeatureMap::Identity).unwrap();
        let line = Interval::real_line();
        for x in [-0.5, 0.0, 2.0] {
            assert!((m.predict(&line, &[x]).unwrap() - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_group_is_an_error() {
        let obs = scalar_obs(&[0.0, 1.0], &[1.0, 2.0], &[false, false]);
        assert!(matches!(GfrModel::fit(&obs, true, FeatureMap::Identity), Err(Error::Estimation(_))));
    }

    #[test]
    fn constant_covariate_gives_unit_weights() {
        let obs = scalar_obs(&[0.0, 0.0, 0.0], &[1.0, 2.0, 6.0], &[true, true, true]);
        let m = GfrModel::fit(&obs, true, FeatureMap::Identity).unwrap();
        assert_eq!(m.weights(&[3.0]).unwrap(), vec![1.0; 3]);
        assert!((m.predict(&Interval::real_line(), &[0.0]).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_points_are_ignored() {
        let line = Interval::real_line();
        let a = line.weighted_frechet_mean(&[1.0, 5.0, 100.0], &[0.5, 0.5, 0.0]).unwrap();
        let b = line.weighted_frechet_mean(&[1.0, 5.0], &[0.5, 0.5]).unwrap();
        assert_eq!(a, b);
        assert!(WeightedSample::new(vec![1.0], vec![0.0]).is_err());
        assert!(WeightedSample::new(vec![1.0, 2.0], vec![1.0]).is_err());
    }
}
