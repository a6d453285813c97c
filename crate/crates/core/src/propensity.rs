//! Logistic propensity model fitted by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::observation::FeatureMap;

pub const DEFAULT_ETA0: f64 = 0.05;

const GRAD_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 100;

pub fn expit(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^v)` without overflow.
fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// Fitted `e(x; phi) = expit(phi' [1, f(x)])`, clipped to `[eta0, 1 - eta0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityFit {
    phi: Vec<f64>,
    eta0: f64,
    feature_map: FeatureMap,
    /// Log-likelihood after each accepted Newton step, start value first.
    loglik_trace: Vec<f64>,
}

impl PropensityFit {
    /// A fit with given coefficients (intercept first).
    pub fn from_coefficients(phi: Vec<f64>, eta0: f64, feature_map: FeatureMap) -> Result<Self> {
        check_eta0(eta0)?;
        if phi.is_empty() || phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("coefficients must be finite and non-empty".into()));
        }
        Ok(Self { phi, eta0, feature_map, loglik_trace: Vec::new() })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.phi
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn feature_map(&self) -> FeatureMap {
        self.feature_map
    }

    pub fn loglik_trace(&self) -> &[f64] {
        &self.loglik_trace
    }

    pub fn with_eta0(mut self, eta0: f64) -> Result<Self> {
        check_eta0(eta0)?;
        self.eta0 = eta0;
        Ok(self)
    }

    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        let f = self.feature_map.apply(x);
        self.phi[0] + self.phi[1..].iter().zip(&f).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Unclipped fitted probability.
    pub fn raw_probability(&self, x: &[f64]) -> f64 {
        expit(self.linear_predictor(x))
    }

    /// Clipped propensity in `[eta0, 1 - eta0]`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.raw_probability(x).clamp(self.eta0, 1.0 - self.eta0)
    }
}

fn check_eta0(eta0: f64) -> Result<()> {
    if !(eta0 > 0.0 && eta0 < 0.5) {
        return Err(Error::InvalidArgument(format!("eta0 = {eta0} must lie in (0, 0.5)")));
    }
    Ok(())
}

/// Maximum-likelihood logistic regression of `treated` on `[1, f(x)]` by
/// Newton-Raphson / IRLS with step halving.
pub fn fit_logistic(
    treated: &[bool],
    covariates: &[Vec<f64>],
    feature_map: FeatureMap,
    eta0: f64,
) -> Result<PropensityFit> {
    check_eta0(eta0)?;
    let n = treated.len();
    if covariates.len() != n {
        return Err(Error::Shape(format!("{n} treatments but {} covariate rows", covariates.len())));
    }
    let n_treated = treated.iter().filter(|t| **t).count();
    if n_treated == 0 || n_treated == n {
        return Err(Error::DegenerateData("treatment takes a single value".into()));
    }
    let rows: Vec<Vec<f64>> = covariates.iter().map(|x| feature_map.apply(x)).collect();
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::Shape("covariate rows have differing lengths".into()));
    }
    let k = p + 1;
    if n < p + 2 {
        return Err(Error::DegenerateData(format!("n = {n} too small for {p} covariates")));
    }
    let design = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    let y = DVector::from_iterator(n, treated.iter().map(|t| if *t { 1.0 } else { 0.0 }));

    let loglik = |beta: &DVector<f64>| -> f64 {
        let eta = &design * beta;
        eta.iter().zip(y.iter()).map(|(e, t)| t * e - softplus(*e)).sum()
    };

    let mut beta = DVector::<f64>::zeros(k);
    let mut ll = loglik(&beta);
    let mut trace = vec![ll];
    for _ in 0..MAX_ITERS {
        let eta = &design * &beta;
        let prob = eta.map(expit);
        let grad = design.transpose() * (&y - &prob);
        if grad.norm() < GRAD_TOL {
            return Ok(PropensityFit { phi: beta.iter().copied().collect(), eta0, feature_map, loglik_trace: trace });
        }
        let weights = prob.map(|q| q * (1.0 - q));
        let mut hess = DMatrix::<f64>::zeros(k, k);
        for i in 0..n {
            let row = design.row(i);
            hess += weights[i] * row.transpose() * row;
        }
        // rank-deficient designs (e.g. a constant covariate) take the
        // minimum-norm Newton step
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => hess.svd(true, true).solve(&grad, 1e-12).map_err(|_| Error::Separation)?,
        };
        let mut scale = 1.0;
        let mut next = None;
        while scale > 1e-10 {
            let cand = &beta + &step * scale;
            let cand_ll = loglik(&cand);
            if cand_ll >= ll {
                next = Some((cand, cand_ll));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, cand_ll)) = next else {
            // no ascent along the Newton direction: at the optimum to rounding
            return Ok(PropensityFit { phi: beta.iter().copied().collect(), eta0, feature_map, loglik_trace: trace });
        };
        let moved = (&cand - &beta).norm();
        beta = cand;
        ll = cand_ll;
        trace.push(ll);
        let max_eta = (&design * &beta).amax();
        // perfect (or near perfect) classification drives the likelihood to 1
        if max_eta > 30.0 && ll > -1e-6 * n as f64 {
            return Err(Error::Separation);
        }
        if moved < 1e-14 * (1.0 + beta.norm()) {
            return Ok(PropensityFit { phi: beta.iter().copied().collect(), eta0, feature_map, loglik_trace: trace });
        }
    }
    Err(Error::Separation)
}
