//! Geodesic average treatment effect estimators.
//!
//! Each estimator produces Fréchet-mean estimates `theta_0`, `theta_1` of the
//! two potential-outcome means; the GATE is the geodesic between them.
//!
//! * doubly robust: mean of `gamma_{mu_t(X_i), Y_i}(kappa_{t,i})`
//! * cross-fitting: doubly robust on each fold with nuisances fitted on the
//!   complement, combined by a fold-size weighted Fréchet mean
//! * outcome regression: mean of `mu_t(X_i)` over all units
//! * inverse probability weighting: mean of `gamma_{mu, Y_i}(kappa_{t,i})`
//!   started from the sample Fréchet mean `mu`
//!
//! with `kappa_{t,i} = t T_i / e(X_i) + (1 - t)(1 - T_i) / (1 - e(X_i))`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frechet::OutcomeModels;
use crate::geodesic::{geodesic_eval_with, ExtensionRule, GeodesicSegment, GeodesicSpace};
use crate::observation::{arm_counts, covariate_dim, FeatureMap, Observation};
use crate::propensity::{fit_logistic, PropensityFit, DEFAULT_ETA0};

pub const DEFAULT_FOLDS: usize = 5;
const PARTITION_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Dr,
    Cf,
    Or,
    Ipw,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dr, Method::Cf, Method::Or, Method::Ipw];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dr => "dr",
            Method::Cf => "cf",
            Method::Or => "or",
            Method::Ipw => "ipw",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str().to_uppercase())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dr" => Ok(Method::Dr),
            "cf" => Ok(Method::Cf),
            "or" => Ok(Method::Or),
            "ipw" => Ok(Method::Ipw),
            other => Err(Error::Configuration(format!("unknown method '{other}'"))),
        }
    }
}

/// Extension rule used by the estimators unless configured otherwise.
pub const DEFAULT_EXTENSION: ExtensionRule = ExtensionRule::ProjectOnExit;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub eta0: f64,
    pub folds: usize,
    pub seed: u64,
    pub or_features: FeatureMap,
    pub ps_features: FeatureMap,
    pub extension: ExtensionRule,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            eta0: DEFAULT_ETA0,
            folds: DEFAULT_FOLDS,
            seed: 0,
            or_features: FeatureMap::Identity,
            ps_features: FeatureMap::Identity,
            extension: DEFAULT_EXTENSION,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0 < 0.5) {
            return Err(Error::Configuration(format!("eta0 = {} must lie in (0, 0.5)", self.eta0)));
        }
        if self.folds < 2 {
            return Err(Error::Configuration(format!("need at least 2 folds, got {}", self.folds)));
        }
        Ok(())
    }

    /// Both nuisance models marked misspecified: no consistency guarantee.
    pub fn theory_unsupported(&self) -> bool {
        self.or_features == FeatureMap::Square && self.ps_features == FeatureMap::Square
    }
}

/// Extension factor `kappa_{t,i}`.
pub fn kappa(arm: bool, treated: bool, propensity: f64) -> f64 {
    match (arm, treated) {
        (true, true) => 1.0 / propensity,
        (false, false) => 1.0 / (1.0 - propensity),
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub n: usize,
    pub n_treated: usize,
    pub n_control: usize,
    pub min_propensity: f64,
    pub max_propensity: f64,
    pub max_kappa: f64,
    pub folds: Option<usize>,
    pub theory_unsupported: bool,
}

/// Estimated GATE: both potential-outcome means and the geodesic joining them.
#[derive(Debug, Clone, PartialEq)]
pub struct GateEstimate<P> {
    pub theta0: P,
    pub theta1: P,
    pub gate: GeodesicSegment<P>,
    pub contrast: f64,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl<P: Clone> GateEstimate<P> {
    fn assemble<S>(space: &S, theta0: P, theta1: P, method: Method, diagnostics: Diagnostics) -> Self
    where
        S: GeodesicSpace<Point = P> + ?Sized,
    {
        let contrast = space.distance(&theta0, &theta1);
        Self {
            gate: GeodesicSegment::new(theta0.clone(), theta1.clone()),
            theta0,
            theta1,
            contrast,
            method,
            diagnostics,
        }
    }

    pub fn theta(&self, arm: bool) -> &P {
        if arm {
            &self.theta1
        } else {
            &self.theta0
        }
    }
}

/// Fitted outcome regressions and propensity model.
#[derive(Debug, Clone)]
pub struct Nuisances<P> {
    pub outcome: OutcomeModels<P>,
    pub propensity: PropensityFit,
}

impl<P: Clone> Nuisances<P> {
    pub fn fit(samples: &[Observation<P>], cfg: &EstimatorConfig) -> Result<Self> {
        Ok(Self { outcome: OutcomeModels::fit(samples, cfg.or_features)?, propensity: fit_propensity(samples, cfg)? })
    }
}

pub fn fit_propensity<P>(samples: &[Observation<P>], cfg: &EstimatorConfig) -> Result<PropensityFit> {
    let t: Vec<bool> = samples.iter().map(|s| s.treated).collect();
    let x: Vec<Vec<f64>> = samples.iter().map(|s| s.x.clone()).collect();
    fit_logistic(&t, &x, cfg.ps_features, cfg.eta0)
}

/// Per-unit nuisance predictions `mu_0(X_i)`, `mu_1(X_i)`, `e(X_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedValues<P> {
    pub mu0: Vec<P>,
    pub mu1: Vec<P>,
    pub propensity: Vec<f64>,
}

impl<P: Clone + Send + Sync> FittedValues<P> {
    /// Evaluate the nuisances at the covariates of `samples`.
    pub fn predict<S>(space: &S, samples: &[Observation<P>], nuisances: &Nuisances<P>) -> Result<Self>
    where
        S: GeodesicSpace<Point = P> + ?Sized,
    {
        covariate_dim(samples)?;
        let pairs: Vec<(P, P)> = samples
            .par_iter()
            .map(|s| {
                let m0 = nuisances.outcome.control.predict(space, &s.x)?;
                let m1 = nuisances.outcome.treated.predict(space, &s.x)?;
                Ok((m0, m1))
            })
            .collect::<Result<_>>()?;
        let (mu0, mu1) = pairs.into_iter().unzip();
        let propensity = samples.iter().map(|s| nuisances.propensity.predict(&s.x)).collect();
        Ok(Self { mu0, mu1, propensity })
    }

    pub fn mu(&self, arm: bool) -> &[P] {
        if arm {
            &self.mu1
        } else {
            &self.mu0
        }
    }
}

fn diagnostics<P>(samples: &[Observation<P>], propensity: &[f64], cfg: &EstimatorConfig) -> Diagnostics {
    let (n_treated, n_control) = arm_counts(samples);
    let min_propensity = propensity.iter().copied().fold(f64::INFINITY, f64::min);
    let max_propensity = propensity.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_kappa = samples
        .iter()
        .zip(propensity)
        .map(|(s, e)| kappa(s.treated, s.treated, *e))
        .fold(0.0, f64::max);
    Diagnostics {
        n: samples.len(),
        n_treated,
        n_control,
        min_propensity,
        max_propensity,
        max_kappa,
        folds: None,
        theory_unsupported: cfg.theory_unsupported(),
    }
}

fn check_lengths<P, Q>(samples: &[Observation<P>], fitted: &FittedValues<Q>) -> Result<()> {
    let n = samples.len();
    if fitted.mu0.len() != n || fitted.mu1.len() != n || fitted.propensity.len() != n {
        return Err(Error::Configuration(format!(
            "fitted values cover {} units, sample has {n}",
            fitted.propensity.len()
        )));
    }
    if n == 0 {
        return Err(Error::DegenerateData("empty sample".into()));
    }
    Ok(())
}

/// Doubly robust `theta_t` for one arm from precomputed nuisance values.
fn dr_arm<S: GeodesicSpace + ?Sized>(
    space: &S,
    samples: &[Observation<S::Point>],
    fitted: &FittedValues<S::Point>,
    arm: bool,
    rule: ExtensionRule,
) -> Result<S::Point> {
    let targets: Vec<S::Point> = samples
        .iter()
        .zip(fitted.mu(arm))
        .zip(&fitted.propensity)
        .map(|((s, mu), e)| geodesic_eval_with(space, mu, &s.y, kappa(arm, s.treated, *e), rule))
        .collect::<Result<_>>()?;
    space.frechet_mean(&targets)
}

/// Doubly robust estimator.
pub fn dr_estimate<S: GeodesicSpace + ?Sized>(
    space: &S,
    samples: &[Observation<S::Point>],
    fitted: &FittedValues<S::Point>,
    cfg: &EstimatorConfig,
) -> Result<GateEstimate<S::Point>> {
    check_lengths(samples, fitted)?;
    let theta0 = dr_arm(space, samples, fitted, false, cfg.extension)?;
    let theta1 = dr_arm(space, samples, fitted, true, cfg.extension)?;
    let diag = diagnostics(samples, &fitted.propensity, cfg);
    Ok(GateEstimate::assemble(space, theta0, theta1, Method::Dr, diag))
}

/// Outcome regression estimator.
pub fn or_estimate<S: GeodesicSpace + ?Sized>(
    space: &S,
    samples: &[Observation<S::Point>],
    fitted: &FittedValues<S::Point>,
    cfg: &EstimatorConfig,
) -> Result<GateEstimate<S::Point>> {
    check_lengths(samples, fitted)?;
    let theta0 = space.frechet_mean(&fitted.mu0)?;
    let theta1 = space.frechet_mean(&fitted.mu1)?;
    let diag = diagnostics(samples, &fitted.propensity, cfg);
    Ok(GateEstimate::assemble(space, theta0, theta1, Method::Or, diag))
}

/// Inverse probability weighting estimator started at the sample Fréchet mean.
pub fn ipw_estimate<S: GeodesicSpace + ?Sized>(
    space: &S,
    samples: &[Observation<S::Point>],
    propensity: &[f64],
    cfg: &EstimatorConfig,
) -> Result<GateEstimate<S::Point>> {
    if propensity.len() != samples.len() {
        return Err(Error::Configuration("one propensity per unit required".into()));
    }
    if samples.is_empty() {
        return Err(Error::DegenerateData("empty sample".into()));
    }
    let ys: Vec<S::Point> = samples.iter().map(|s| s.y.clone()).collect();
    let start = space.frechet_mean(&ys)?;
    let arm = |t: bool| -> Result<S::Point> {
        let pts: Vec<S::Point> = samples
            .iter()
            .zip(propensity)
            .map(|(s, e)| geodesic_eval_with(space, &start, &s.y, kappa(t, s.treated, *e), cfg.extension))
            .collect::<Result<_>>()?;
        space.frechet_mean(&pts)
    };
    let theta0 = arm(false)?;
    let theta1 = arm(true)?;
    let diag = diagnostics(samples, propensity, cfg);
    Ok(GateEstimate::assemble(space, theta0, theta1, Method::Ipw, diag))
}

/// Random partition of `0..n` into `k` folds of near-equal size (the first
/// `n mod k` folds get one extra unit), such that every training complement
/// holds both treatment arms.
pub fn fold_partition<P>(samples: &[Observation<P>], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = samples.len();
    if k < 2 {
        return Err(Error::Configuration(format!("need at least 2 folds, got {k}")));
    }
    if n < 2 * k {
        return Err(Error::Partition(format!("n = {n} is too small for {k} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let (total_treated, total_control) = arm_counts(samples);
    for _ in 0..PARTITION_RETRIES {
        order.shuffle(&mut rng);
        let folds = split_even(&order, k);
        let valid = folds.iter().all(|fold| {
            let treated_in = fold.iter().filter(|&&i| samples[i].treated).count();
            let control_in = fold.len() - treated_in;
            total_treated > treated_in && total_control > control_in
        });
        if valid {
            return Ok(folds);
        }
    }
    Err(Error::Partition(format!(
        "no {k}-fold partition with both arms in every training set after {PARTITION_RETRIES} tries"
    )))
}

pub(crate) fn split_even(order: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = order.len();
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[pos..pos + size].to_vec());
        pos += size;
    }
    folds
}

/// Cross-fitting estimator on a random `cfg.folds`-fold partition.
pub fn cf_estimate<S: GeodesicSpace + ?Sized>(
    space: &S,
    samples: &[Observation<S::Point>],
    cfg: &EstimatorConfig,
) -> Result<GateEstimate<S::Point>> {
    cfg.validate()?;
    let folds = fold_partition(samples, cfg.folds, cfg.seed)?;
    cf_estimate_with_folds(space, samples, &folds, cfg)
}

/// Cross-fitting estimator on a given partition.
pub fn cf_estimate_with_folds<S: GeodesicSpace + ?Sized>(
    space: &S,
    samples: &[Observation<S::Point>],
    folds: &[Vec<usize>],
    cfg: &EstimatorConfig,
) -> Result<GateEstimate<S::Point>> {
    let n = samples.len();
    let covered: usize = folds.iter().map(Vec::len).sum();
    if covered != n || folds.len() < 2 {
        return Err(Error::Partition(format!("{} folds cover {covered} of {n} units", folds.len())));
    }
    let mut fold_thetas: [Vec<S::Point>; 2] = [Vec::new(), Vec::new()];
    let mut weights = Vec::with_capacity(folds.len());
    let mut propensity = vec![0.0; n];
    for (k, fold) in folds.iter().enumerate() {
        let mut in_fold = vec![false; n];
        fold.iter().for_each(|&i| in_fold[i] = true);
        let train: Vec<Observation<S::Point>> =
            (0..n).filter(|&i| !in_fold[i]).map(|i| samples[i].clone()).collect();
        let held: Vec<Observation<S::Point>> = fold.iter().map(|&i| samples[i].clone()).collect();
        let nuisances = Nuisances::fit(&train, cfg).map_err(|e| fold_error(k, e))?;
        let fitted = FittedValues::predict(space, &held, &nuisances)?;
        for (&i, e) in fold.iter().zip(&fitted.propensity) {
            propensity[i] = *e;
        }
        fold_thetas[0].push(dr_arm(space, &held, &fitted, false, cfg.extension)?);
        fold_thetas[1].push(dr_arm(space, &held, &fitted, true, cfg.extension)?);
        weights.push(fold.len() as f64 / n as f64);
    }
    let [t0, t1] = fold_thetas;
    let theta0 = space.weighted_frechet_mean(&t0, &weights)?;
    let theta1 = space.weighted_frechet_mean(&t1, &weights)?;
    let mut diag = diagnostics(samples, &propensity, cfg);
    diag.folds = Some(folds.len());
    Ok(GateEstimate::assemble(space, theta0, theta1, Method::Cf, diag))
}

fn fold_error(k: usize, e: Error) -> Error {
    match e {
        Error::DegenerateData(m) => Error::DegenerateData(format!("fold {k}: {m}")),
        Error::Estimation(m) => Error::Estimation(format!("fold {k}: {m}")),
        other => other,
    }
}

/// Fit the nuisances on `samples` and run `method`.
pub fn estimate<S: GeodesicSpace + ?Sized>(
    space: &S,
    samples: &[Observation<S::Point>],
    method: Method,
    cfg: &EstimatorConfig,
) -> Result<GateEstimate<S::Point>> {
    cfg.validate()?;
    check_arms(samples)?;
    match method {
        Method::Cf => cf_estimate(space, samples, cfg),
        Method::Ipw => {
            let ps = fit_propensity(samples, cfg)?;
            let e: Vec<f64> = samples.iter().map(|s| ps.predict(&s.x)).collect();
            ipw_estimate(space, samples, &e, cfg)
        }
        Method::Dr | Method::Or => {
            let nuisances = Nuisances::fit(samples, cfg)?;
            let fitted = FittedValues::predict(space, samples, &nuisances)?;
            if method == Method::Dr {
                dr_estimate(space, samples, &fitted, cfg)
            } else {
                or_estimate(space, samples, &fitted, cfg)
            }
        }
    }
}

/// Several methods on one sample, sharing the nuisance fits.
pub fn estimate_many<S: GeodesicSpace + ?Sized>(
    space: &S,
    samples: &[Observation<S::Point>],
    methods: &[Method],
    cfg: &EstimatorConfig,
) -> Result<Vec<GateEstimate<S::Point>>> {
    cfg.validate()?;
    check_arms(samples)?;
    let needs_fits = methods.iter().any(|m| matches!(m, Method::Dr | Method::Or));
    let fitted = if needs_fits {
        let nuisances = Nuisances::fit(samples, cfg)?;
        Some(FittedValues::predict(space, samples, &nuisances)?)
    } else {
        None
    };
    let propensity = match &fitted {
        Some(f) => f.propensity.clone(),
        None if methods.contains(&Method::Ipw) => {
            let ps = fit_propensity(samples, cfg)?;
            samples.iter().map(|s| ps.predict(&s.x)).collect()
        }
        None => Vec::new(),
    };
    methods
        .iter()
        .map(|m| match m {
            Method::Dr => dr_estimate(space, samples, fitted.as_ref().expect("fitted"), cfg),
            Method::Or => or_estimate(space, samples, fitted.as_ref().expect("fitted"), cfg),
            Method::Ipw => ipw_estimate(space, samples, &propensity, cfg),
            Method::Cf => cf_estimate(space, samples, cfg),
        })
        .collect()
}

fn check_arms<P>(samples: &[Observation<P>]) -> Result<()> {
    let (t, c) = arm_counts(samples);
    if t == 0 || c == 0 {
        return Err(Error::DegenerateData(format!(
            "need both treatment arms, found {t} treated and {c} control units"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::euclidean::Interval;

    fn toy() -> Vec<Observation<f64>> {
        let xs = [-0.9, -0.5, -0.2, 0.0, 0.1, 0.3, 0.6, 0.8, -0.7, 0.4, 0.9, -0.1];
        let ts = [false, true, false, true, false, true, true, false, false, true, true, false];
        xs.iter()
            .zip(ts)
            .map(|(x, t)| Observation::new(2.0 + x + if t { 1.0 } else { 0.0 } + 0.1 * x * x, t, vec![*x]))
            .collect()
    }

    #[test]
    fn kappa_values() {
        assert_eq!(kappa(true, true, 0.25), 4.0);
        assert_eq!(kappa(false, false, 0.75), 4.0);
        assert_eq!(kappa(true, false, 0.25), 0.0);
        assert_eq!(kappa(false, true, 0.25), 0.0);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("IPW".parse::<Method>().unwrap(), Method::Ipw);
        assert!("foo".parse::<Method>().is_err());
        assert_eq!(Method::Cf.to_string(), "CF");
    }

    #[test]
    fn folds_are_balanced() {
        let s = toy();
        let folds = fold_partition(&s, 5, 1).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 2, 2, 2]);
        let mut all: Vec<usize> = folds.concat();
        all.sort();
        assert_eq!(all, (0..12).collect::<Vec<_>>());
        assert!(matches!(fold_partition(&s, 7, 1), Err(Error::Partition(_))));
    }

    #[test]
    fn one_arm_is_degenerate() {
        let s: Vec<_> = toy().into_iter().map(|mut o| {
            o.treated = true;
            o
        }).collect();
        let r = estimate(&Interval::real_line(), &s, Method::Dr, &EstimatorConfig::default());
        assert!(matches!(r, Err(Error::DegenerateData(_))));
    }

    #[test]
    fn noiseless_outcomes_with_true_regressions() {
        // Y_i = mu_t(X_i) exactly: every DR geodesic degenerates
        let line = Interval::real_line();
        let s = toy();
        let fitted = FittedValues {
            mu0: s.iter().map(|o| if o.treated { 0.0 } else { o.y }).collect(),
            mu1: s.iter().map(|o| if o.treated { o.y } else { 7.0 }).collect(),
            propensity: vec![0.3; s.len()],
        };
        let est = dr_estimate(&line, &s, &fitted, &EstimatorConfig::default()).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((est.theta0 - mean(&fitted.mu0)).abs() < 1e-12);
        assert!((est.theta1 - mean(&fitted.mu1)).abs() < 1e-12);
        assert!((est.contrast - (est.theta1 - est.theta0).abs()).abs() < 1e-15);
        assert_eq!(est.gate.start, est.theta0);
    }

    #[test]
    fn constant_outcome_regression() {
        let line = Interval::real_line();
        let s = toy();
        let fitted = FittedValues { mu0: vec![1.5; 12], mu1: vec![2.5; 12], propensity: vec![0.5; 12] };
        let est = or_estimate(&line, &s, &fitted, &EstimatorConfig::default()).unwrap();
        assert_eq!((est.theta0, est.theta1), (1.5, 2.5));
    }

    #[test]
    fn ipw_with_unit_extension_is_arm_mean_of_all_outcomes() {
        // e = 1 for treated would give kappa = 1; emulate with propensities
        // where every unit is treated with probability one (unclipped)
        let line = Interval::real_line();
        let s: Vec<_> = toy().into_iter().map(|mut o| {
            o.treated = true;
            o
        }).collect();
        let est = ipw_estimate(&line, &s, &vec![1.0; 12], &EstimatorConfig::default()).unwrap();
        let mean = s.iter().map(|o| o.y).sum::<f64>() / 12.0;
        assert!((est.theta1 - mean).abs() < 1e-12);
    }

    #[test]
    fn cf_with_identical_folds_returns_common_value() {
        let line = Interval::real_line();
        let s: Vec<_> = toy().into_iter().map(|mut o| {
            o.y = 3.0;
            o
        }).collect();
        let est = cf_estimate(&line, &s, &EstimatorConfig { folds: 3, ..Default::default() }).unwrap();
        assert!((est.theta0 - 3.0).abs() < 1e-12 && (est.theta1 - 3.0).abs() < 1e-12);
        assert_eq!(est.diagnostics.folds, Some(3));
    }

    #[test]
    fn theory_flag() {
        let cfg = EstimatorConfig {
            or_features: FeatureMap::Square,
            ps_features: FeatureMap::Square,
            ..Default::default()
        };
        let est = estimate(&Interval::real_line(), &toy(), Method::Dr, &cfg).unwrap();
        assert!(est.diagnostics.theory_unsupported);
    }
}
