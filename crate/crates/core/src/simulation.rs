//! Data generators for the simulation designs, the ASE metric and a
//! Monte-Carlo harness producing ASE tables.
//!
//! Both designs draw `X ~ U[-1, 1]` and `T ~ Bernoulli(expit(0.75 X))`.
//! Misspecification replaces `X` by `X^2` in the outcome regression and/or the
//! propensity model.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{estimate_many, EstimatorConfig, Method};
use crate::geodesic::{ExtensionRule, GeodesicSpace};
use crate::observation::{FeatureMap, Observation};
use crate::propensity::expit;
use crate::spaces::euclidean::Interval;
use crate::spaces::frobenius::{FrobeniusSpace, MatrixKind, SymMatrix};
use crate::spaces::sphere::{OrthantSphere, SpherePoint};

pub const COVARIANCE_DIM: usize = 10;
pub const COMPOSITIONAL_DIM: usize = 3;
const NOISE: f64 = 0.1;
const PS_SLOPE: f64 = 0.75;
/// Offsets the cross-fitting fold stream from the data stream of a replicate.
const FOLD_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

fn covariate_and_treatment(rng: &mut ChaCha8Rng) -> (f64, bool) {
    let x: f64 = rng.random_range(-1.0..=1.0);
    let t = rng.random::<f64>() < expit(PS_SLOPE * x);
    (x, t)
}

/// Covariance outcome: lower-triangle entries `T + X + 2 + eps`, diagonal
/// equal to the off-diagonal row sums. `eps` is called once per strictly lower
/// entry in row-major order.
pub fn covariance_outcome(treated: bool, x: f64, m: usize, mut eps: impl FnMut() -> f64) -> SymMatrix {
    let base = f64::from(u8::from(treated)) + x + 2.0;
    let mut full = vec![vec![0.0; m]; m];
    for j in 1..m {
        for k in 0..j {
            let v = base + eps();
            full[j][k] = v;
            full[k][j] = v;
        }
    }
    for j in 0..m {
        full[j][j] = (0..m).filter(|&k| k != j).map(|k| full[j][k]).sum();
    }
    SymMatrix::from_fn(m, |j, k| full[j][k])
}

/// `n` draws from the covariance design with `m = 10`.
pub fn gen_covariance(n: usize, seed: u64) -> Vec<Observation<SymMatrix>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (x, t) = covariate_and_treatment(&mut rng);
            let y = covariance_outcome(t, x, COVARIANCE_DIM, || rng.random_range(-NOISE..=NOISE));
            Observation::new(y, t, vec![x])
        })
        .collect()
}

/// Conditional Fréchet mean `m_t(x)` of the compositional design.
pub fn compositional_mean(treated: bool, x: f64) -> SpherePoint {
    let phi = PI * (x + 2.0) / 8.0;
    let (s, c) = phi.sin_cos();
    let r3 = 3f64.sqrt() / 2.0;
    if treated {
        SpherePoint::new(vec![c, r3 * s, 0.5 * s])
    } else {
        SpherePoint::new(vec![c, 0.5 * s, r3 * s])
    }
}

/// Orthonormal tangent basis at `m_t(x)`.
pub fn compositional_basis(treated: bool, x: f64) -> [Vec<f64>; 2] {
    let phi = PI * (x + 2.0) / 8.0;
    let (s, c) = phi.sin_cos();
    let r3 = 3f64.sqrt() / 2.0;
    if treated {
        [vec![s, -r3 * c, -0.5 * c], vec![0.0, 0.5, -r3]]
    } else {
        [vec![s, -0.5 * c, -r3 * c], vec![0.0, r3, -0.5]]
    }
}

/// `Exp_{m_t(x)}(z1 e1 + z2 e2)`.
pub fn compositional_outcome(treated: bool, x: f64, z1: f64, z2: f64) -> SpherePoint {
    let m = compositional_mean(treated, x);
    let [e1, e2] = compositional_basis(treated, x);
    let u: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| z1 * a + z2 * b).collect();
    OrthantSphere::new(COMPOSITIONAL_DIM)
        .expect("valid dimension")
        .exp_map(&m, &u)
        .expect("tangent noise is small")
}

/// `n` draws from the compositional design on the positive orthant of S^2.
pub fn gen_compositional(n: usize, seed: u64) -> Vec<Observation<SpherePoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (x, t) = covariate_and_treatment(&mut rng);
            let z1 = rng.random_range(-NOISE..=NOISE);
            let z2 = rng.random_range(-NOISE..=NOISE);
            Observation::new(compositional_outcome(t, x, z1, z2), t, vec![x])
        })
        .collect()
}

/// Real-valued test design `Y = T + X + 2 + eps`, `eps ~ U[-1, 1]`; the
/// average treatment effect is 1.
pub fn gen_euclidean(n: usize, seed: u64) -> Vec<Observation<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (x, t) = covariate_and_treatment(&mut rng);
            let y = f64::from(u8::from(t)) + x + 2.0 + rng.random_range(-1.0..=1.0);
            Observation::new(y, t, vec![x])
        })
        .collect()
}

/// True potential-outcome means.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthPair<P> {
    pub theta0: P,
    pub theta1: P,
}

pub fn covariance_truth() -> TruthPair<SymMatrix> {
    let m = COVARIANCE_DIM;
    let make = |off: f64| SymMatrix::from_fn(m, |j, k| if j == k { off * (m - 1) as f64 } else { off });
    TruthPair { theta0: make(2.0), theta1: make(3.0) }
}

pub fn compositional_truth() -> TruthPair<SpherePoint> {
    let a = FRAC_1_SQRT_2;
    let b = 2f64.sqrt() / 4.0;
    let c = 6f64.sqrt() / 4.0;
    TruthPair { theta0: SpherePoint::new(vec![a, b, c]), theta1: SpherePoint::new(vec![a, c, b]) }
}

pub fn euclidean_truth() -> TruthPair<f64> {
    TruthPair { theta0: 2.0, theta1: 3.0 }
}

/// Per-run `d^2(theta0_hat, theta0) + d^2(theta1_hat, theta1)`.
pub fn squared_error<S: GeodesicSpace + ?Sized>(
    space: &S,
    theta0: &S::Point,
    theta1: &S::Point,
    truth: &TruthPair<S::Point>,
) -> f64 {
    space.distance(theta0, &truth.theta0).powi(2) + space.distance(theta1, &truth.theta1).powi(2)
}

/// Average squared error over runs of `(theta0_hat, theta1_hat)`.
pub fn ase<S: GeodesicSpace + ?Sized>(
    space: &S,
    estimates: &[(S::Point, S::Point)],
    truth: &TruthPair<S::Point>,
) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::Configuration("ASE needs at least one run".into()));
    }
    for p in [&truth.theta0, &truth.theta1] {
        space
            .check(p)
            .map_err(|e| Error::Configuration(format!("truth is not a point of the {} space: {e}", space.name())))?;
    }
    let total: f64 = estimates.iter().map(|(a, b)| squared_error(space, a, b, truth)).sum();
    Ok(total / estimates.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioSpace {
    Covariance,
    Compositional,
    Euclidean,
}

impl ScenarioSpace {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioSpace::Covariance => "covariance",
            ScenarioSpace::Compositional => "compositional",
            ScenarioSpace::Euclidean => "euclidean",
        }
    }
}

impl fmt::Display for ScenarioSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "covariance" => Ok(ScenarioSpace::Covariance),
            "compositional" => Ok(ScenarioSpace::Compositional),
            "euclidean" => Ok(ScenarioSpace::Euclidean),
            other => Err(Error::Configuration(format!("unknown simulation space '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub space: ScenarioSpace,
    pub n: usize,
    pub or_correct: bool,
    pub ps_correct: bool,
    pub q: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub eta0: f64,
    pub folds: usize,
    pub extension: ExtensionRule,
}

impl ScenarioSpec {
    pub fn new(space: ScenarioSpace, n: usize, or_correct: bool, ps_correct: bool, q: usize, seed: u64) -> Self {
        let defaults = EstimatorConfig::default();
        Self {
            space,
            n,
            or_correct,
            ps_correct,
            q,
            seed,
            methods: Method::ALL.to_vec(),
            eta0: defaults.eta0,
            folds: defaults.folds,
            extension: defaults.extension,
        }
    }

    pub fn with_methods(mut self, methods: &[Method]) -> Self {
        self.methods = methods.to_vec();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 20 {
            return Err(Error::Configuration(format!("n = {} must be at least 20", self.n)));
        }
        if self.q < 1 {
            return Err(Error::Configuration("q must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Configuration("no estimation methods selected".into()));
        }
        self.estimator_config(self.seed).validate()
    }

    fn estimator_config(&self, seed: u64) -> EstimatorConfig {
        EstimatorConfig {
            eta0: self.eta0,
            folds: self.folds,
            seed,
            or_features: FeatureMap::from_correct(self.or_correct),
            ps_features: FeatureMap::from_correct(self.ps_correct),
            extension: self.extension,
        }
    }

    pub fn replicate_seed(&self, q: usize) -> u64 {
        self.seed.wrapping_add(q as u64)
    }
}

/// Per-method Monte-Carlo summary. `ase` averages the per-run sums
/// `d^2(theta0_hat, theta0) + d^2(theta1_hat, theta1)`; `aed` averages the
/// unsquared sums `d(theta0_hat, theta0) + d(theta1_hat, theta1)`. The `sd`
/// fields are across-run sample standard deviations of those sums.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub ase: f64,
    pub sd: f64,
    pub aed: f64,
    pub aed_sd: f64,
}

/// Which error summary a table shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Squared,
    Distance,
}

impl Metric {
    pub fn pick(self, s: &MethodSummary) -> (f64, f64) {
        match self {
            Metric::Squared => (s.ase, s.sd),
            Metric::Distance => (s.aed, s.aed_sd),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "squared" | "ase" => Ok(Metric::Squared),
            "distance" | "aed" => Ok(Metric::Distance),
            other => Err(Error::Configuration(format!("unknown metric '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub spec: ScenarioSpec,
    pub summaries: Vec<MethodSummary>,
    /// Failed replicates as `(q, message)`; excluded from every summary.
    pub failures: Vec<(usize, String)>,
    pub theory_unsupported: bool,
}

fn mark(correct: bool) -> &'static str {
    if correct {
        "correct"
    } else {
        "wrong"
    }
}

impl ScenarioReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn ase(&self, method: Method) -> Option<f64> {
        self.summary(method).map(|s| s.ase)
    }

    pub fn aed(&self, method: Method) -> Option<f64> {
        self.summary(method).map(|s| s.aed)
    }

    pub const CSV_HEADER: &'static str =
        "space,n,or,ps,q,seed,extension,method,ase,sd,aed,aed_sd,failures,theory_unsupported";

    /// One CSV line per method, without header.
    pub fn csv_rows(&self) -> String {
        let s = &self.spec;
        let mut out = String::new();
        for m in &self.summaries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.space,
                s.n,
                mark(s.or_correct),
                mark(s.ps_correct),
                s.q,
                s.seed,
                s.extension.as_str(),
                m.method.as_str(),
                m.ase,
                m.sd,
                m.aed,
                m.aed_sd,
                self.failures.len(),
                self.theory_unsupported
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}", Self::CSV_HEADER, self.csv_rows())
    }
}

/// CSV of several reports under one header.
pub fn reports_to_csv(reports: &[ScenarioReport]) -> String {
    let mut out = format!("{}\n", ScenarioReport::CSV_HEADER);
    for r in reports {
        out.push_str(&r.csv_rows());
    }
    out
}

/// Aligned text table: one row per report, one `error (sd)` cell per method.
pub fn render_table(reports: &[ScenarioReport], metric: Metric) -> String {
    let mut methods: Vec<Method> = reports.iter().flat_map(|r| r.summaries.iter().map(|s| s.method)).collect();
    methods.sort();
    methods.dedup();
    let digits = |v: f64| if v.abs() >= 0.1 { 3 } else { 4 };
    let mut rows: Vec<Vec<String>> = vec![["space", "n", "OR", "PS"]
        .iter()
        .map(|s| s.to_string())
        .chain(methods.iter().map(|m| m.to_string()))
        .chain(std::iter::once("failed".to_string()))
        .collect()];
    let tick = |c: bool| if c { "+" } else { "-" }.to_string();
    for r in reports {
        let mut row = vec![r.spec.space.to_string(), r.spec.n.to_string(), tick(r.spec.or_correct), tick(r.spec.ps_correct)];
        for m in &methods {
            row.push(match r.summary(*m) {
                Some(s) => {
                    let (v, sd) = metric.pick(s);
                    format!("{:.*} ({:.*})", digits(v), v, digits(sd), sd)
                }
                None => "-".into(),
            });
        }
        row.push(r.failures.len().to_string());
        rows.push(row);
    }
    let widths: Vec<usize> =
        (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &rows {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(cell, w)| format!("{cell:>w$}")).collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

/// Per-method `(d0, d1)` of one replicate, or its error message.
type Replicate = std::result::Result<Vec<(f64, f64)>, String>;

/// Monte-Carlo loop for an arbitrary space and generator.
pub fn run_with<S, G>(space: &S, generate: G, truth: &TruthPair<S::Point>, spec: &ScenarioSpec) -> Result<ScenarioReport>
where
    S: GeodesicSpace + ?Sized,
    G: Fn(usize, u64) -> Vec<Observation<S::Point>> + Sync,
{
    spec.validate()?;
    let replicates: Vec<Replicate> = (0..spec.q)
        .into_par_iter()
        .map(|q| {
            let seed = spec.replicate_seed(q);
            let samples = generate(spec.n, seed);
            let cfg = spec.estimator_config(seed ^ FOLD_STREAM);
            estimate_many(space, &samples, &spec.methods, &cfg)
                .map(|ests| {
                    ests.iter()
                        .map(|e| (space.distance(&e.theta0, &truth.theta0), space.distance(&e.theta1, &truth.theta1)))
                        .collect()
                })
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut failures = Vec::new();
    let mut errors: Vec<Vec<(f64, f64)>> = vec![Vec::new(); spec.methods.len()];
    for (q, r) in replicates.into_iter().enumerate() {
        match r {
            Ok(v) => v.into_iter().enumerate().for_each(|(k, e)| errors[k].push(e)),
            Err(msg) => failures.push((q, msg)),
        }
    }
    let summaries = spec
        .methods
        .iter()
        .zip(&errors)
        .map(|(m, e)| {
            let squared: Vec<f64> = e.iter().map(|(a, b)| a * a + b * b).collect();
            let plain: Vec<f64> = e.iter().map(|(a, b)| a + b).collect();
            let (ase, sd) = mean_sd(&squared);
            let (aed, aed_sd) = mean_sd(&plain);
            MethodSummary { method: *m, ase, sd, aed, aed_sd }
        })
        .collect();
    let theory_unsupported = spec.estimator_config(spec.seed).theory_unsupported();
    Ok(ScenarioReport { spec: spec.clone(), summaries, failures, theory_unsupported })
}

/// Mean and sample standard deviation (`n - 1` divisor; 0 for one value).
fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Run a scenario of one of the built-in designs.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioReport> {
    match spec.space {
        ScenarioSpace::Covariance => {
            let space = FrobeniusSpace::new(COVARIANCE_DIM, MatrixKind::covariance())?;
            run_with(&space, gen_covariance, &covariance_truth(), spec)
        }
        ScenarioSpace::Compositional => {
            let space = OrthantSphere::new(COMPOSITIONAL_DIM)?;
            run_with(&space, gen_compositional, &compositional_truth(), spec)
        }
        ScenarioSpace::Euclidean => run_with(&Interval::real_line(), gen_euclidean, &euclidean_truth(), spec),
    }
}
