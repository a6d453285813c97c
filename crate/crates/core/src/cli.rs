//! The `gci` command line: `simulate`, `estimate`, `hulc` and `selftest`.
//!
//! Flags may also come from a `--config` file of `key=value` lines using the
//! flag names as keys; flags given on the command line win. `GCI_SEED`
//! overrides `--seed` when set.
//!
//! Exit codes: 0 success, 1 self-test failure, 2 configuration or input
//! error, 3 failed simulation replicates, 4 estimation failure, 5 partition
//! failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{self, OutcomeCodec, SpaceSpec};
use crate::error::{Error, Result};
use crate::estimators::{estimate_many, EstimatorConfig, GateEstimate, Method, DEFAULT_EXTENSION, DEFAULT_FOLDS};
use crate::geodesic::{ExtensionRule, GeodesicSpace};
use crate::hulc::{hulc_breaks, hulc_interval, HulcConfig, HulcInterval};
use crate::observation::{arm_counts, Observation};
use crate::propensity::DEFAULT_ETA0;
use crate::simulation::{self, render_table, reports_to_csv, run_scenario, Metric, ScenarioSpace, ScenarioSpec};
use crate::with_dataset;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SELFTEST: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_REPLICATES: i32 = 3;
pub const EXIT_ESTIMATION: i32 = 4;
pub const EXIT_PARTITION: i32 = 5;
pub const SEED_ENV: &str = "GCI_SEED";

#[derive(Debug, Parser)]
#[command(name = "gci", version, about = "Geodesic average treatment effects for metric-space outcomes")]
pub struct Cli {
    /// Worker threads for replicates and splits (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// File of key=value lines supplying flags of the subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte-Carlo study of one simulation design.
    Simulate(SimulateArgs),
    /// Estimate the GATE on a dataset.
    Estimate(EstimateArgs),
    /// HulC confidence interval for the GATE contrast.
    Hulc(HulcArgs),
    /// Quick internal consistency checks.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Spec {
    Correct,
    Wrong,
}

impl Spec {
    fn correct(self) -> bool {
        self == Spec::Correct
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// covariance, compositional or euclidean.
    #[arg(long, default_value = "covariance")]
    pub space: ScenarioSpace,

    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub n: Vec<usize>,

    /// Monte-Carlo replicates per sample size.
    #[arg(long, default_value_t = 100)]
    pub q: usize,

    /// Whether the outcome regression model is correct.
    #[arg(long = "or", value_enum, default_value = "correct")]
    pub or_spec: Spec,

    /// Whether the propensity model is correct.
    #[arg(long = "ps", value_enum, default_value = "correct")]
    pub ps_spec: Spec,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Methods, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "dr,cf,or,ipw")]
    pub methods: Vec<Method>,

    #[arg(long, default_value_t = DEFAULT_ETA0)]
    pub eta0: f64,

    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,

    /// damp, always-damp or project.
    #[arg(long, default_value_t = DEFAULT_EXTENSION)]
    pub extension: ExtensionRule,

    /// Error summary shown in the table: squared or distance.
    #[arg(long, default_value = "squared")]
    pub metric: Metric,

    /// CSV report path.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Aligned text table path.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset CSV file.
    #[arg(long)]
    pub data: PathBuf,

    /// Space description such as `covariance;dim=10`, overriding the file's
    /// metadata line.
    #[arg(long = "space-header")]
    pub space_header: Option<SpaceSpec>,

    #[arg(long, default_value_t = DEFAULT_ETA0)]
    pub eta0: f64,

    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// damp, always-damp or project.
    #[arg(long, default_value_t = DEFAULT_EXTENSION)]
    pub extension: ExtensionRule,

    /// Output CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Where to write diagnostics when estimation fails (default: next to
    /// `--out`).
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Methods, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "dr")]
    pub method: Vec<Method>,
}

#[derive(Debug, Args)]
pub struct HulcArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, default_value = "dr")]
    pub method: Method,

    /// Nominal miscoverage.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Median-bias bound.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DegenerateData(_)
        | Error::Estimation(_)
        | Error::Convergence { .. }
        | Error::Separation
        | Error::DegenerateGeodesic
        | Error::Infeasible(_)
        | Error::Composition(_) => EXIT_ESTIMATION,
        Error::Partition(_) => EXIT_PARTITION,
        _ => EXIT_CONFIG,
    }
}

/// Insert the `--config` file's pairs as flags right after the subcommand,
/// skipping keys that are also given on the command line.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            path = strs.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Configuration(format!("cannot read config file '{path}': {e}")))?;
    let mut extra = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Configuration(format!("{path}:{}: expected key=value", k + 1)))?;
        let flag = format!("--{}", key.trim());
        if strs.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}="))) {
            continue;
        }
        extra.push(OsString::from(flag));
        extra.push(OsString::from(value.trim()));
    }
    let sub = strs
        .iter()
        .position(|a| matches!(a.as_str(), "simulate" | "estimate" | "hulc" | "selftest"))
        .ok_or_else(|| Error::Configuration("no subcommand given".into()))?;
    let mut out = args;
    out.splice(sub + 1..sub + 1, extra);
    Ok(out)
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Configuration(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    run(cli)
}

pub fn run(mut cli: Cli) -> i32 {
    match env_seed() {
        Ok(Some(seed)) => match &mut cli.command {
            Command::Simulate(a) => a.seed = seed,
            Command::Estimate(a) => a.data.seed = seed,
            Command::Hulc(a) => a.data.seed = seed,
            Command::Selftest => {}
        },
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be positive");
            return EXIT_CONFIG;
        }
        pool = pool.num_threads(j);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    pool.install(|| match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Hulc(a) => cmd_hulc(a),
        Command::Selftest => cmd_selftest(),
    })
}

fn fail(e: &Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Configuration(format!("cannot write '{}': {e}", path.display())))
}

pub fn cmd_simulate(a: &SimulateArgs) -> i32 {
    let specs: Vec<ScenarioSpec> = a
        .n
        .iter()
        .map(|&n| ScenarioSpec {
            eta0: a.eta0,
            folds: a.folds,
            extension: a.extension,
            ..ScenarioSpec::new(a.space, n, a.or_spec.correct(), a.ps_spec.correct(), a.q, a.seed)
                .with_methods(&a.methods)
        })
        .collect();
    if let Some(e) = specs.iter().find_map(|s| s.validate().err()) {
        return fail(&e);
    }
    let mut reports = Vec::new();
    for spec in &specs {
        match run_scenario(spec) {
            Ok(r) => reports.push(r),
            Err(e) => return fail(&e),
        }
    }
    let table = render_table(&reports, a.metric);
    print!("{table}");
    let written = a
        .out
        .as_ref()
        .map(|p| write_file(p, &reports_to_csv(&reports)))
        .transpose()
        .and_then(|_| a.table.as_ref().map(|p| write_file(p, &table)).transpose());
    if let Err(e) = written {
        return fail(&e);
    }
    let failures: usize = reports.iter().map(|r| r.failures.len()).sum();
    for r in &reports {
        for (q, msg) in &r.failures {
            eprintln!("n = {}: replicate {q} failed: {msg}", r.spec.n);
        }
    }
    if failures > 0 {
        EXIT_REPLICATES
    } else {
        EXIT_OK
    }
}

impl DataArgs {
    fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig { eta0: self.eta0, folds: self.folds, seed: self.seed, extension: self.extension, ..Default::default() }
    }

    fn diagnostics_path(&self) -> Option<PathBuf> {
        self.diagnostics.clone().or_else(|| {
            self.out.as_ref().map(|p| {
                let mut s = p.clone().into_os_string();
                s.push(".diagnostics.txt");
                PathBuf::from(s)
            })
        })
    }

    /// Report a failure, writing the diagnostics file when one is configured.
    fn fail_with_diagnostics<P>(&self, what: &str, e: &Error, samples: &[Observation<P>]) -> i32 {
        let (treated, control) = arm_counts(samples);
        let mut text = String::new();
        let _ = writeln!(text, "{what} failed: {e}");
        let _ = writeln!(text, "data: {}", self.data.display());
        let _ = writeln!(text, "n: {} treated: {treated} control: {control}", samples.len());
        let _ = writeln!(
            text,
            "eta0: {} folds: {} seed: {} extension: {}",
            self.eta0,
            self.folds,
            self.seed,
            self.extension.as_str()
        );
        eprint!("{text}");
        if let Some(path) = self.diagnostics_path() {
            if let Err(w) = write_file(&path, &text) {
                eprintln!("error: {w}");
            }
        }
        exit_code(e)
    }
}

fn load(a: &DataArgs) -> Result<dataset::AnyDataset> {
    if !(a.eta0 > 0.0 && a.eta0 < 0.5) {
        return Err(Error::Configuration(format!("eta0 = {} must lie in (0, 0.5)", a.eta0)));
    }
    dataset::read_dataset(&a.data, a.space_header.as_ref())
}

/// Columns of the estimate report for a space with the given outcome columns.
fn estimate_columns(outcome: &[String]) -> Vec<String> {
    let mut cols: Vec<String> = [
        "method",
        "contrast",
        "n",
        "n_treated",
        "n_control",
        "min_propensity",
        "max_propensity",
        "max_kappa",
        "folds",
        "theory_unsupported",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for arm in ["theta0", "theta1"] {
        cols.extend(outcome.iter().map(|c| format!("{arm}_{c}")));
    }
    cols
}

/// CSV report of several estimates: a `#space=` line, a header, one row per method.
pub fn estimates_to_csv<S: OutcomeCodec + ?Sized>(space: &S, estimates: &[GateEstimate<S::Point>]) -> String {
    let spec = space.spec();
    let mut out = format!("{}{}\n", dataset::METADATA_PREFIX, spec);
    let _ = writeln!(out, "{}", estimate_columns(&spec.outcome_columns()).join(","));
    for e in estimates {
        let d = &e.diagnostics;
        let mut row = vec![
            e.method.as_str().to_string(),
            e.contrast.to_string(),
            d.n.to_string(),
            d.n_treated.to_string(),
            d.n_control.to_string(),
            d.min_propensity.to_string(),
            d.max_propensity.to_string(),
            d.max_kappa.to_string(),
            d.folds.map_or(String::new(), |k| k.to_string()),
            d.theory_unsupported.to_string(),
        ];
        row.extend(space.encode(&e.theta0).iter().map(f64::to_string));
        row.extend(space.encode(&e.theta1).iter().map(f64::to_string));
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

fn estimate_summary<S: GeodesicSpace + ?Sized>(space: &S, estimates: &[GateEstimate<S::Point>]) -> String {
    let mut out = String::new();
    if let Some(first) = estimates.first() {
        let d = &first.diagnostics;
        let _ = writeln!(out, "space {} n = {} ({} treated, {} control)", space.name(), d.n, d.n_treated, d.n_control);
        let _ = writeln!(out, "propensity range [{:.4}, {:.4}]", d.min_propensity, d.max_propensity);
    }
    for e in estimates {
        let _ = writeln!(out, "{:>4}  d(theta0, theta1) = {:.6}", e.method.to_string(), e.contrast);
    }
    out
}

fn run_estimate<S: OutcomeCodec + ?Sized>(space: &S, samples: &[Observation<S::Point>], a: &EstimateArgs) -> i32 {
    let cfg = a.data.estimator_config();
    if let Err(e) = cfg.validate() {
        return fail(&e);
    }
    let estimates = match estimate_many(space, samples, &a.method, &cfg) {
        Ok(e) => e,
        Err(e) => return a.data.fail_with_diagnostics("estimation", &e, samples),
    };
    print!("{}", estimate_summary(space, &estimates));
    if let Some(path) = &a.data.out {
        if let Err(e) = write_file(path, &estimates_to_csv(space, &estimates)) {
            return fail(&e);
        }
    }
    EXIT_OK
}

pub fn cmd_estimate(a: &EstimateArgs) -> i32 {
    if a.method.is_empty() {
        return fail(&Error::Configuration("no method given".into()));
    }
    match load(&a.data) {
        Ok(ds) => with_dataset!(&ds, |space, d| run_estimate(space, &d.samples, a)),
        Err(e) => fail(&e),
    }
}

/// CSV report of a HulC interval: one header and one data row.
pub fn interval_to_csv(iv: &HulcInterval, cfg: &HulcConfig) -> String {
    let splits: Vec<String> = iv.split_contrasts.iter().map(f64::to_string).collect();
    format!(
        "method,alpha,delta,seed,b,tau,b_star,lo,hi,split_contrasts\n{},{},{},{},{},{},{},{},{},{}\n",
        cfg.method.as_str(),
        cfg.alpha,
        cfg.delta,
        cfg.seed,
        iv.b,
        iv.tau,
        iv.b_star,
        iv.lo,
        iv.hi,
        splits.join(";")
    )
}

fn run_hulc<S: GeodesicSpace + ?Sized>(space: &S, samples: &[Observation<S::Point>], a: &HulcArgs) -> i32 {
    let cfg = HulcConfig {
        alpha: a.alpha,
        delta: a.delta,
        seed: a.data.seed,
        method: a.method,
        estimator: a.data.estimator_config(),
    };
    let iv = match hulc_interval(space, samples, &cfg) {
        Ok(iv) => iv,
        Err(e @ (Error::Configuration(_) | Error::InfeasibleLevel { .. })) => return fail(&e),
        Err(e) => return a.data.fail_with_diagnostics("hulc", &e, samples),
    };
    println!(
        "{} {:.0}% HulC interval for d(theta0, theta1): [{:.6}, {:.6}] from {} splits",
        a.method,
        100.0 * (1.0 - a.alpha),
        iv.lo,
        iv.hi,
        iv.b_star
    );
    if let Some(path) = &a.data.out {
        if let Err(e) = write_file(path, &interval_to_csv(&iv, &cfg)) {
            return fail(&e);
        }
    }
    EXIT_OK
}

pub fn cmd_hulc(a: &HulcArgs) -> i32 {
    let probe = HulcConfig { alpha: a.alpha, delta: a.delta, ..Default::default() };
    if let Err(e) = probe.validate().and_then(|_| hulc_breaks(a.alpha, a.delta).map(|_| ())) {
        return fail(&e);
    }
    match load(&a.data) {
        Ok(ds) => with_dataset!(&ds, |space, d| run_hulc(space, &d.samples, a)),
        Err(e) => fail(&e),
    }
}

/// Checks run by `gci selftest`, as `(name, passed, detail)`.
pub fn selftest_checks() -> Vec<(&'static str, bool, String)> {
    let mut out = Vec::new();

    let breaks = hulc_breaks(0.05, 0.0);
    let ok = matches!(breaks, Ok((6, tau)) if (tau - 0.6).abs() < 1e-12);
    out.push(("hulc breaks at alpha 0.05", ok, format!("{breaks:?}")));

    let space = crate::spaces::Interval::real_line();
    let samples = simulation::gen_euclidean(200, 11);
    let cfg = EstimatorConfig::default();
    let detail = match estimate_many(&space, &samples, &[Method::Dr], &cfg) {
        Ok(est) => {
            let nuis = crate::estimators::Nuisances::fit(&samples, &cfg)
                .and_then(|n| crate::estimators::FittedValues::predict(&space, &samples, &n));
            match nuis {
                Ok(f) => {
                    let aipw = |t: bool| {
                        samples
                            .iter()
                            .enumerate()
                            .map(|(i, s)| {
                                let mu = *f.mu(t).get(i).unwrap_or(&f64::NAN);
                                mu + crate::estimators::kappa(t, s.treated, f.propensity[i]) * (s.y - mu)
                            })
                            .sum::<f64>()
                            / samples.len() as f64
                    };
                    let gap = (est[0].theta1 - aipw(true)).abs().max((est[0].theta0 - aipw(false)).abs());
                    (gap < 1e-8, format!("max gap {gap:.2e}"))
                }
                Err(e) => (false, e.to_string()),
            }
        }
        Err(e) => (false, e.to_string()),
    };
    out.push(("euclidean DR equals AIPW", detail.0, detail.1));

    let sphere = crate::spaces::OrthantSphere::new(3).expect("valid dimension");
    let truth = simulation::compositional_truth();
    let mid = crate::geodesic::geodesic_eval(&sphere, &truth.theta0, &truth.theta1, 0.5);
    let detail = match mid {
        Ok(m) => {
            let gap = (sphere.distance(&truth.theta0, &m) - sphere.distance(&m, &truth.theta1)).abs();
            (gap < 1e-12, format!("midpoint asymmetry {gap:.2e}"))
        }
        Err(e) => (false, e.to_string()),
    };
    out.push(("sphere geodesic midpoint", detail.0, detail.1));

    let samples = simulation::gen_compositional(20, 3);
    let header = dataset::DatasetHeader::numbered(sphere.spec(), 1);
    let detail = dataset::format_dataset(&sphere, &header, &samples)
        .and_then(|text| dataset::parse_dataset(&text, None))
        .map(|ds| match ds {
            dataset::AnyDataset::Compositional(_, d) => {
                let gap = d
                    .samples
                    .iter()
                    .zip(&samples)
                    .map(|(a, b)| sphere.distance(&a.y, &b.y))
                    .fold(0.0, f64::max);
                (gap < 1e-12 && d.samples.len() == samples.len(), format!("max gap {gap:.2e}"))
            }
            _ => (false, "wrong space".to_string()),
        });
    let detail = detail.unwrap_or_else(|e| (false, e.to_string()));
    out.push(("compositional dataset round trip", detail.0, detail.1));
    out
}

pub fn cmd_selftest() -> i32 {
    let checks = selftest_checks();
    for (name, ok, detail) in &checks {
        println!("{} {name} ({detail})", if *ok { "PASS" } else { "FAIL" });
    }
    if checks.iter().all(|c| c.1) {
        EXIT_OK
    } else {
        EXIT_SELFTEST
    }
}
