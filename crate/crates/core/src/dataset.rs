//! CSV ingestion and serialization of observation triples.
//!
//! A file starts with a metadata line such as `#space=covariance;dim=10`,
//! followed by a CSV header row and one row per unit. The first columns hold
//! the outcome, one column (named `treatment` unless the metadata says
//! otherwise) holds the 0/1 treatment, and every remaining column is a
//! covariate.
//!
//! | tag             | outcome columns                                   |
//! |-----------------|---------------------------------------------------|
//! | `euclidean`     | `y`                                               |
//! | `laplacian`     | `y1..y{m(m+1)/2}`, upper triangle by rows         |
//! | `covariance`    | as `laplacian`                                    |
//! | `diagdom`       | as `laplacian`                                    |
//! | `compositional` | `y1..yd`, simplex proportions                     |
//! | `wasserstein`   | `y1..yG`, quantiles at the midpoint grid          |
//!
//! Compositions are read in simplex form and mapped to the sphere by the
//! component-wise square root; they are written back in simplex form.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geodesic::GeodesicSpace;
use crate::observation::Observation;
use crate::spaces::frobenius::{packed_len, DEFAULT_BOUND};
use crate::spaces::{
    FrobeniusSpace, Interval, MatrixKind, OrthantSphere, QuantileFunction, QuantileSpace, SpherePoint, SymMatrix,
};

pub const METADATA_PREFIX: &str = "#space=";
pub const DEFAULT_TREATMENT: &str = "treatment";
const SIMPLEX_TOL: f64 = 1e-6;
const PROJECTION_TOL: f64 = 1e-6;

/// Outcome space named in the metadata line, with its dimension parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceSpec {
    Euclidean { lo: f64, hi: f64 },
    Matrix { dim: usize, kind: MatrixKind },
    Compositional { dim: usize },
    Wasserstein { grid: usize },
}

impl SpaceSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            SpaceSpec::Euclidean { .. } => "euclidean",
            SpaceSpec::Matrix { kind: MatrixKind::Laplacian { .. }, .. } => "laplacian",
            SpaceSpec::Matrix { kind: MatrixKind::Covariance { .. }, .. } => "covariance",
            SpaceSpec::Matrix { kind: MatrixKind::DiagDominant { .. }, .. } => "diagdom",
            SpaceSpec::Compositional { .. } => "compositional",
            SpaceSpec::Wasserstein { .. } => "wasserstein",
        }
    }

    /// Number of outcome columns.
    pub fn outcome_width(&self) -> usize {
        match self {
            SpaceSpec::Euclidean { .. } => 1,
            SpaceSpec::Matrix { dim, .. } => packed_len(*dim),
            SpaceSpec::Compositional { dim } => *dim,
            SpaceSpec::Wasserstein { grid } => *grid,
        }
    }

    pub fn outcome_columns(&self) -> Vec<String> {
        match self {
            SpaceSpec::Euclidean { .. } => vec!["y".into()],
            _ => (1..=self.outcome_width()).map(|k| format!("y{k}")).collect(),
        }
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag())?;
        match self {
            SpaceSpec::Euclidean { lo, hi } => {
                if lo.is_finite() {
                    write!(f, ";lo={lo}")?;
                }
                if hi.is_finite() {
                    write!(f, ";hi={hi}")?;
                }
                Ok(())
            }
            SpaceSpec::Matrix { dim, kind } => {
                write!(f, ";dim={dim}")?;
                let (weight, variance) = match *kind {
                    MatrixKind::Laplacian { max_weight } => (Some(max_weight), None),
                    MatrixKind::Covariance { max_variance } => (None, Some(max_variance)),
                    MatrixKind::DiagDominant { max_weight, max_variance } => (Some(max_weight), Some(max_variance)),
                };
                if let Some(w) = weight.filter(|w| *w != DEFAULT_BOUND) {
                    write!(f, ";weight={w}")?;
                }
                if let Some(v) = variance.filter(|v| *v != DEFAULT_BOUND) {
                    write!(f, ";variance={v}")?;
                }
                Ok(())
            }
            SpaceSpec::Compositional { dim } => write!(f, ";dim={dim}"),
            SpaceSpec::Wasserstein { grid } => write!(f, ";dim={grid}"),
        }
    }
}

/// Parsed `key=value` pairs of a metadata line, the tag excluded.
struct Params(Vec<(String, String)>);

impl Params {
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.iter().find(|(k, _)| k == key) {
            None => Ok(None),
            Some((_, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Configuration(format!("invalid value '{v}' for '{key}'"))),
        }
    }

    fn dim(&self, tag: &str) -> Result<usize> {
        match self.get::<usize>("dim")? {
            Some(d) if d > 0 => Ok(d),
            _ => Err(Error::Configuration(format!("space '{tag}' needs a positive dim=..."))),
        }
    }
}

/// Split `tag;key=value;...` into the tag and its parameters.
fn split_metadata(s: &str) -> Result<(String, Params)> {
    let mut parts = s.trim().split(';').map(str::trim).filter(|p| !p.is_empty());
    let tag = parts.next().ok_or_else(|| Error::Configuration("empty space description".into()))?.to_ascii_lowercase();
    let mut params = Vec::new();
    for p in parts {
        let (k, v) =
            p.split_once('=').ok_or_else(|| Error::Configuration(format!("expected key=value, got '{p}'")))?;
        params.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    Ok((tag, Params(params)))
}

impl FromStr for SpaceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().strip_prefix(METADATA_PREFIX).unwrap_or(s.trim());
        let (tag, params) = split_metadata(s)?;
        let weight = params.get::<f64>("weight")?.unwrap_or(DEFAULT_BOUND);
        let variance = params.get::<f64>("variance")?.unwrap_or(DEFAULT_BOUND);
        let matrix = |kind| -> Result<SpaceSpec> { Ok(SpaceSpec::Matrix { dim: params.dim(&tag)?, kind }) };
        match tag.as_str() {
            "euclidean" => Ok(SpaceSpec::Euclidean {
                lo: params.get("lo")?.unwrap_or(f64::NEG_INFINITY),
                hi: params.get("hi")?.unwrap_or(f64::INFINITY),
            }),
            "laplacian" => matrix(MatrixKind::Laplacian { max_weight: weight }),
            "covariance" => matrix(MatrixKind::Covariance { max_variance: variance }),
            "diagdom" | "diag-dominant" => matrix(MatrixKind::DiagDominant { max_weight: weight, max_variance: variance }),
            "compositional" => Ok(SpaceSpec::Compositional { dim: params.dim(&tag)? }),
            "wasserstein" => Ok(SpaceSpec::Wasserstein { grid: params.dim(&tag)? }),
            other => Err(Error::Configuration(format!("unknown space '{other}'"))),
        }
    }
}

/// Column layout of a dataset file.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub space: SpaceSpec,
    pub treatment: String,
    pub covariates: Vec<String>,
}

impl DatasetHeader {
    pub fn new(space: SpaceSpec, covariates: Vec<String>) -> Self {
        Self { space, treatment: DEFAULT_TREATMENT.into(), covariates }
    }

    /// Covariates named `x1..xp`.
    pub fn numbered(space: SpaceSpec, p: usize) -> Self {
        Self::new(space, (1..=p).map(|k| format!("x{k}")).collect())
    }

    pub fn metadata_line(&self) -> String {
        let mut line = format!("{METADATA_PREFIX}{}", self.space);
        if self.treatment != DEFAULT_TREATMENT {
            line.push_str(&format!(";treatment={}", self.treatment));
        }
        line
    }

    pub fn columns(&self) -> Vec<String> {
        let mut cols = self.space.outcome_columns();
        cols.push(self.treatment.clone());
        cols.extend(self.covariates.iter().cloned());
        cols
    }
}

/// Outcome space with a row encoding.
pub trait OutcomeCodec: GeodesicSpace {
    fn spec(&self) -> SpaceSpec;

    fn encode(&self, p: &Self::Point) -> Vec<f64>;

    /// Validate and convert one row of outcome values; the message is reported
    /// with the row number by the caller.
    fn decode(&self, values: Vec<f64>) -> std::result::Result<Self::Point, String>;
}

impl OutcomeCodec for Interval {
    fn spec(&self) -> SpaceSpec {
        let (lo, hi) = self.bounds();
        SpaceSpec::Euclidean { lo, hi }
    }

    fn encode(&self, p: &f64) -> Vec<f64> {
        vec![*p]
    }

    fn decode(&self, values: Vec<f64>) -> std::result::Result<f64, String> {
        let y = values[0];
        self.check(&y).map_err(|e| e.to_string())?;
        Ok(y)
    }
}

impl OutcomeCodec for FrobeniusSpace {
    fn spec(&self) -> SpaceSpec {
        SpaceSpec::Matrix { dim: self.matrix_dim(), kind: self.kind() }
    }

    fn encode(&self, p: &SymMatrix) -> Vec<f64> {
        p.packed().to_vec()
    }

    fn decode(&self, values: Vec<f64>) -> std::result::Result<SymMatrix, String> {
        let raw = SymMatrix::from_packed(self.matrix_dim(), values).map_err(|e| e.to_string())?;
        if self.is_feasible(&raw) {
            return Ok(raw);
        }
        let projected = self.project_feasible(raw.clone()).map_err(|e| e.to_string())?;
        let gap = self.distance(&raw, &projected);
        if gap > PROJECTION_TOL {
            return Err(format!("matrix lies {gap:.3e} from the feasible set"));
        }
        Ok(projected)
    }
}

impl OutcomeCodec for OrthantSphere {
    fn spec(&self) -> SpaceSpec {
        SpaceSpec::Compositional { dim: self.ambient_dim() }
    }

    fn encode(&self, p: &SpherePoint) -> Vec<f64> {
        p.to_simplex()
    }

    fn decode(&self, values: Vec<f64>) -> std::result::Result<SpherePoint, String> {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(format!("composition entry {v} is not a non-negative number"));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(format!("composition sums to {total}, not 1"));
        }
        SpherePoint::normalized(SpherePoint::from_simplex(&values).coords().to_vec()).map_err(|e| e.to_string())
    }
}

impl OutcomeCodec for QuantileSpace {
    fn spec(&self) -> SpaceSpec {
        SpaceSpec::Wasserstein { grid: self.len() }
    }

    fn encode(&self, p: &QuantileFunction) -> Vec<f64> {
        p.values().to_vec()
    }

    fn decode(&self, values: Vec<f64>) -> std::result::Result<QuantileFunction, String> {
        self.from_coordinates(&values).map_err(|e| e.to_string())
    }
}

/// Observations of one space together with their column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<P> {
    pub header: DatasetHeader,
    pub samples: Vec<Observation<P>>,
}

/// A dataset of any supported space, with the space it was read into.
#[derive(Debug, Clone)]
pub enum AnyDataset {
    Euclidean(Interval, Dataset<f64>),
    Matrix(FrobeniusSpace, Dataset<SymMatrix>),
    Compositional(OrthantSphere, Dataset<SpherePoint>),
    Wasserstein(QuantileSpace, Dataset<QuantileFunction>),
}

/// Run `$body` with `$space` and `$data` bound to the concrete space and
/// dataset of an [`AnyDataset`].
#[macro_export]
macro_rules! with_dataset {
    ($any:expr, |$space:ident, $data:ident| $body:expr) => {
        match $any {
            $crate::dataset::AnyDataset::Euclidean($space, $data) => $body,
            $crate::dataset::AnyDataset::Matrix($space, $data) => $body,
            $crate::dataset::AnyDataset::Compositional($space, $data) => $body,
            $crate::dataset::AnyDataset::Wasserstein($space, $data) => $body,
        }
    };
}

impl AnyDataset {
    pub fn header(&self) -> &DatasetHeader {
        with_dataset!(self, |_s, d| &d.header)
    }

    pub fn len(&self) -> usize {
        with_dataset!(self, |_s, d| d.samples.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_csv(&self) -> Result<String> {
        with_dataset!(self, |s, d| format_dataset(s, &d.header, &d.samples))
    }
}

/// Build the space described by a spec.
pub fn space_for(spec: &SpaceSpec) -> Result<AnyDataset> {
    fn empty<P>(spec: &SpaceSpec) -> Dataset<P> {
        Dataset { header: DatasetHeader::new(spec.clone(), Vec::new()), samples: Vec::new() }
    }
    Ok(match *spec {
        SpaceSpec::Euclidean { lo, hi } => AnyDataset::Euclidean(Interval::new(lo, hi)?, empty(spec)),
        SpaceSpec::Matrix { dim, kind } => AnyDataset::Matrix(FrobeniusSpace::new(dim, kind)?, empty(spec)),
        SpaceSpec::Compositional { dim } => AnyDataset::Compositional(OrthantSphere::new(dim)?, empty(spec)),
        SpaceSpec::Wasserstein { grid } => AnyDataset::Wasserstein(QuantileSpace::new(grid)?, empty(spec)),
    })
}

/// Parse dataset text. `spec` overrides the metadata line; one of the two
/// must be present.
pub fn parse_dataset(text: &str, spec: Option<&SpaceSpec>) -> Result<AnyDataset> {
    let first = text.lines().next().unwrap_or("");
    let (metadata, body, offset) = if first.trim_start().starts_with(METADATA_PREFIX) {
        let rest = text.split_once('\n').map(|(_, r)| r).unwrap_or("");
        (Some(first.trim()), rest, 1)
    } else {
        (None, text, 0)
    };
    let mut treatment = DEFAULT_TREATMENT.to_string();
    let mut file_spec = None;
    if let Some(line) = metadata {
        let (_, params) = split_metadata(line.strip_prefix(METADATA_PREFIX).unwrap_or(line))?;
        if let Some(t) = params.get::<String>("treatment")? {
            treatment = t;
        }
        file_spec = Some(line.parse::<SpaceSpec>()?);
    }
    let spec = spec
        .cloned()
        .or(file_spec)
        .ok_or_else(|| Error::Configuration("no '#space=' metadata line and no space given".into()))?;
    let any = space_for(&spec)?;
    Ok(match any {
        AnyDataset::Euclidean(s, _) => {
            let d = parse_rows(&s, body, offset, &treatment)?;
            AnyDataset::Euclidean(s, d)
        }
        AnyDataset::Matrix(s, _) => {
            let d = parse_rows(&s, body, offset, &treatment)?;
            AnyDataset::Matrix(s, d)
        }
        AnyDataset::Compositional(s, _) => {
            let d = parse_rows(&s, body, offset, &treatment)?;
            AnyDataset::Compositional(s, d)
        }
        AnyDataset::Wasserstein(s, _) => {
            let d = parse_rows(&s, body, offset, &treatment)?;
            AnyDataset::Wasserstein(s, d)
        }
    })
}

pub fn read_dataset(path: impl AsRef<Path>, spec: Option<&SpaceSpec>) -> Result<AnyDataset> {
    parse_dataset(&fs::read_to_string(path)?, spec)
}

fn parse_number(field: &str, row: usize, column: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse { row, message: format!("column '{column}': '{field}' is not a finite number") })
}

/// Parse the CSV part of a file into typed observations. Row numbers in
/// errors are file line numbers.
pub fn parse_rows<S: OutcomeCodec + ?Sized>(
    space: &S,
    body: &str,
    line_offset: usize,
    treatment: &str,
) -> Result<Dataset<S::Point>> {
    let spec = space.spec();
    let width = spec.outcome_width();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(body.as_bytes());
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let header_row = line_offset + 1;
    if names.len() < width + 1 {
        return Err(Error::Parse {
            row: header_row,
            message: format!("expected at least {} columns for space '{}', found {}", width + 1, spec.tag(), names.len()),
        });
    }
    let t_col = names[width..]
        .iter()
        .position(|n| n == treatment)
        .map(|k| k + width)
        .ok_or_else(|| Error::Parse { row: header_row, message: format!("no treatment column '{treatment}'") })?;
    let x_cols: Vec<usize> = (width..names.len()).filter(|&k| k != t_col).collect();
    let header = DatasetHeader {
        space: spec,
        treatment: treatment.to_string(),
        covariates: x_cols.iter().map(|&k| names[k].clone()).collect(),
    };

    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize + line_offset);
            Error::Parse { row, message: e.to_string() }
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize + line_offset);
        if record.len() != names.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        let values =
            (0..width).map(|k| parse_number(&record[k], row, &names[k])).collect::<Result<Vec<f64>>>()?;
        let t = parse_number(&record[t_col], row, treatment)?;
        let treated = if t == 1.0 {
            true
        } else if t == 0.0 {
            false
        } else {
            return Err(Error::Validation { row, message: format!("treatment value {t} is not 0 or 1") });
        };
        let x = x_cols.iter().map(|&k| parse_number(&record[k], row, &names[k])).collect::<Result<Vec<f64>>>()?;
        let y = space.decode(values).map_err(|message| Error::Validation { row, message })?;
        samples.push(Observation::new(y, treated, x));
    }
    Ok(Dataset { header, samples })
}

/// Serialize observations, metadata line and header row included.
pub fn format_dataset<S: OutcomeCodec + ?Sized>(
    space: &S,
    header: &DatasetHeader,
    samples: &[Observation<S::Point>],
) -> Result<String> {
    if header.space != space.spec() {
        return Err(Error::Configuration(format!(
            "header describes '{}' but the space is '{}'",
            header.space,
            space.spec()
        )));
    }
    let mut out = Vec::new();
    writeln!(out, "{}", header.metadata_line())?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header.columns())?;
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != header.covariates.len() {
                return Err(Error::Shape(format!(
                    "sample {i} has {} covariates, header names {}",
                    s.x.len(),
                    header.covariates.len()
                )));
            }
            let mut fields: Vec<String> = space.encode(&s.y).iter().map(f64::to_string).collect();
            fields.push(if s.treated { "1" } else { "0" }.into());
            fields.extend(s.x.iter().map(f64::to_string));
            w.write_record(&fields)?;
        }
        w.flush()?;
    }
    String::from_utf8(out).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Write observations with covariates named `x1..xp`.
pub fn write_dataset<S: OutcomeCodec + ?Sized>(
    space: &S,
    samples: &[Observation<S::Point>],
    path: impl AsRef<Path>,
) -> Result<()> {
    let p = samples.first().map_or(0, |s| s.x.len());
    let header = DatasetHeader::numbered(space.spec(), p);
    fs::write(path, format_dataset(space, &header, samples)?)?;
    Ok(())
}
