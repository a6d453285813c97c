//! Compositional data as the non-negative orthant of the unit sphere.
//!
//! A composition `y` on the simplex maps to `sqrt(y)` on `S^{d-1}_+`; the metric
//! is the great-circle (arc-length) distance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geodesic::GeodesicSpace;

const NORM_TOL: f64 = 1e-10;
const ORTHANT_TOL: f64 = 1e-12;
const MAX_ITERS: usize = 10_000;
const RESTARTS: usize = 5;
const RESTART_SEED: u64 = 0x5eed_f00d;

/// Point on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint(Vec<f64>);

impl SpherePoint {
    /// Wrap coordinates without validation; use [`OrthantSphere::check`] to validate.
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    /// Normalize an arbitrary non-zero vector onto the sphere.
    pub fn normalized(mut coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidArgument("cannot normalize a zero vector".into()));
        }
        coords.iter_mut().for_each(|c| *c /= n);
        Ok(Self(coords))
    }

    /// Square-root map from a composition on the simplex.
    pub fn from_simplex(props: &[f64]) -> Self {
        Self(props.iter().map(|p| p.max(0.0).sqrt()).collect())
    }

    /// Inverse of [`SpherePoint::from_simplex`].
    pub fn to_simplex(&self) -> Vec<f64> {
        self.0.iter().map(|c| c * c).collect()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

/// Tangent vector at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: SpherePoint,
    pub vec: Vec<f64>,
}

impl TangentVector {
    pub fn norm(&self) -> f64 {
        norm(&self.vec)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Great-circle distance between unit vectors. Uses `2 asin(|a - b| / 2)`,
/// which equals `arccos(a'b)` but keeps full precision for nearby points.
fn arc(a: &[f64], b: &[f64]) -> f64 {
    let chord = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    2.0 * (0.5 * chord).min(1.0).asin()
}

/// `S^{d-1}_+ = { z : |z| = 1, z_j >= 0 }` with the arc-length metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrthantSphere {
    ambient: usize,
}

impl OrthantSphere {
    pub fn new(ambient: usize) -> Result<Self> {
        if ambient < 2 {
            return Err(Error::InvalidArgument("sphere needs ambient dimension >= 2".into()));
        }
        Ok(Self { ambient })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    fn same_shape(&self, p: &SpherePoint) -> Result<()> {
        if p.0.len() != self.ambient {
            return Err(Error::Shape(format!(
                "expected {} coordinates, got {}",
                self.ambient,
                p.0.len()
            )));
        }
        Ok(())
    }

    /// `Exp_base(u) = cos(|u|) base + sin(|u|) u / |u|`.
    pub fn exp_map(&self, base: &SpherePoint, u: &[f64]) -> Result<SpherePoint> {
        if u.len() != self.ambient || base.0.len() != self.ambient {
            return Err(Error::Shape("tangent vector dimension mismatch".into()));
        }
        let r = norm(u);
        if r >= std::f64::consts::PI {
            return Err(Error::InvalidArgument(format!("tangent norm {r} >= pi")));
        }
        Ok(exp_raw(&base.0, u))
    }

    /// Inverse of [`OrthantSphere::exp_map`]; undefined at the antipode.
    pub fn log_map(&self, base: &SpherePoint, q: &SpherePoint) -> Result<TangentVector> {
        self.same_shape(base)?;
        self.same_shape(q)?;
        let theta = arc(&base.0, &q.0);
        if (std::f64::consts::PI - theta) < 1e-12 {
            return Err(Error::InvalidArgument("log map undefined at the antipode".into()));
        }
        Ok(TangentVector { base: base.clone(), vec: log_raw(&base.0, &q.0) })
    }

    /// Nearest orthant point; with no positive coordinate that is the basis
    /// vector of the largest one.
    fn clamp_to_orthant(&self, mut coords: Vec<f64>) -> Result<SpherePoint> {
        if !coords.is_empty() && coords.iter().all(|c| *c <= 0.0) {
            let j = (0..coords.len()).max_by(|&i, &k| coords[i].total_cmp(&coords[k])).unwrap_or(0);
            coords.iter_mut().for_each(|c| *c = 0.0);
            coords[j] = 1.0;
            return Ok(SpherePoint(coords));
        }
        coords.iter_mut().for_each(|c| {
            if *c < 0.0 {
                *c = 0.0
            }
        });
        SpherePoint::normalized(coords)
    }

    fn descend(&self, start: SpherePoint, points: &[SpherePoint], weights: &[f64]) -> Descent {
        let abs_total: f64 = weights.iter().map(|w| w.abs()).sum();
        let total: f64 = weights.iter().sum();
        // Karcher step 1/(2W) is exact in flat space; fall back to the absolute mass.
        let base_step = 0.5 / if total > 0.0 { total } else { abs_total };
        let objective = |p: &[f64]| -> f64 {
            points.iter().zip(weights).map(|(y, w)| w * arc(p, &y.0).powi(2)).sum()
        };
        let mut x = start.0;
        let mut fx = objective(&x);
        let mut trace = vec![fx];
        for iter in 0..MAX_ITERS {
            // negative Riemannian gradient / 2 = sum_i w_i Log_x(y_i)
            let mut dir = vec![0.0; self.ambient];
            for (y, w) in points.iter().zip(weights) {
                if *w == 0.0 {
                    continue;
                }
                accumulate_log(&mut dir, &x, &y.0, *w);
            }
            let gnorm = norm(&dir);
            if gnorm * base_step < 1e-14 {
                return Descent { point: x, objective: fx, iterations: iter, converged: true, trace };
            }
            let mut step = base_step;
            let mut accepted = None;
            while step * gnorm > 1e-16 {
                let u: Vec<f64> = dir.iter().map(|d| 2.0 * step * d).collect();
                let cand = exp_raw(&x, &u).0;
                let cand = match self.clamp_to_orthant(cand) {
                    Ok(p) => p.0,
                    Err(_) => break,
                };
                let fc = objective(&cand);
                if fc <= fx - 1e-4 * step * gnorm * gnorm {
                    accepted = Some((cand, fc));
                    break;
                }
                step *= 0.5;
            }
            match accepted {
                None => {
                    return Descent { point: x, objective: fx, iterations: iter, converged: true, trace };
                }
                Some((cand, fc)) => {
                    let decrease = fx - fc;
                    x = cand;
                    fx = fc;
                    trace.push(fx);
                    if decrease <= 1e-15 * (1.0 + fx.abs()) {
                        return Descent {
                            point: x,
                            objective: fx,
                            iterations: iter + 1,
                            converged: true,
                            trace,
                        };
                    }
                }
            }
        }
        Descent { point: x, objective: fx, iterations: MAX_ITERS, converged: false, trace }
    }

    /// Normalized weighted average of the points, clamped to the orthant.
    /// Only used when the total weight is positive.
    fn extrinsic_start(&self, points: &[SpherePoint], weights: &[f64]) -> Option<SpherePoint> {
        if weights.iter().sum::<f64>() <= 0.0 {
            return None;
        }
        let mut avg = vec![0.0; self.ambient];
        for (p, w) in points.iter().zip(weights) {
            avg.iter_mut().zip(&p.0).for_each(|(a, c)| *a += w * c);
        }
        self.clamp_to_orthant(avg).ok()
    }

    /// Solve the weighted Fréchet mean problem and return the full solver
    /// record of the best run.
    pub fn frechet_descent(&self, points: &[SpherePoint], weights: &[f64]) -> Result<Descent> {
        crate::frechet::validate_weights(points.len(), weights)?;
        for p in points {
            self.same_shape(p)?;
        }
        let start = match self.extrinsic_start(points, weights) {
            Some(p) => p,
            None => {
                let objective = |p: &SpherePoint| self.frechet_objective(p, points, weights);
                points
                    .iter()
                    .zip(weights)
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(p, _)| (objective(p), p))
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .map(|(_, p)| p.clone())
                    .expect("validated weights have a nonzero entry")
            }
        };
        let mut best = self.descend(start, points, weights);
        if weights.iter().any(|w| *w < 0.0) {
            // possibly non-convex: best of several random starts
            let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
            for _ in 0..RESTARTS {
                let raw: Vec<f64> = (0..self.ambient).map(|_| rng.random::<f64>() + 1e-3).collect();
                let start = SpherePoint::normalized(raw)?;
                let run = self.descend(start, points, weights);
                if run.objective < best.objective {
                    best = run;
                }
            }
        }
        if !best.converged {
            return Err(Error::Convergence {
                iterations: best.iterations,
                objective: best.objective,
                best: best.point,
            });
        }
        Ok(best)
    }
}

/// Record of one Riemannian gradient descent run.
#[derive(Debug, Clone)]
pub struct Descent {
    pub point: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted step, starting point first.
    pub trace: Vec<f64>,
}

fn exp_raw(base: &[f64], u: &[f64]) -> SpherePoint {
    let r = norm(u);
    if r == 0.0 {
        return SpherePoint(base.to_vec());
    }
    let (s, c) = r.sin_cos();
    let mut out: Vec<f64> = base.iter().zip(u).map(|(b, ui)| c * b + s * ui / r).collect();
    let n = norm(&out);
    out.iter_mut().for_each(|v| *v /= n);
    SpherePoint(out)
}

/// `acc += w * Log_base(q)` without allocating.
fn accumulate_log(acc: &mut [f64], base: &[f64], q: &[f64], w: f64) {
    let theta = arc(base, q);
    if theta == 0.0 {
        return;
    }
    let ip = dot(base, q);
    let vn = q.iter().zip(base).map(|(qi, bi)| (qi - ip * bi).powi(2)).sum::<f64>().sqrt();
    if vn == 0.0 {
        return;
    }
    let scale = w * theta / vn;
    for ((a, qi), bi) in acc.iter_mut().zip(q).zip(base) {
        *a += scale * (qi - ip * bi);
    }
}

fn log_raw(base: &[f64], q: &[f64]) -> Vec<f64> {
    let theta = arc(base, q);
    let ip = dot(base, q);
    let mut v: Vec<f64> = q.iter().zip(base).map(|(qi, bi)| qi - ip * bi).collect();
    let vn = norm(&v);
    if vn == 0.0 || theta == 0.0 {
        return vec![0.0; base.len()];
    }
    v.iter_mut().for_each(|x| *x *= theta / vn);
    v
}

impl GeodesicSpace for OrthantSphere {
    type Point = SpherePoint;

    fn name(&self) -> &'static str {
        "compositional"
    }

    fn dim(&self) -> usize {
        self.ambient
    }

    fn distance(&self, a: &SpherePoint, b: &SpherePoint) -> f64 {
        arc(&a.0, &b.0)
    }

    fn check(&self, p: &SpherePoint) -> Result<()> {
        self.same_shape(p)?;
        if p.0.iter().any(|c| !c.is_finite()) {
            return Err(Error::Infeasible("non-finite coordinate".into()));
        }
        let n = norm(&p.0);
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Infeasible(format!("norm {n} is not 1")));
        }
        if let Some(c) = p.0.iter().find(|c| **c < -ORTHANT_TOL) {
            return Err(Error::Infeasible(format!("coordinate {c} outside the orthant")));
        }
        Ok(())
    }

    /// `cos(theta t) a + sin(theta t) (b - (a'b) a) / |b - (a'b) a|`, valid for all `t`.
    fn extend(&self, a: &SpherePoint, b: &SpherePoint, t: f64) -> SpherePoint {
        let l = log_raw(&a.0, &b.0);
        let u: Vec<f64> = l.iter().map(|x| t * x).collect();
        exp_raw(&a.0, &u)
    }

    /// Half a turn from `a` reaches `-a`, which always leaves the orthant.
    fn extension_horizon(&self, a: &SpherePoint, b: &SpherePoint) -> f64 {
        std::f64::consts::PI / arc(&a.0, &b.0)
    }

    fn project(&self, raw: SpherePoint) -> Result<SpherePoint> {
        self.same_shape(&raw)?;
        if raw.0.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        self.clamp_to_orthant(raw.0)
    }

    fn weighted_frechet_mean(&self, points: &[SpherePoint], weights: &[f64]) -> Result<SpherePoint> {
        self.frechet_descent(points, weights).map(|d| SpherePoint(d.point))
    }

    fn coordinates(&self, p: &SpherePoint) -> Vec<f64> {
        p.0.clone()
    }

    fn from_coordinates(&self, coords: &[f64]) -> Result<SpherePoint> {
        let p = SpherePoint(coords.to_vec());
        self.check(&p)?;
        Ok(p)
    }
}
