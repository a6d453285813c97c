//! Metric-space contract and the geodesic algebra shared by every space.
//!
//! A space exposes the unconstrained curve through two points ([`GeodesicSpace::extend`])
//! together with a feasibility test. Everything else here (boundary search,
//! damped extension past the boundary, composition and reversal of segments)
//! is written once against that contract.

use std::fmt::Debug;

use crate::error::{Error, Result};

/// Default search horizon for boundary hits, as a multiple of `d(a, b)`.
pub const DEFAULT_HORIZON: f64 = 1e6;

/// Relative bisection tolerance on the extension parameter.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// A uniquely geodesic metric space restricted to a closed feasible subset.
pub trait GeodesicSpace: Send + Sync {
    type Point: Clone + Debug + PartialEq + Send + Sync;

    fn name(&self) -> &'static str;

    /// Number of reals in the flattened representation of a point.
    fn dim(&self) -> usize;

    fn distance(&self, a: &Self::Point, b: &Self::Point) -> f64;

    /// Feasibility test with the space's rounding tolerance.
    fn check(&self, p: &Self::Point) -> Result<()>;

    fn is_feasible(&self, p: &Self::Point) -> bool {
        self.check(p).is_ok()
    }

    /// Point at parameter `t` on the unconstrained curve with `a` at 0 and `b`
    /// at 1. May leave the feasible set for `t` outside `[0, 1]`.
    fn extend(&self, a: &Self::Point, b: &Self::Point, t: f64) -> Self::Point;

    /// Largest parameter worth searching for a boundary hit. Beyond it the
    /// extension is declared unbounded if still feasible.
    fn extension_horizon(&self, _a: &Self::Point, _b: &Self::Point) -> f64 {
        DEFAULT_HORIZON
    }

    /// Nearest feasible point.
    fn project(&self, raw: Self::Point) -> Result<Self::Point>;

    /// Minimizer over the feasible set of `sum_i w_i d^2(nu, y_i)`.
    fn weighted_frechet_mean(&self, points: &[Self::Point], weights: &[f64])
        -> Result<Self::Point>;

    fn coordinates(&self, p: &Self::Point) -> Vec<f64>;

    fn from_coordinates(&self, coords: &[f64]) -> Result<Self::Point>;

    /// Unweighted Fréchet mean.
    fn frechet_mean(&self, points: &[Self::Point]) -> Result<Self::Point> {
        let w = vec![1.0; points.len()];
        self.weighted_frechet_mean(points, &w)
    }

    /// Objective `sum_i w_i d^2(nu, y_i)`.
    fn frechet_objective(&self, nu: &Self::Point, points: &[Self::Point], weights: &[f64]) -> f64 {
        points
            .iter()
            .zip(weights)
            .map(|(y, w)| {
                let d = self.distance(nu, y);
                w * d * d
            })
            .sum()
    }
}

/// How geodesics are continued past `b` when the space has a boundary in that
/// direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExtensionRule {
    /// Use the plain extension while it stays feasible; damp with `h(t)` only
    /// once it would cross the boundary.
    #[default]
    DampOnExit,
    /// Damp with `h(t)` whenever a boundary exists in the forward direction,
    /// even if the plain extension would still be feasible.
    AlwaysDamp,
    /// Continue the plain extension and map an infeasible end point to the
    /// nearest feasible point.
    ProjectOnExit,
}

impl ExtensionRule {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtensionRule::DampOnExit => "damp",
            ExtensionRule::AlwaysDamp => "always-damp",
            ExtensionRule::ProjectOnExit => "project",
        }
    }
}

impl std::fmt::Display for ExtensionRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExtensionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "damp" => Ok(ExtensionRule::DampOnExit),
            "always-damp" => Ok(ExtensionRule::AlwaysDamp),
            "project" => Ok(ExtensionRule::ProjectOnExit),
            other => Err(Error::Configuration(format!("unknown extension rule '{other}'"))),
        }
    }
}

/// Result of a forward boundary search along `gamma_{a,b}`.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryHit<P> {
    /// Last feasible point `zeta` on the forward extension and the parameter
    /// `s` at which it sits (so `d(a, zeta) = s * d(a, b)`).
    Hit { zeta: P, param: f64, dist: f64 },
    /// The extension stays feasible up to the search horizon.
    Unbounded,
}

/// Damping map `h(t) = 1 - (1 - d(a,b)/d(a,zeta))^t`.
pub fn damping(t: f64, ratio: f64) -> f64 {
    1.0 - (1.0 - ratio).powf(t)
}

/// Locate the boundary point on the forward extension of `gamma_{a,b}` by
/// bisection on the extension parameter.
pub fn boundary_hit<S: GeodesicSpace + ?Sized>(
    space: &S,
    a: &S::Point,
    b: &S::Point,
) -> Result<BoundaryHit<S::Point>> {
    space.check(a)?;
    space.check(b)?;
    let dab = space.distance(a, b);
    if dab == 0.0 {
        return Err(Error::DegenerateGeodesic);
    }
    match boundary_param(space, a, b) {
        Some(param) => Ok(BoundaryHit::Hit {
            zeta: space.extend(a, b, param),
            param,
            dist: param * dab,
        }),
        None => Ok(BoundaryHit::Unbounded),
    }
}

/// Parameter of the last feasible point on the forward extension, `None` when
/// unbounded. Assumes `a`, `b` feasible and distinct.
fn boundary_param<S: GeodesicSpace + ?Sized>(space: &S, a: &S::Point, b: &S::Point) -> Option<f64> {
    let horizon = space.extension_horizon(a, b);
    let feasible = |t: f64| space.is_feasible(&space.extend(a, b, t));
    // Feasible parameters along a geodesic of a convex set form an interval
    // containing [0, 1]: bracket the exit by doubling, then bisect.
    let (mut lo, mut hi) = (1.0_f64, 2.0_f64.min(horizon));
    while feasible(hi) {
        if hi >= horizon {
            return None;
        }
        lo = hi;
        hi = (2.0 * hi).min(horizon);
    }
    while hi - lo > BOUNDARY_TOL * lo {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Evaluate the (possibly extended) geodesic from `a` to `b` at parameter `t`,
/// using [`ExtensionRule::DampOnExit`].
pub fn geodesic_eval<S: GeodesicSpace + ?Sized>(
    space: &S,
    a: &S::Point,
    b: &S::Point,
    t: f64,
) -> Result<S::Point> {
    geodesic_eval_with(space, a, b, t, ExtensionRule::DampOnExit)
}

/// Evaluate the geodesic from `a` to `b` at `t` under an explicit extension rule.
///
/// `t` in `[0, 1]` gives the point on the connecting geodesic. For `t > 1`
/// the forward extension is used, damped by `h(t)` toward the boundary point
/// `zeta` according to `rule`. For `t < 0` the construction is mirrored: the
/// geodesic is reversed and extended forward by `1 - t`.
pub fn geodesic_eval_with<S: GeodesicSpace + ?Sized>(
    space: &S,
    a: &S::Point,
    b: &S::Point,
    t: f64,
    rule: ExtensionRule,
) -> Result<S::Point> {
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("geodesic parameter {t} is not finite")));
    }
    space.check(a)?;
    space.check(b)?;
    if t == 0.0 || space.distance(a, b) == 0.0 {
        return Ok(a.clone());
    }
    if t == 1.0 {
        return Ok(b.clone());
    }
    if (0.0..=1.0).contains(&t) {
        return space.project(space.extend(a, b, t));
    }
    if t < 0.0 {
        return forward_extension(space, b, a, 1.0 - t, rule);
    }
    forward_extension(space, a, b, t, rule)
}

fn forward_extension<S: GeodesicSpace + ?Sized>(
    space: &S,
    a: &S::Point,
    b: &S::Point,
    t: f64,
    rule: ExtensionRule,
) -> Result<S::Point> {
    if rule != ExtensionRule::AlwaysDamp && t <= space.extension_horizon(a, b) {
        let plain = space.extend(a, b, t);
        if rule == ExtensionRule::ProjectOnExit || space.is_feasible(&plain) {
            return space.project(plain);
        }
    }
    let param = match boundary_param(space, a, b) {
        None => return space.project(space.extend(a, b, t)),
        Some(p) => p,
    };
    if rule == ExtensionRule::DampOnExit && t <= param {
        return space.project(space.extend(a, b, t));
    }
    // gamma_{a,zeta}(u) = gamma_{a,b}(u * param) on the same curve.
    let h = damping(t, 1.0 / param);
    space.project(space.extend(a, b, param * h))
}

/// Scalar factor for geodesic multiplication.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ScalarFactor(f64);

impl ScalarFactor {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.is_finite() {
            Ok(Self(rho))
        } else {
            Err(Error::InvalidArgument(format!("scalar factor {rho} is not finite")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A geodesic identified by its endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSegment<P> {
    pub start: P,
    pub end: P,
}

impl<P: Clone> GeodesicSegment<P> {
    pub fn new(start: P, end: P) -> Self {
        Self { start, end }
    }

    /// `id_a`, the constant geodesic at `a`.
    pub fn identity(a: P) -> Self {
        Self { start: a.clone(), end: a }
    }

    /// `gamma_{b,a}`.
    pub fn reverse(&self) -> Self {
        Self { start: self.end.clone(), end: self.start.clone() }
    }

    /// `gamma_{a,z} (+) gamma_{z,b} = gamma_{a,b}`. Endpoints are matched
    /// within `1e-12` in the space's metric.
    pub fn compose<S>(&self, other: &Self, space: &S) -> Result<Self>
    where
        S: GeodesicSpace<Point = P> + ?Sized,
    {
        let gap = space.distance(&self.end, &other.start);
        if gap > 1e-12 {
            return Err(Error::Composition(format!(
                "end of first segment is {gap:e} away from start of second"
            )));
        }
        Ok(Self { start: self.start.clone(), end: other.end.clone() })
    }

    pub fn is_identity<S>(&self, space: &S) -> bool
    where
        S: GeodesicSpace<Point = P> + ?Sized,
    {
        space.distance(&self.start, &self.end) == 0.0
    }

    pub fn length<S>(&self, space: &S) -> f64
    where
        S: GeodesicSpace<Point = P> + ?Sized,
    {
        space.distance(&self.start, &self.end)
    }

    pub fn eval<S>(&self, space: &S, t: f64) -> Result<P>
    where
        S: GeodesicSpace<Point = P> + ?Sized,
    {
        geodesic_eval(space, &self.start, &self.end, t)
    }

    /// End point of `rho (.) gamma`; `rho (.) id_a = id_a`.
    pub fn scale<S>(&self, space: &S, rho: ScalarFactor) -> Result<P>
    where
        S: GeodesicSpace<Point = P> + ?Sized,
    {
        geodesic_eval(space, &self.start, &self.end, rho.value())
    }
}
