//! Geodesics and their boundary-aware extension in each outcome space.
//!
//! cargo run --release --example geodesic_extension

use geodesic_causal::geodesic::{boundary_hit, geodesic_eval_with, BoundaryHit, ScalarFactor};
use geodesic_causal::spaces::{FrobeniusSpace, Interval, MatrixKind, OrthantSphere, QuantileSpace, SpherePoint, SymMatrix};
use geodesic_causal::{ExtensionRule, GeodesicSegment, GeodesicSpace};

const TS: [f64; 6] = [-0.5, 0.0, 0.5, 1.0, 2.0, 8.0];
const RULES: [ExtensionRule; 3] = [ExtensionRule::DampOnExit, ExtensionRule::AlwaysDamp, ExtensionRule::ProjectOnExit];

fn show<S: GeodesicSpace>(space: &S, a: &S::Point, b: &S::Point) -> Result<(), Box<dyn std::error::Error>> {
    println!("== {} (d(a, b) = {:.4})", space.name(), space.distance(a, b));
    match boundary_hit(space, a, b)? {
        BoundaryHit::Hit { param, dist, .. } => println!("boundary at t = {param:.4}, d(a, zeta) = {dist:.4}"),
        BoundaryHit::Unbounded => println!("no boundary ahead"),
    }
    for rule in RULES {
        let dists: Vec<String> = TS
            .iter()
            .map(|&t| geodesic_eval_with(space, a, b, t, rule).map(|p| format!("{:8.4}", space.distance(a, &p))))
            .collect::<Result<_, _>>()?;
        println!("{:>12}  d(a, gamma(t)) at t = {TS:?}: {}", rule.as_str(), dists.join(" "));
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    show(&Interval::real_line(), &1.0, &3.0)?;
    show(&Interval::new(0.0, 4.0)?, &1.0, &3.0)?;

    let cov = FrobeniusSpace::new(2, MatrixKind::covariance())?;
    let a = SymMatrix::from_packed(2, vec![2.0, 0.5, 1.0])?;
    let b = SymMatrix::from_packed(2, vec![1.0, 0.0, 0.4])?;
    show(&cov, &a, &b)?;

    let sphere = OrthantSphere::new(3)?;
    let a = SpherePoint::normalized(vec![0.6, 0.6, 0.5])?;
    let b = SpherePoint::normalized(vec![0.3, 0.8, 0.5])?;
    show(&sphere, &a, &b)?;

    let w = QuantileSpace::new(101)?;
    let a = w.from_quantile_fn(|p| p);
    let b = w.from_quantile_fn(|p| 0.5 + 0.5 * p);
    show(&w, &a, &b)?;

    // Segment algebra: reversal, composition and scalar multiples.
    let seg = GeodesicSegment::new(1.0, 3.0);
    let space = Interval::real_line();
    let composed = seg.compose(&GeodesicSegment::new(3.0, 4.5), &space)?;
    println!("== segment algebra on the line");
    println!("reverse of [1, 3]: {:?}", seg.reverse());
    println!("[1, 3] composed with [3, 4.5]: {composed:?}");
    println!("2 x [1, 3] ends at {}", seg.scale(&space, ScalarFactor::new(2.0)?)?);
    Ok(())
}
