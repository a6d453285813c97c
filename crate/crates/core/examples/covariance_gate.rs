//! GATE for covariance-matrix outcomes under the four estimators.
//!
//! cargo run --release --example covariance_gate -- 500 7

use std::env;

use geodesic_causal::estimators::{estimate_many, EstimatorConfig, Method};
use geodesic_causal::simulation::{covariance_truth, gen_covariance, COVARIANCE_DIM};
use geodesic_causal::spaces::{FrobeniusSpace, MatrixKind};
use geodesic_causal::{FeatureMap, GeodesicSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = env::args().skip(1).collect();
    let n: usize = args.first().map(|s| s.parse()).transpose()?.unwrap_or(500);
    let seed: u64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(7);

    let space = FrobeniusSpace::new(COVARIANCE_DIM, MatrixKind::covariance())?;
    let samples = gen_covariance(n, seed);
    let truth = covariance_truth();
    println!("true contrast d_F(theta0, theta1) = {:.4}", space.distance(&truth.theta0, &truth.theta1));

    for (or_ok, ps_ok) in [(true, true), (true, false), (false, true)] {
        let cfg = EstimatorConfig {
            seed,
            or_features: FeatureMap::from_correct(or_ok),
            ps_features: FeatureMap::from_correct(ps_ok),
            ..Default::default()
        };
        println!("== outcome model {}, propensity model {}", ok(or_ok), ok(ps_ok));
        for e in estimate_many(&space, &samples, &Method::ALL, &cfg)? {
            let err0 = space.distance(&e.theta0, &truth.theta0);
            let err1 = space.distance(&e.theta1, &truth.theta1);
            println!(
                "{:>4}  contrast {:8.4}  d(theta0_hat, theta0) {:7.4}  d(theta1_hat, theta1) {:7.4}  max kappa {:.2}",
                e.method.to_string(),
                e.contrast,
                err0,
                err1,
                e.diagnostics.max_kappa
            );
        }
    }
    Ok(())
}

fn ok(correct: bool) -> &'static str {
    if correct {
        "correct"
    } else {
        "misspecified"
    }
}
