//! GATE for compositional outcomes on the sphere orthant, reported both on the
//! sphere and back on the simplex.
//!
//! cargo run --release --example compositional_gate -- 1000 3

use std::env;

use geodesic_causal::estimators::{estimate_many, EstimatorConfig, Method};
use geodesic_causal::simulation::{compositional_truth, gen_compositional, COMPOSITIONAL_DIM};
use geodesic_causal::spaces::OrthantSphere;
use geodesic_causal::{ExtensionRule, GeodesicSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = env::args().skip(1).collect();
    let n: usize = args.first().map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let seed: u64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(3);

    let space = OrthantSphere::new(COMPOSITIONAL_DIM)?;
    let samples = gen_compositional(n, seed);
    let truth = compositional_truth();
    println!("truth  theta0 {:.4?}  theta1 {:.4?}", truth.theta0.to_simplex(), truth.theta1.to_simplex());
    println!("true contrast {:.4} rad", space.distance(&truth.theta0, &truth.theta1));

    for rule in [ExtensionRule::ProjectOnExit, ExtensionRule::DampOnExit] {
        let cfg = EstimatorConfig { seed, extension: rule, ..Default::default() };
        println!("== extension rule {rule}");
        for e in estimate_many(&space, &samples, &Method::ALL, &cfg)? {
            println!(
                "{:>4}  theta0 {:.4?}  theta1 {:.4?}  contrast {:.4}  error {:.4}",
                e.method.to_string(),
                e.theta0.to_simplex(),
                e.theta1.to_simplex(),
                e.contrast,
                space.distance(&e.theta0, &truth.theta0) + space.distance(&e.theta1, &truth.theta1)
            );
        }
    }
    Ok(())
}
