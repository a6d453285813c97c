//! GATE for distribution-valued outcomes in the 1-D Wasserstein space.
//!
//! Each unit's outcome is a normal distribution whose location and scale
//! depend on treatment and a covariate. Fréchet means are averages of
//! quantile functions, so the true mean outcome of arm `t` is
//! `N(1 + t, (1 + t/2)^2)`.
//!
//! cargo run --release --example wasserstein_gate -- 600 5

use std::env;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use geodesic_causal::estimators::{estimate_many, EstimatorConfig, Method};
use geodesic_causal::propensity::expit;
use geodesic_causal::spaces::{QuantileFunction, QuantileSpace};
use geodesic_causal::{GeodesicSpace, Observation};

fn normal_quantiles(space: &QuantileSpace, mean: f64, sd: f64) -> QuantileFunction {
    let z = Normal::new(0.0, 1.0).expect("standard normal");
    space.from_quantile_fn(|p| mean + sd * z.inverse_cdf(p))
}

fn generate(space: &QuantileSpace, n: usize, seed: u64) -> Vec<Observation<QuantileFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..=1.0);
            let treated = rng.random::<f64>() < expit(0.75 * x);
            let t = if treated { 1.0 } else { 0.0 };
            let mean = 1.0 + t + 0.5 * x + rng.random_range(-0.3..=0.3);
            let sd = 1.0 + 0.5 * t + 0.3 * x + rng.random_range(-0.1..=0.1);
            Observation::new(normal_quantiles(space, mean, sd), treated, vec![x])
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = env::args().skip(1).collect();
    let n: usize = args.first().map(|s| s.parse()).transpose()?.unwrap_or(600);
    let seed: u64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(5);

    let space = QuantileSpace::new(101)?;
    let samples = generate(&space, n, seed);
    let theta0 = normal_quantiles(&space, 1.0, 1.0);
    let theta1 = normal_quantiles(&space, 2.0, 1.5);
    println!("true contrast d_W(theta0, theta1) = {:.4}", space.distance(&theta0, &theta1));

    let cfg = EstimatorConfig { seed, ..Default::default() };
    for e in estimate_many(&space, &samples, &Method::ALL, &cfg)? {
        let median = |q: &QuantileFunction| q.values()[q.values().len() / 2];
        println!(
            "{:>4}  contrast {:.4}  medians ({:.3}, {:.3})  errors ({:.4}, {:.4})",
            e.method.to_string(),
            e.contrast,
            median(&e.theta0),
            median(&e.theta1),
            space.distance(&e.theta0, &theta0),
            space.distance(&e.theta1, &theta1)
        );
    }
    Ok(())
}
