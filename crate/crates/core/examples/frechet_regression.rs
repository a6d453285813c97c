//! Global Fréchet regression of compositional outcomes on a scalar covariate.
//!
//! cargo run --release --example frechet_regression

use geodesic_causal::frechet::{weighted_frechet_mean, OutcomeModels, WeightedSample};
use geodesic_causal::simulation::{compositional_mean, gen_compositional};
use geodesic_causal::spaces::OrthantSphere;
use geodesic_causal::{FeatureMap, GeodesicSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = OrthantSphere::new(3)?;
    let samples = gen_compositional(800, 42);

    let ys: Vec<_> = samples.iter().map(|s| s.y.clone()).collect();
    let mean = weighted_frechet_mean(&space, &WeightedSample::uniform(ys)?)?;
    println!("marginal Fréchet mean (simplex): {:.4?}", mean.to_simplex());

    for map in [FeatureMap::Identity, FeatureMap::Square] {
        let models = OutcomeModels::fit(&samples, map)?;
        println!("== features {map:?}");
        println!("{:>6} {:>6} {:>10} {:>10}", "arm", "x", "d(fit, m)", "weights>0");
        for treated in [false, true] {
            for x in [-0.8, -0.3, 0.0, 0.4, 0.9] {
                let model = models.arm(treated);
                let fit = model.predict(&space, &[x])?;
                let truth = compositional_mean(treated, x);
                let positive = model.group_weights(&[x])?.iter().filter(|w| **w > 0.0).count();
                println!(
                    "{:>6} {x:>6.2} {:>10.5} {:>6}/{}",
                    u8::from(treated),
                    space.distance(&fit, &truth),
                    positive,
                    model.group_size()
                );
            }
        }
    }
    Ok(())
}
