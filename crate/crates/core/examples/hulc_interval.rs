//! HulC confidence intervals for the GATE contrast.
//!
//! cargo run --release --example hulc_interval

use geodesic_causal::hulc::{hulc_breaks, hulc_interval, HulcConfig};
use geodesic_causal::simulation::{compositional_truth, gen_compositional, gen_euclidean};
use geodesic_causal::spaces::{Interval, OrthantSphere};
use geodesic_causal::{GeodesicSpace, Method};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (alpha, delta) in [(0.05, 0.0), (0.1, 0.0), (0.05, 0.1)] {
        let (b, tau) = hulc_breaks(alpha, delta)?;
        println!("alpha {alpha:<5} delta {delta:<4} -> B = {b}, tau = {tau:.4}");
    }

    // Euclidean outcomes with a true effect of 1.
    let line = Interval::real_line();
    let reps = 40;
    let mut covered = 0;
    for seed in 0..reps {
        let samples = gen_euclidean(600, 1000 + seed);
        let cfg = HulcConfig { seed, ..Default::default() };
        let iv = hulc_interval(&line, &samples, &cfg)?;
        if iv.contains(1.0) {
            covered += 1;
        }
        if seed < 3 {
            println!("seed {seed}: [{:.4}, {:.4}] from {} splits", iv.lo, iv.hi, iv.b_star);
        }
    }
    println!("covered the true effect in {covered} of {reps} runs");

    let sphere = OrthantSphere::new(3)?;
    let truth = compositional_truth();
    let samples = gen_compositional(1200, 8);
    for method in [Method::Dr, Method::Ipw] {
        let cfg = HulcConfig { method, seed: 8, ..Default::default() };
        let iv = hulc_interval(&sphere, &samples, &cfg)?;
        println!(
            "compositional {method}: [{:.4}, {:.4}] (true contrast {:.4})",
            iv.lo,
            iv.hi,
            sphere.distance(&truth.theta0, &truth.theta1)
        );
    }
    Ok(())
}
