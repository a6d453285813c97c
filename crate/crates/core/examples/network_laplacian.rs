//! GATE for network-valued outcomes represented by graph Laplacians.
//!
//! Units are weighted graphs on four nodes. Treatment strengthens the edges
//! touching node 0; the covariate shifts every edge weight.
//!
//! cargo run --release --example network_laplacian -- 400 9

use std::env;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use geodesic_causal::estimators::{estimate_many, EstimatorConfig, Method};
use geodesic_causal::propensity::expit;
use geodesic_causal::spaces::{FrobeniusSpace, MatrixKind, SymMatrix};
use geodesic_causal::{GeodesicSpace, Observation};

const NODES: usize = 4;

fn laplacian(weight: impl Fn(usize, usize) -> f64) -> SymMatrix {
    let w = |j: usize, k: usize| if j == k { 0.0 } else { weight(j.min(k), j.max(k)) };
    SymMatrix::from_fn(NODES, |j, k| {
        if j == k {
            (0..NODES).map(|l| w(j, l)).sum()
        } else {
            -w(j, k)
        }
    })
}

fn mean_weight(treated: bool, j: usize) -> f64 {
    1.0 + if treated && j == 0 { 0.8 } else { 0.0 }
}

fn generate(n: usize, seed: u64) -> Vec<Observation<SymMatrix>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..=1.0);
            let treated = rng.random::<f64>() < expit(0.75 * x);
            let noise: Vec<f64> = (0..NODES * NODES).map(|_| rng.random_range(-0.2..=0.2)).collect();
            let y = laplacian(|j, k| mean_weight(treated, j) + 0.3 * x + noise[j * NODES + k]);
            Observation::new(y, treated, vec![x])
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = env::args().skip(1).collect();
    let n: usize = args.first().map(|s| s.parse()).transpose()?.unwrap_or(400);
    let seed: u64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(9);

    let space = FrobeniusSpace::new(NODES, MatrixKind::laplacian())?;
    let samples = generate(n, seed);
    let theta0 = laplacian(|j, _| mean_weight(false, j));
    let theta1 = laplacian(|j, _| mean_weight(true, j));
    println!("true contrast {:.4}", space.distance(&theta0, &theta1));

    let cfg = EstimatorConfig { seed, ..Default::default() };
    for e in estimate_many(&space, &samples, &Method::ALL, &cfg)? {
        println!(
            "{:>4}  contrast {:.4}  errors ({:.4}, {:.4})",
            e.method.to_string(),
            e.contrast,
            space.distance(&e.theta0, &theta0),
            space.distance(&e.theta1, &theta1)
        );
    }
    let dr = estimate_many(&space, &samples, &[Method::Dr], &cfg)?.remove(0);
    println!("DR estimate of the treated mean Laplacian:");
    for j in 0..NODES {
        let row: Vec<String> = (0..NODES).map(|k| format!("{:7.3}", dr.theta1.get(j, k))).collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}
