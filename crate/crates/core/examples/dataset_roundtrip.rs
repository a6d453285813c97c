//! Write datasets of every outcome space to CSV and read them back.
//!
//! cargo run --release --example dataset_roundtrip

use geodesic_causal::dataset::{read_dataset, write_dataset, AnyDataset, OutcomeCodec};
use geodesic_causal::simulation::{gen_compositional, gen_covariance, gen_euclidean, COVARIANCE_DIM};
use geodesic_causal::spaces::{FrobeniusSpace, Interval, MatrixKind, OrthantSphere, QuantileSpace};
use geodesic_causal::{with_dataset, GeodesicSpace, Observation};

fn roundtrip<S: OutcomeCodec>(
    space: &S,
    samples: &[Observation<S::Point>],
    name: &str,
) -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::temp_dir().join(format!("gci_{name}.csv"));
    write_dataset(space, samples, &path)?;
    let text = std::fs::read_to_string(&path)?;
    let header: Vec<&str> = text.lines().take(2).collect();
    let columns = header[1].split(',').count();
    let back: AnyDataset = read_dataset(&path, None)?;
    let rows = with_dataset!(&back, |_s, d| d.samples.len());
    println!("{name:>14}: {} rows, {columns} columns, metadata '{}', read back {rows} rows", samples.len(), header[0]);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    roundtrip(&Interval::real_line(), &gen_euclidean(50, 1), "euclidean")?;
    let cov = FrobeniusSpace::new(COVARIANCE_DIM, MatrixKind::covariance())?;
    roundtrip(&cov, &gen_covariance(50, 2), "covariance")?;
    let sphere = OrthantSphere::new(3)?;
    let comp = gen_compositional(50, 3);
    roundtrip(&sphere, &comp, "compositional")?;

    let w = QuantileSpace::new(21)?;
    let dists: Vec<Observation<_>> = (0..30)
        .map(|i| {
            let x = i as f64 / 30.0;
            Observation::new(w.from_quantile_fn(|p| x + p * (1.0 + x)), i % 2 == 0, vec![x])
        })
        .collect();
    roundtrip(&w, &dists, "wasserstein")?;

    // Compositions are stored on the simplex and come back on the sphere.
    let path = std::env::temp_dir().join("gci_compositional.csv");
    if let AnyDataset::Compositional(_, d) = read_dataset(&path, None)? {
        let gap = d.samples.iter().zip(&comp).map(|(a, b)| sphere.distance(&a.y, &b.y)).fold(0.0, f64::max);
        println!("largest compositional round-trip distance: {gap:.2e}");
        println!("first row on the simplex: {:.4?}", d.samples[0].y.to_simplex());
    }
    Ok(())
}
