//! Monte-Carlo ASE table for one simulation design.
//!
//! cargo run --release --example table_reproduction -- covariance 20 100,300,1000 project

use std::env;
use std::time::Instant;

use geodesic_causal::estimators::DEFAULT_EXTENSION;
use geodesic_causal::simulation::{render_table, run_scenario, Metric, ScenarioSpace, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = env::args().skip(1).collect();
    let space: ScenarioSpace = args.first().map(String::as_str).unwrap_or("covariance").parse()?;
    let q: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    let sizes: Vec<usize> = match args.get(2) {
        Some(s) => s.split(',').map(str::parse).collect::<Result<_, _>>()?,
        None => vec![100, 300, 1000],
    };

    let extension = match args.get(3) {
        Some(s) => s.parse()?,
        None => DEFAULT_EXTENSION,
    };

    let mut reports = Vec::new();
    for (or_correct, ps_correct) in [(true, true), (true, false), (false, true)] {
        for &n in &sizes {
            let start = Instant::now();
            let mut spec = ScenarioSpec::new(space, n, or_correct, ps_correct, q, 2024);
            spec.extension = extension;
            reports.push(run_scenario(&spec)?);
            eprintln!("n = {n:>5} OR {or_correct:<5} PS {ps_correct:<5} {:.1?}", start.elapsed());
        }
    }
    for r in &reports {
        for (q, msg) in &r.failures {
            eprintln!("n = {} replicate {q} failed: {msg}", r.spec.n);
        }
    }
    println!("average squared error");
    print!("{}", render_table(&reports, Metric::Squared));
    println!("average error distance");
    print!("{}", render_table(&reports, Metric::Distance));
    Ok(())
}
