//! Library outputs against independently computed reference values.

mod common;

use geodesic_causal::estimators::{estimate_many, EstimatorConfig, Method};
use geodesic_causal::frechet::GfrModel;
use geodesic_causal::simulation::{compositional_truth, covariance_truth};
use geodesic_causal::spaces::{FrobeniusSpace, Interval, MatrixKind, OrthantSphere, SpherePoint, SymMatrix};
use geodesic_causal::{geodesic_eval, FeatureMap, GeodesicSpace};
use rand::Rng;

use common::*;

#[test]
fn euclidean_estimators_match_closed_forms() {
    let space = Interval::real_line();
    for seed in 0..10 {
        let samples = euclidean_dataset(200, seed);
        let cfg = EstimatorConfig { seed, ..Default::default() };
        let est = estimate_many(&space, &samples, &Method::ALL, &cfg).unwrap();
        let eta0 = cfg.eta0;
        let oracle = [
            dr_oracle(&samples, eta0),
            cf_oracle(&samples, eta0, cfg.folds, seed),
            or_oracle(&samples, eta0),
            ipw_oracle(&samples, eta0),
        ];
        for (e, (o0, o1)) in est.iter().zip(oracle) {
            assert!((e.theta0 - o0).abs() < 1e-8, "{} theta0 {} vs {o0}", e.method, e.theta0);
            assert!((e.theta1 - o1).abs() < 1e-8, "{} theta1 {} vs {o1}", e.method, e.theta1);
            assert!((e.contrast - (o1 - o0).abs()).abs() < 1e-8);
        }
    }
}

#[test]
fn gfr_on_the_line_matches_weighted_least_squares() {
    let space = Interval::real_line();
    let samples = euclidean_dataset(150, 77);
    let nu = LineNuisances::fit(&samples, 0.05);
    for arm in [false, true] {
        let model = GfrModel::fit(&samples, arm, FeatureMap::Identity).unwrap();
        for x in [-1.5, -0.2, 0.0, 0.7, 1.9] {
            let fit = model.predict(&space, &[x]).unwrap();
            assert!((fit - nu.mu(arm, x)).abs() < 1e-8);
        }
    }
}

#[test]
fn sphere_means_match_grid_search() {
    let space = OrthantSphere::new(3).unwrap();
    let mut r = rng(5);
    for k in [2usize, 5] {
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    let v: Vec<f64> = (0..3).map(|_| r.random_range(0.05..1.0)).collect();
                    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                    v.iter().map(|c| c / n).collect()
                })
                .collect();
            let w: Vec<f64> = (0..k).map(|_| r.random_range(0.1..1.0)).collect();
            let lib = space
                .weighted_frechet_mean(&pts.iter().map(|p| SpherePoint::new(p.clone())).collect::<Vec<_>>(), &w)
                .unwrap();
            let oracle = SpherePoint::new(sphere_grid_mean(&pts, &w));
            assert!(space.distance(&lib, &oracle) < 1e-4);
        }
    }
}

#[test]
fn geodesic_midpoint_minimizes_the_two_point_objective() {
    let space = OrthantSphere::new(3).unwrap();
    let a = SpherePoint::normalized(vec![0.9, 0.2, 0.3]).unwrap();
    let b = SpherePoint::normalized(vec![0.1, 0.7, 0.6]).unwrap();
    let mid = geodesic_eval(&space, &a, &b, 0.5).unwrap();
    let oracle = sphere_grid_mean(&[a.coords().to_vec(), b.coords().to_vec()], &[1.0, 1.0]);
    assert!(space.distance(&mid, &SpherePoint::new(oracle)) < 1e-4);
}

#[test]
fn constrained_matrix_means_match_oracles() {
    let cov = FrobeniusSpace::new(2, MatrixKind::covariance()).unwrap();
    let lap = FrobeniusSpace::new(3, MatrixKind::laplacian()).unwrap();
    let mut r = rng(9);
    let mut binding = 0;
    for _ in 0..10 {
        let pts: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let (l00, l10, l11) = (r.random_range(0.2..2.0), r.random_range(-1.5..1.5), r.random_range(0.0..1.0));
                vec![l00 * l00, l00 * l10, l10 * l10 + l11 * l11]
            })
            .collect();
        let w = vec![1.5, -0.6, 0.8, -0.4];
        let lib = cov
            .weighted_frechet_mean(
                &pts.iter().map(|p| SymMatrix::from_packed(2, p.clone()).unwrap()).collect::<Vec<_>>(),
                &w,
            )
            .unwrap();
        let oracle = SymMatrix::from_packed(2, psd2_oracle_mean(&pts, &w)).unwrap();
        assert!(cov.distance(&lib, &oracle) < 1e-5, "{lib:?} vs {oracle:?}");
        let total: f64 = w.iter().sum();
        let avg: Vec<f64> =
            (0..3).map(|j| pts.iter().zip(&w).map(|(p, wi)| wi * p[j]).sum::<f64>() / total).collect();
        if avg[0] * avg[2] < avg[1] * avg[1] || avg[0] < 0.0 {
            binding += 1;
        }

        let graphs: Vec<Vec<f64>> =
            (0..4).map(|_| laplacian3(&[r.random_range(0.0..1.0), r.random_range(0.0..1.0), r.random_range(0.0..1.0)])).collect();
        let lib = lap
            .weighted_frechet_mean(
                &graphs.iter().map(|p| SymMatrix::from_packed(3, p.clone()).unwrap()).collect::<Vec<_>>(),
                &w,
            )
            .unwrap();
        let oracle = SymMatrix::from_packed(3, laplacian3_grid_mean(&graphs, &w)).unwrap();
        assert!(lap.distance(&lib, &oracle) < 1e-5, "{lib:?} vs {oracle:?}");
    }
    assert!(binding > 0, "no problem had an active constraint");
}

#[test]
fn true_mean_distances_match_direct_evaluation() {
    let space = FrobeniusSpace::new(10, MatrixKind::covariance()).unwrap();
    let t = covariance_truth();
    let mut s = 0.0;
    for j in 0..10 {
        for k in 0..10 {
            let (a, b) = if j == k { (18.0, 27.0) } else { (2.0, 3.0) };
            s += (a - b) * (a - b);
        }
    }
    assert!((space.distance(&t.theta0, &t.theta1) - f64::sqrt(s)).abs() < 1e-12);

    let sphere = OrthantSphere::new(3).unwrap();
    let c = compositional_truth();
    let r2 = 2f64.sqrt();
    let (p, q) = ([r2 / 2.0, r2 / 4.0, 6f64.sqrt() / 4.0], [r2 / 2.0, 6f64.sqrt() / 4.0, r2 / 4.0]);
    let inner: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
    assert!((sphere.distance(&c.theta0, &c.theta1) - inner.acos()).abs() < 1e-12);
}
