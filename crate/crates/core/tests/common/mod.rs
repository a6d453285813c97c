//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use geodesic_causal::estimators::fold_partition;
use geodesic_causal::Observation;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Random 1-D Euclidean causal dataset with a linear outcome model.
pub fn euclidean_dataset(n: usize, seed: u64) -> Vec<Observation<f64>> {
    let mut r = rng(seed);
    let (a, b) = (r.random_range(-0.5..0.5), r.random_range(-1.0..1.0));
    let (c, d, e) = (r.random_range(-2.0..2.0), r.random_range(-1.0..3.0), r.random_range(-2.0..2.0));
    loop {
        let obs: Vec<Observation<f64>> = (0..n)
            .map(|_| {
                let x: f64 = r.random_range(-2.0..2.0);
                let t = r.random::<f64>() < sigmoid(a + b * x);
                let y = c + d * f64::from(u8::from(t)) + e * x + r.random_range(-1.0..1.0);
                Observation::new(y, t, vec![x])
            })
            .collect();
        let treated = obs.iter().filter(|o| o.treated).count();
        if treated > 20 && treated < n - 20 {
            return obs;
        }
    }
}

/// Logistic MLE of `t` on `[1, x]` by plain Newton iterations.
pub fn logistic_oracle(xs: &[f64], ts: &[bool]) -> (f64, f64) {
    let (mut b0, mut b1) = (0.0, 0.0);
    for _ in 0..200 {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (x, t) in xs.iter().zip(ts) {
            let p = sigmoid(b0 + b1 * x);
            let r = f64::from(u8::from(*t)) - p;
            g0 += r;
            g1 += r * x;
            let w = p * (1.0 - p);
            h00 += w;
            h01 += w * x;
            h11 += w * x * x;
        }
        let det = h00 * h11 - h01 * h01;
        let (s0, s1) = ((h11 * g0 - h01 * g1) / det, (h00 * g1 - h01 * g0) / det);
        b0 += s0;
        b1 += s1;
        if s0.abs() + s1.abs() < 1e-15 {
            break;
        }
    }
    (b0, b1)
}

/// Nuisances fitted on a training set: clipped logistic propensity and the
/// two linear-weight regression functions.
pub struct LineNuisances {
    b: (f64, f64),
    eta0: f64,
    xbar: f64,
    var: f64,
    train: Vec<(f64, f64, bool)>,
}

impl LineNuisances {
    pub fn fit(train: &[Observation<f64>], eta0: f64) -> Self {
        let xs: Vec<f64> = train.iter().map(|o| o.x[0]).collect();
        let ts: Vec<bool> = train.iter().map(|o| o.treated).collect();
        let n = xs.len() as f64;
        let xbar = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - xbar).powi(2)).sum::<f64>() / n;
        Self {
            b: logistic_oracle(&xs, &ts),
            eta0,
            xbar,
            var,
            train: train.iter().map(|o| (o.x[0], o.y, o.treated)).collect(),
        }
    }

    pub fn propensity(&self, x: f64) -> f64 {
        sigmoid(self.b.0 + self.b.1 * x).clamp(self.eta0, 1.0 - self.eta0)
    }

    /// `sum_i w_i Y_i / sum_i w_i` over the arm, `w_i = 1 + (X_i - Xbar)(x - Xbar)/var`.
    pub fn mu(&self, arm: bool, x: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for &(xi, yi, ti) in &self.train {
            if ti == arm {
                let w = 1.0 + (xi - self.xbar) * (x - self.xbar) / self.var;
                num += w * yi;
                den += w;
            }
        }
        num / den
    }
}

pub fn kappa_oracle(arm: bool, treated: bool, e: f64) -> f64 {
    match (arm, treated) {
        (true, true) => 1.0 / e,
        (false, false) => 1.0 / (1.0 - e),
        _ => 0.0,
    }
}

/// AIPW means `(theta0, theta1)` on `held` with nuisances from `nu`.
pub fn aipw(held: &[Observation<f64>], nu: &LineNuisances) -> (f64, f64) {
    let arm = |t: bool| {
        held.iter()
            .map(|o| {
                let mu = nu.mu(t, o.x[0]);
                mu + kappa_oracle(t, o.treated, nu.propensity(o.x[0])) * (o.y - mu)
            })
            .sum::<f64>()
            / held.len() as f64
    };
    (arm(false), arm(true))
}

pub fn or_oracle(samples: &[Observation<f64>], eta0: f64) -> (f64, f64) {
    let nu = LineNuisances::fit(samples, eta0);
    let arm = |t: bool| samples.iter().map(|o| nu.mu(t, o.x[0])).sum::<f64>() / samples.len() as f64;
    (arm(false), arm(true))
}

pub fn dr_oracle(samples: &[Observation<f64>], eta0: f64) -> (f64, f64) {
    aipw(samples, &LineNuisances::fit(samples, eta0))
}

/// `ybar + mean_i kappa_i (Y_i - ybar)`.
pub fn ipw_oracle(samples: &[Observation<f64>], eta0: f64) -> (f64, f64) {
    let nu = LineNuisances::fit(samples, eta0);
    let n = samples.len() as f64;
    let ybar = samples.iter().map(|o| o.y).sum::<f64>() / n;
    let arm = |t: bool| {
        ybar + samples
            .iter()
            .map(|o| kappa_oracle(t, o.treated, nu.propensity(o.x[0])) * (o.y - ybar))
            .sum::<f64>()
            / n
    };
    (arm(false), arm(true))
}

/// Fold-size weighted average of held-out AIPW values on the library's partition.
pub fn cf_oracle(samples: &[Observation<f64>], eta0: f64, folds: usize, seed: u64) -> (f64, f64) {
    let parts = fold_partition(samples, folds, seed).expect("partition");
    let n = samples.len() as f64;
    let (mut t0, mut t1) = (0.0, 0.0);
    for fold in &parts {
        let held: Vec<Observation<f64>> = fold.iter().map(|&i| samples[i].clone()).collect();
        let train: Vec<Observation<f64>> =
            (0..samples.len()).filter(|i| !fold.contains(i)).map(|i| samples[i].clone()).collect();
        let (a0, a1) = aipw(&held, &LineNuisances::fit(&train, eta0));
        let w = fold.len() as f64 / n;
        t0 += w * a0;
        t1 += w * a1;
    }
    (t0, t1)
}

/// Grid refinement: minimize `f` over the box `[lo, hi]^k` restricted to
/// `feasible`, zooming in on the best grid point until the step is below `tol`.
pub fn grid_minimize(
    f: &dyn Fn(&[f64]) -> f64,
    feasible: &dyn Fn(&[f64]) -> bool,
    lo: &[f64],
    hi: &[f64],
    points: usize,
    tol: f64,
) -> Vec<f64> {
    let k = lo.len();
    let (mut lo, mut hi) = (lo.to_vec(), hi.to_vec());
    let (lo0, hi0) = (lo.clone(), hi.clone());
    let mut best: Vec<f64> = Vec::new();
    loop {
        let steps: Vec<f64> = (0..k).map(|j| (hi[j] - lo[j]) / (points - 1) as f64).collect();
        let mut best_val = f64::INFINITY;
        let mut idx = vec![0usize; k];
        let mut x = vec![0.0; k];
        'grid: loop {
            for j in 0..k {
                x[j] = lo[j] + steps[j] * idx[j] as f64;
            }
            if feasible(&x) {
                let v = f(&x);
                if v < best_val {
                    best_val = v;
                    best = x.clone();
                }
            }
            for j in 0..k {
                idx[j] += 1;
                if idx[j] < points {
                    continue 'grid;
                }
                idx[j] = 0;
            }
            break;
        }
        assert!(best_val.is_finite(), "no feasible grid point");
        if steps.iter().all(|s| *s < tol) {
            return best;
        }
        for j in 0..k {
            let half = 4.0 * steps[j];
            lo[j] = (best[j] - half).max(lo0[j]);
            hi[j] = (best[j] + half).min(hi0[j]);
        }
    }
}

fn arc(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0).acos()
}

/// Weighted Fréchet mean on the positive orthant of `S^2` by grid search in
/// spherical coordinates.
pub fn sphere_grid_mean(points: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let to_xyz = |a: &[f64]| vec![a[0].sin() * a[1].cos(), a[0].sin() * a[1].sin(), a[0].cos()];
    let f = |a: &[f64]| {
        let p = to_xyz(a);
        points.iter().zip(weights).map(|(q, w)| w * arc(&p, q).powi(2)).sum::<f64>()
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let best = grid_minimize(&f, &|_| true, &[0.0, 0.0], &[half_pi, half_pi], 61, 1e-8);
    to_xyz(&best)
}

/// Frobenius norm squared of a packed 2x2 or 3x3 difference.
fn packed_sq(a: &[f64], b: &[f64], dim: usize) -> f64 {
    let mut s = 0.0;
    let mut k = 0;
    for j in 0..dim {
        for l in j..dim {
            let d = a[k] - b[k];
            s += if j == l { d * d } else { 2.0 * d * d };
            k += 1;
        }
    }
    s
}

/// Weighted Fréchet mean over 2x2 PSD matrices with positive total weight:
/// the weighted average with its negative eigenvalue clipped, computed from
/// the quadratic formula.
pub fn psd2_oracle_mean(points: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    assert!(total > 0.0, "oracle needs a positive total weight");
    let avg: Vec<f64> =
        (0..3).map(|j| points.iter().zip(weights).map(|(p, w)| w * p[j]).sum::<f64>() / total).collect();
    let (p, q, r) = (avg[0], avg[1], avg[2]);
    let mid = (p + r) / 2.0;
    let rad = (((p - r) / 2.0).powi(2) + q * q).sqrt();
    let (hi, lo) = (mid + rad, mid - rad);
    if lo >= 0.0 {
        return avg;
    }
    if hi <= 0.0 {
        return vec![0.0; 3];
    }
    let (mut v0, mut v1) = (q, hi - p);
    if v0.abs() + v1.abs() < 1e-300 {
        (v0, v1) = (hi - r, q);
    }
    let n2 = v0 * v0 + v1 * v1;
    vec![hi * v0 * v0 / n2, hi * v0 * v1 / n2, hi * v1 * v1 / n2]
}

/// Packed 3x3 Laplacian from edge weights `(w01, w02, w12)`.
pub fn laplacian3(w: &[f64]) -> Vec<f64> {
    vec![w[0] + w[1], -w[0], -w[1], w[0] + w[2], -w[2], w[1] + w[2]]
}

/// Weighted Fréchet mean over 3-node graph Laplacians by grid search on the
/// non-negative edge weights.
pub fn laplacian3_grid_mean(points: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let f = |e: &[f64]| {
        let l = laplacian3(e);
        points.iter().zip(weights).map(|(p, w)| w * packed_sq(&l, p, 3)).sum::<f64>()
    };
    let r = 3.0 * points.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    laplacian3(&grid_minimize(&f, &|_| true, &[0.0; 3], &[r; 3], 41, 1e-8))
}
