//! Symmetric matrices under the Frobenius metric.
//!
//! Covers graph Laplacians, covariance matrices and the diagonally dominant
//! matrices produced by the covariance simulation. All three feasible sets are
//! closed and convex, so geodesics are line segments and weighted Fréchet means
//! with positive total weight are projections of the weighted average.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::frechet;
use crate::geodesic::GeodesicSpace;

/// Default bound on edge weights and variances; effectively inactive.
pub const DEFAULT_BOUND: f64 = 1e6;

const FEAS_TOL: f64 = 1e-9;
const DYKSTRA_SWEEPS: usize = 500;
const DYKSTRA_TOL: f64 = 1e-10;

/// Symmetric `m x m` matrix stored as its upper triangle, row-major,
/// diagonal included.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    packed: Vec<f64>,
}

impl SymMatrix {
    pub fn from_packed(dim: usize, packed: Vec<f64>) -> Result<Self> {
        if packed.len() != packed_len(dim) {
            return Err(Error::Shape(format!(
                "{dim}x{dim} symmetric matrix needs {} entries, got {}",
                packed_len(dim),
                packed.len()
            )));
        }
        Ok(Self { dim, packed })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, packed: vec![0.0; packed_len(dim)] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |j, k| if j == k { 1.0 } else { 0.0 })
    }

    /// Build from a function of `(row, col)` evaluated on the upper triangle.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut packed = Vec::with_capacity(packed_len(dim));
        for j in 0..dim {
            for k in j..dim {
                packed.push(f(j, k));
            }
        }
        Self { dim, packed }
    }

    /// Build from a full matrix; fails unless it is exactly symmetric.
    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
        }
        let dim = m.nrows();
        for j in 0..dim {
            for k in (j + 1)..dim {
                if m[(j, k)] != m[(k, j)] {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({j}, {k})"
                    )));
                }
            }
        }
        Ok(Self::from_fn(dim, |j, k| m[(j, k)]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        let (j, k) = if j <= k { (j, k) } else { (k, j) };
        self.packed[index(self.dim, j, k)]
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |j, k| self.get(j, k))
    }

    /// Sum of the off-diagonal entries of row `j`.
    pub fn off_diagonal_row_sum(&self, j: usize) -> f64 {
        (0..self.dim).filter(|&k| k != j).map(|k| self.get(j, k)).sum()
    }
}

pub fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

fn index(dim: usize, j: usize, k: usize) -> usize {
    j * dim - j * (j + 1) / 2 + k
}

/// Weights turning the packed squared norm into the full Frobenius one.
fn metric_weights(dim: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(packed_len(dim));
    for j in 0..dim {
        for k in j..dim {
            w.push(if j == k { 1.0 } else { 2.0 });
        }
    }
    w
}

/// Constraint set a symmetric matrix must lie in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixKind {
    /// Graph Laplacians: off-diagonals in `[-max_weight, 0]`, rows sum to zero.
    Laplacian { max_weight: f64 },
    /// Positive semi-definite with diagonal at most `max_variance`.
    Covariance { max_variance: f64 },
    /// Off-diagonals in `[0, max_weight]`, off-diagonal row sum <= diagonal
    /// <= `max_variance`. Every such matrix is PSD.
    DiagDominant { max_weight: f64, max_variance: f64 },
}

impl MatrixKind {
    pub fn laplacian() -> Self {
        Self::Laplacian { max_weight: DEFAULT_BOUND }
    }

    pub fn covariance() -> Self {
        Self::Covariance { max_variance: DEFAULT_BOUND }
    }

    pub fn diag_dominant() -> Self {
        Self::DiagDominant { max_weight: DEFAULT_BOUND, max_variance: DEFAULT_BOUND }
    }
}

/// `m x m` symmetric matrices of a given kind with the Frobenius distance.
#[derive(Debug, Clone, PartialEq)]
pub struct FrobeniusSpace {
    dim: usize,
    kind: MatrixKind,
    metric: Vec<f64>,
}

impl FrobeniusSpace {
    pub fn new(dim: usize, kind: MatrixKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be positive".into()));
        }
        Ok(Self { dim, kind, metric: metric_weights(dim) })
    }

    pub fn matrix_dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    fn same_shape(&self, a: &SymMatrix) -> Result<()> {
        if a.dim != self.dim {
            return Err(Error::Shape(format!("expected {0}x{0} matrix, got {1}x{1}", self.dim, a.dim)));
        }
        Ok(())
    }

    /// Euclidean projection of a symmetric matrix onto the feasible set.
    pub fn project_feasible(&self, raw: SymMatrix) -> Result<SymMatrix> {
        self.same_shape(&raw)?;
        if raw.packed.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        if self.is_feasible(&raw) {
            return Ok(raw);
        }
        let packed = match self.kind {
            MatrixKind::Laplacian { max_weight } => self.project_laplacian(&raw.packed, max_weight),
            MatrixKind::Covariance { max_variance } => {
                self.project_covariance(&raw.packed, max_variance)
            }
            MatrixKind::DiagDominant { max_weight, max_variance } => {
                self.project_diag_dominant(&raw.packed, max_weight, max_variance)
            }
        };
        Ok(SymMatrix { dim: self.dim, packed })
    }

    fn project_laplacian(&self, raw: &[f64], max_weight: f64) -> Vec<f64> {
        let dim = self.dim;
        // Row-sum constraints A x = 0, projected in the weighted metric:
        // x - D^-1 A' (A D^-1 A')^-1 A x.
        let n = raw.len();
        let mut a = DMatrix::<f64>::zeros(dim, n);
        for j in 0..dim {
            for k in 0..dim {
                let (r, c) = if j <= k { (j, k) } else { (k, j) };
                a[(j, index(dim, r, c))] = 1.0;
            }
        }
        let dinv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            self.metric.iter().map(|w| 1.0 / w),
        ));
        let gram = &a * &dinv * a.transpose();
        let gram_inv = gram.try_inverse().expect("row-sum gram matrix is nonsingular");
        let correction = &dinv * a.transpose() * gram_inv * &a;
        let affine = move |x: &[f64]| -> Vec<f64> {
            let v = nalgebra::DVector::from_column_slice(x);
            (&v - &correction * &v).iter().copied().collect()
        };
        let box_proj = move |x: &[f64]| -> Vec<f64> {
            let mut y = x.to_vec();
            for j in 0..dim {
                for k in (j + 1)..dim {
                    let i = index(dim, j, k);
                    y[i] = y[i].clamp(-max_weight, 0.0);
                }
            }
            y
        };
        let sets: Vec<Box<dyn Fn(&[f64]) -> Vec<f64>>> = vec![Box::new(affine), Box::new(box_proj)];
        dykstra(raw, &sets)
    }

    fn project_covariance(&self, raw: &[f64], max_variance: f64) -> Vec<f64> {
        let dim = self.dim;
        let psd = move |x: &[f64]| -> Vec<f64> {
            let m = SymMatrix { dim, packed: x.to_vec() }.to_dmatrix();
            let eig = SymmetricEigen::new(m);
            let clipped = eig.eigenvalues.map(|v| v.max(0.0));
            let rebuilt =
                &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
            // symmetrize the packed copy from the upper triangle
            SymMatrix::from_fn(dim, |j, k| 0.5 * (rebuilt[(j, k)] + rebuilt[(k, j)])).packed
        };
        if max_variance >= DEFAULT_BOUND {
            return psd(raw);
        }
        let diag_cap = move |x: &[f64]| -> Vec<f64> {
            let mut y = x.to_vec();
            for j in 0..dim {
                let i = index(dim, j, j);
                y[i] = y[i].min(max_variance);
            }
            y
        };
        let sets: Vec<Box<dyn Fn(&[f64]) -> Vec<f64>>> = vec![Box::new(psd), Box::new(diag_cap)];
        dykstra(raw, &sets)
    }

    fn project_diag_dominant(&self, raw: &[f64], max_weight: f64, max_variance: f64) -> Vec<f64> {
        let dim = self.dim;
        let mut sets: Vec<Box<dyn Fn(&[f64]) -> Vec<f64>>> = Vec::with_capacity(dim + 1);
        sets.push(Box::new(move |x: &[f64]| {
            let mut y = x.to_vec();
            for j in 0..dim {
                for k in j..dim {
                    let i = index(dim, j, k);
                    y[i] = if j == k { y[i].min(max_variance) } else { y[i].clamp(0.0, max_weight) };
                }
            }
            y
        }));
        for row in 0..dim {
            // half-space g'x >= 0 with g = e_jj - sum_k e_jk
            let mut g = vec![0.0; raw.len()];
            for k in 0..dim {
                let (r, c) = if row <= k { (row, k) } else { (k, row) };
                g[index(dim, r, c)] = if k == row { 1.0 } else { -1.0 };
            }
            let metric = self.metric.clone();
            let gnorm: f64 = g.iter().zip(&metric).map(|(gi, w)| gi * gi / w).sum();
            sets.push(Box::new(move |x: &[f64]| {
                let slack: f64 = g.iter().zip(x).map(|(gi, xi)| gi * xi).sum();
                if slack >= 0.0 {
                    return x.to_vec();
                }
                let lambda = -slack / gnorm;
                x.iter().zip(&g).zip(&metric).map(|((xi, gi), w)| xi + lambda * gi / w).collect()
            }));
        }
        dykstra(raw, &sets)
    }
}

/// Dykstra's alternating projections onto the intersection of closed convex sets.
fn dykstra(start: &[f64], sets: &[Box<dyn Fn(&[f64]) -> Vec<f64>>]) -> Vec<f64> {
    let n = start.len();
    let mut x = start.to_vec();
    let mut increments = vec![vec![0.0; n]; sets.len()];
    for _ in 0..DYKSTRA_SWEEPS {
        let before = x.clone();
        for (proj, inc) in sets.iter().zip(increments.iter_mut()) {
            let shifted: Vec<f64> = x.iter().zip(inc.iter()).map(|(a, b)| a + b).collect();
            let y = proj(&shifted);
            for i in 0..n {
                inc[i] = shifted[i] - y[i];
            }
            x = y;
        }
        let change = x.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change < DYKSTRA_TOL {
            break;
        }
    }
    x
}

impl GeodesicSpace for FrobeniusSpace {
    type Point = SymMatrix;

    fn name(&self) -> &'static str {
        match self.kind {
            MatrixKind::Laplacian { .. } => "laplacian",
            MatrixKind::Covariance { .. } => "covariance",
            MatrixKind::DiagDominant { .. } => "diagdom",
        }
    }

    fn dim(&self) -> usize {
        packed_len(self.dim)
    }

    fn distance(&self, a: &SymMatrix, b: &SymMatrix) -> f64 {
        a.packed
            .iter()
            .zip(&b.packed)
            .zip(&self.metric)
            .map(|((x, y), w)| w * (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    fn check(&self, p: &SymMatrix) -> Result<()> {
        self.same_shape(p)?;
        if p.packed.iter().any(|v| !v.is_finite()) {
            return Err(Error::Infeasible("matrix has non-finite entries".into()));
        }
        let dim = self.dim;
        let fail = |msg: String| Err(Error::Infeasible(msg));
        match self.kind {
            MatrixKind::Laplacian { max_weight } => {
                for j in 0..dim {
                    for k in (j + 1)..dim {
                        let v = p.get(j, k);
                        if v > FEAS_TOL || v < -max_weight - FEAS_TOL {
                            return fail(format!("edge ({j}, {k}) weight {v} out of range"));
                        }
                    }
                    let row: f64 = (0..dim).map(|k| p.get(j, k)).sum();
                    let scale = 1.0 + p.get(j, j).abs();
                    if row.abs() > FEAS_TOL * scale {
                        return fail(format!("row {j} sums to {row}"));
                    }
                }
            }
            MatrixKind::Covariance { max_variance } => {
                for j in 0..dim {
                    if p.get(j, j) > max_variance + FEAS_TOL {
                        return fail(format!("variance {j} exceeds {max_variance}"));
                    }
                }
                let min = SymmetricEigen::new(p.to_dmatrix()).eigenvalues.min();
                if min < -FEAS_TOL {
                    return fail(format!("minimum eigenvalue {min}"));
                }
            }
            MatrixKind::DiagDominant { max_weight, max_variance } => {
                for j in 0..dim {
                    for k in (j + 1)..dim {
                        let v = p.get(j, k);
                        if v < -FEAS_TOL || v > max_weight + FEAS_TOL {
                            return fail(format!("off-diagonal ({j}, {k}) = {v} out of range"));
                        }
                    }
                    let d = p.get(j, j);
                    let row = p.off_diagonal_row_sum(j);
                    if d < row - FEAS_TOL * (1.0 + row.abs()) {
                        return fail(format!("row {j} not diagonally dominant: {d} < {row}"));
                    }
                    if d > max_variance + FEAS_TOL {
                        return fail(format!("diagonal {j} exceeds {max_variance}"));
                    }
                }
            }
        }
        Ok(())
    }

    fn extend(&self, a: &SymMatrix, b: &SymMatrix, t: f64) -> SymMatrix {
        SymMatrix {
            dim: a.dim,
            packed: a.packed.iter().zip(&b.packed).map(|(x, y)| x + t * (y - x)).collect(),
        }
    }

    fn project(&self, raw: SymMatrix) -> Result<SymMatrix> {
        self.project_feasible(raw)
    }

    fn weighted_frechet_mean(&self, points: &[SymMatrix], weights: &[f64]) -> Result<SymMatrix> {
        frechet::validate_weights(points.len(), weights)?;
        for p in points {
            self.same_shape(p)?;
        }
        let coords: Vec<&[f64]> = points.iter().map(|p| p.packed.as_slice()).collect();
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            let avg = frechet::weighted_average(&coords, weights);
            return self.project_feasible(SymMatrix { dim: self.dim, packed: avg });
        }
        let project = |x: Vec<f64>| {
            self.project_feasible(SymMatrix { dim: self.dim, packed: x }).map(|m| m.packed)
        };
        let packed = frechet::projected_gradient(&coords, weights, &self.metric, project)?;
        Ok(SymMatrix { dim: self.dim, packed })
    }

    fn coordinates(&self, p: &SymMatrix) -> Vec<f64> {
        p.packed.clone()
    }

    fn from_coordinates(&self, coords: &[f64]) -> Result<SymMatrix> {
        let m = SymMatrix::from_packed(self.dim, coords.to_vec())?;
        self.check(&m)?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::geodesic_eval;

    #[test]
    fn packed_indexing_matches_row_major_upper_triangle() {
        let m = SymMatrix::from_fn(4, |j, k| (10 * j + k) as f64);
        let mut expected = Vec::new();
        for j in 0..4 {
            for k in j..4 {
                expected.push((10 * j + k) as f64);
            }
        }
        assert_eq!(m.packed(), expected.as_slice());
        assert_eq!(m.get(3, 1), 13.0);
        assert_eq!(m.get(1, 3), 13.0);
    }

    #[test]
    fn frobenius_distance_basics() {
        let s = FrobeniusSpace::new(2, MatrixKind::covariance()).unwrap();
        let z = SymMatrix::zeros(2);
        let i = SymMatrix::identity(2);
        assert_eq!(s.distance(&i, &i), 0.0);
        assert!((s.distance(&z, &i) - 2f64.sqrt()).abs() < 1e-15);
        let a = SymMatrix::from_fn(2, |j, k| if j == k { 1.0 } else { 3.0 });
        // off-diagonal counted twice
        assert!((s.distance(&z, &a) - (1.0 + 1.0 + 9.0 + 9.0f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn psd_clipping() {
        let s = FrobeniusSpace::new(2, MatrixKind::covariance()).unwrap();
        let raw = SymMatrix::from_fn(2, |j, k| match (j, k) {
            (0, 0) => 1.0,
            (1, 1) => -1.0,
            _ => 0.0,
        });
        let p = s.project_feasible(raw).unwrap();
        assert!((p.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(p.get(1, 1).abs() < 1e-12);
        assert!(p.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn projection_is_identity_on_feasible_points() {
        let s = FrobeniusSpace::new(3, MatrixKind::diag_dominant()).unwrap();
        let a = SymMatrix::from_fn(3, |j, k| if j == k { 4.0 } else { 2.0 });
        assert_eq!(s.project_feasible(a.clone()).unwrap(), a);
    }

    #[test]
    fn diag_dominant_projection_restores_dominance() {
        let s = FrobeniusSpace::new(3, MatrixKind::diag_dominant()).unwrap();
        let raw = SymMatrix::from_fn(3, |j, k| if j == k { 1.0 } else { 2.0 });
        let p = s.project_feasible(raw.clone()).unwrap();
        assert!(s.is_feasible(&p));
        assert!(s.distance(&p, &raw) > 0.0);
        let neg = SymMatrix::from_fn(3, |j, k| if j == k { 5.0 } else { -1.0 });
        let p = s.project_feasible(neg).unwrap();
        assert!(s.is_feasible(&p));
        assert!(p.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(SymMatrix::from_dmatrix(&m), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn midpoint_is_elementwise_average() {
        let s = FrobeniusSpace::new(3, MatrixKind::diag_dominant()).unwrap();
        let a = SymMatrix::from_fn(3, |j, k| if j == k { 4.0 } else { 2.0 });
        let b = SymMatrix::from_fn(3, |j, k| if j == k { 6.0 } else { 3.0 });
        let mid = geodesic_eval(&s, &a, &b, 0.5).unwrap();
        for (m, (x, y)) in mid.packed().iter().zip(a.packed().iter().zip(b.packed())) {
            assert!((m - 0.5 * (x + y)).abs() < 1e-15);
        }
    }

    #[test]
    fn laplacian_projection_is_feasible() {
        let s = FrobeniusSpace::new(3, MatrixKind::Laplacian { max_weight: 1.0 }).unwrap();
        let raw = SymMatrix::from_fn(3, |j, k| if j == k { 0.3 } else { -2.0 + (j + k) as f64 });
        let p = s.project_feasible(raw).unwrap();
        assert!(s.is_feasible(&p), "{p:?}");
    }

    #[test]
    fn negative_total_weight_uses_projected_gradient() {
        let s = FrobeniusSpace::new(
            2,
            MatrixKind::DiagDominant { max_weight: 5.0, max_variance: 20.0 },
        )
        .unwrap();
        let a = SymMatrix::from_fn(2, |j, k| if j == k { 2.0 } else { 1.0 });
        let b = SymMatrix::from_fn(2, |j, k| if j == k { 3.0 } else { 2.0 });
        let w = [0.5, -1.0];
        let nu = s.weighted_frechet_mean(&[a.clone(), b.clone()], &w).unwrap();
        assert!(s.is_feasible(&nu));
        let obj = s.frechet_objective(&nu, &[a.clone(), b.clone()], &w);
        assert!(obj <= s.frechet_objective(&a, &[a.clone(), b.clone()], &w) + 1e-9);
        assert!(obj <= s.frechet_objective(&b, &[a, b.clone()], &w) + 1e-9);
    }
}
