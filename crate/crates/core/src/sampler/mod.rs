//! Exact Gaussian sampling of increment vectors.
//!
//! A [`CovarianceMatrix`] holds the dense covariance of an increment vector
//! (temporal increments, rectangular space-time increments, or spatial
//! increments at a fixed time). [`CovarianceModel`] adds a lower-triangular
//! Cholesky factor, computed once, and draws replications as `L·z`.
//!
//! Replication `r` under master seed `s` always uses the ChaCha8 stream
//! `(seed = s, stream = r)`, so output does not depend on scheduling.

mod dump;
mod oracle;

use std::cell::Cell;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kernels::{self, HurstParam, PhysicalParams, RectGrid};

pub use oracle::{
    quadratic_form_cumulant, standardized_cumulant, CovarianceSource, temporal_wick_second_moment, trace_power,
    wick_second_moment, wick_second_moment_matrix_free,
};

/// Relative jitter levels tried, in order, when factorization fails.
pub const JITTER_LEVELS: [f64; 3] = [1e-14, 1e-12, 1e-10];

thread_local! {
    static FACTORIZATIONS: Cell<usize> = const { Cell::new(0) };
}

/// Number of Cholesky factorizations performed on the current thread.
pub fn factorization_count() -> usize {
    FACTORIZATIONS.with(|c| c.get())
}

/// What generated a covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Temporal increments over `[i/n, (i+1)/n]` at a fixed space point.
    Temporal { h: f64, n: usize },
    /// Rectangular increments, space-major `(i, j) -> i·m + j`.
    Rectangular { n: usize, m: usize, alpha: f64 },
    /// Spatial increments over `[i/n, (i+1)/n]` at fixed time `t` (`H = 1/2`).
    SpatialSlice { n: usize, t: f64 },
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub kind: ModelKind,
    pub params: PhysicalParams,
    /// Absolute amount added to the diagonal before factorization.
    pub jitter: f64,
}

impl ModelMeta {
    pub fn new(kind: ModelKind, params: PhysicalParams) -> Self {
        ModelMeta { kind, params, jitter: 0.0 }
    }
}

/// Dense symmetric covariance matrix of an increment vector (unfactored).
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    matrix: DMatrix<f64>,
    meta: ModelMeta,
}

impl CovarianceMatrix {
    /// Wraps an arbitrary matrix; it must be square, symmetric to 1e-14
    /// (relative to its largest entry) and have a positive diagonal.
    pub fn from_matrix(matrix: DMatrix<f64>, meta: ModelMeta) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        if matrix.nrows() == 0 {
            return Err(Error::domain("covariance matrix must have dimension ≥ 1"));
        }
        let scale = matrix.amax();
        for i in 0..matrix.nrows() {
            if !(matrix[(i, i)] > 0.0) {
                return Err(Error::domain(format!("diagonal entry {i} is not positive")));
            }
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-14 * scale {
                    return Err(Error::domain(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(CovarianceMatrix { matrix, meta })
    }

    fn from_fn<F>(dim: usize, meta: ModelMeta, exec: Exec, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync + Send,
    {
        let rows = exec.map(dim, |i| (0..=i).map(|j| f(i, j)).collect::<Vec<_>>());
        let mut matrix = DMatrix::zeros(dim, dim);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                matrix[(i, j)] = v;
                matrix[(j, i)] = v;
            }
        }
        CovarianceMatrix { matrix, meta }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).collect()
    }

    /// Cholesky factorization under the jitter policy.
    pub fn factor(self) -> Result<CovarianceModel> {
        CovarianceModel::factor(self)
    }
}

/// Covariance matrix of temporal increments of `u^{c,Σ}` on the `n`-grid:
/// `(Σ²/|c|)·increment_cov(h, n, i, j)`.
pub fn temporal_covariance(h: HurstParam, n: usize, params: PhysicalParams, exec: Exec) -> Result<CovarianceMatrix> {
    if n == 0 {
        return Err(Error::domain("grid size must be ≥ 1"));
    }
    let scale = params.variance_scale();
    let hv = h.value();
    let meta = ModelMeta::new(ModelKind::Temporal { h: hv, n }, params);
    Ok(CovarianceMatrix::from_fn(n, meta, exec, |i, j| {
        scale * kernels::increment_cov_unchecked(hv, n, i, j)
    }))
}

/// Covariance matrix of rectangular increments of `u^{c,Σ}` at `H = 1/2`,
/// built from the field covariance. Requires the grid to be admissible for
/// the given wave speed.
pub fn rect_covariance(grid: RectGrid, params: PhysicalParams, exec: Exec) -> Result<CovarianceMatrix> {
    grid.check_admissible(params.c)?;
    let scale = params.variance_scale();
    let space_scale = params.c.abs();
    let meta = ModelMeta::new(
        ModelKind::Rectangular { n: grid.n, m: grid.m, alpha: grid.alpha },
        params,
    );
    let m = grid.m;
    Ok(CovarianceMatrix::from_fn(grid.cells(), meta, exec, |a, b| {
        let (i, j) = (a / m, a % m);
        let (k, l) = (b / m, b % m);
        scale * kernels::rect_increment_cov_expanded_unchecked(&grid, space_scale, i, j, k, l)
    }))
}

/// Covariance of the spatial increments `u(t, (i+1)/n) - u(t, i/n)` of
/// `u^{c,Σ}` at a fixed time `t > 0`, driven by space-time white noise.
pub fn spatial_slice_covariance(n: usize, t: f64, params: PhysicalParams, exec: Exec) -> Result<CovarianceMatrix> {
    if n == 0 {
        return Err(Error::domain("grid size must be ≥ 1"));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("observation time must be positive, got {t}")));
    }
    let scale = params.variance_scale();
    let dx = 1.0 / (n as f64 * params.c.abs());
    let meta = ModelMeta::new(ModelKind::SpatialSlice { n, t }, params);
    let point = |i: usize| kernels::SpaceTimePoint { t, x: i as f64 * dx };
    Ok(CovarianceMatrix::from_fn(n, meta, exec, |i, j| {
        let f = |a: usize, b: usize| kernels::field_cov_white(point(a), point(b));
        scale * (f(i + 1, j + 1) - f(i + 1, j) - f(i, j + 1) + f(i, j))
    }))
}

pub fn build_temporal_model(h: HurstParam, n: usize, params: PhysicalParams) -> Result<CovarianceModel> {
    temporal_covariance(h, n, params, Exec::default())?.factor()
}

pub fn build_rect_model(grid: RectGrid, params: PhysicalParams) -> Result<CovarianceModel> {
    rect_covariance(grid, params, Exec::default())?.factor()
}

pub fn build_spatial_slice_model(n: usize, t: f64, params: PhysicalParams) -> Result<CovarianceModel> {
    spatial_slice_covariance(n, t, params, Exec::default())?.factor()
}

/// Identifies one replication's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replication_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, replication_index: u64) -> Self {
        SeedSpec { master_seed, replication_index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.replication_index);
        rng
    }
}

/// Replication-major block of sampled increment vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Samples {
    pub fn reps(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn replication(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }
}

/// Factored covariance model, immutable and shareable across workers.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    cov: CovarianceMatrix,
    /// Packed lower triangle, row `i` starting at `i(i+1)/2`.
    factor: Vec<f64>,
}

impl CovarianceModel {
    pub fn factor(mut cov: CovarianceMatrix) -> Result<Self> {
        FACTORIZATIONS.with(|c| c.set(c.get() + 1));
        let dim = cov.dim();
        let mean_diag = cov.matrix.diagonal().mean();
        let mut attempt = nalgebra::linalg::Cholesky::new(cov.matrix.clone());
        let mut jitter = 0.0;
        for eps in JITTER_LEVELS {
            if attempt.is_some() {
                break;
            }
            jitter = eps * mean_diag;
            let mut m = cov.matrix.clone();
            for i in 0..dim {
                m[(i, i)] += jitter;
            }
            attempt = nalgebra::linalg::Cholesky::new(m);
        }
        let chol = attempt.ok_or(Error::NotPositiveDefinite {
            max_jitter: JITTER_LEVELS[JITTER_LEVELS.len() - 1] * mean_diag,
        })?;
        cov.meta.jitter = jitter;
        let l = chol.l();
        let mut factor = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in 0..=i {
                factor.push(l[(i, j)]);
            }
        }
        Ok(CovarianceModel { cov, factor })
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn covariance(&self) -> &CovarianceMatrix {
        &self.cov
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.cov.meta
    }

    /// Row `i` of the lower-triangular factor (entries `0..=i`).
    pub fn factor_row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.factor[start..start + i + 1]
    }

    /// Smallest diagonal entry of the factor.
    pub fn min_factor_diagonal(&self) -> f64 {
        (0..self.dim()).map(|i| self.factor_row(i)[i]).fold(f64::INFINITY, f64::min)
    }

    /// `‖L·Lᵀ - C‖_F / ‖C‖_F`, with `C` the unjittered matrix.
    pub fn reconstruction_error(&self) -> f64 {
        let dim = self.dim();
        let mut diff = 0.0;
        for i in 0..dim {
            let ri = self.factor_row(i);
            for j in 0..=i {
                let rj = self.factor_row(j);
                let v: f64 = ri[..=j].iter().zip(rj).map(|(a, b)| a * b).sum();
                let d = v - self.cov.matrix[(i, j)];
                diff += if i == j { d * d } else { 2.0 * d * d };
            }
        }
        diff.sqrt() / self.cov.matrix.norm()
    }

    /// Draws the replication identified by `seed` into `out`, using `z` as
    /// scratch for the standard normals.
    pub fn sample_into(&self, seed: SeedSpec, z: &mut [f64], out: &mut [f64]) {
        let dim = self.dim();
        assert_eq!(z.len(), dim);
        assert_eq!(out.len(), dim);
        let mut rng = seed.rng();
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.factor_row(i).iter().zip(&z[..=i]).map(|(a, b)| a * b).sum();
        }
    }

    pub fn sample_one(&self, seed: SeedSpec) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        let mut out = vec![0.0; self.dim()];
        self.sample_into(seed, &mut z, &mut out);
        out
    }

    /// Samples `reps` replications under `master_seed` and evaluates `f` on
    /// each without storing the increments; results are in replication order.
    pub fn map_replications<T, F>(&self, reps: usize, master_seed: u64, exec: Exec, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &[f64]) -> T + Sync + Send,
    {
        let dim = self.dim();
        exec.map(reps, |r| {
            let mut z = vec![0.0; dim];
            let mut out = vec![0.0; dim];
            self.sample_into(SeedSpec::new(master_seed, r as u64), &mut z, &mut out);
            f(r, &out)
        })
    }

    pub fn sample_increments(&self, reps: usize, master_seed: u64, exec: Exec) -> Samples {
        let rows = self.map_replications(reps, master_seed, exec, |_, x| x.to_vec());
        Samples { dim: self.dim(), data: rows.concat() }
    }
}

/// Cumulative sums of an increment vector: path levels `u(t_1), …, u(t_n)`
/// with `u(0) = 0`.
pub fn levels_from_increments(increments: &[f64]) -> Vec<f64> {
    increments
        .iter()
        .scan(0.0, |acc, d| {
            *acc += d;
            Some(*acc)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn temporal_model_white_n2() {
        let m = build_temporal_model(h(0.5), 2, PhysicalParams::default()).unwrap();
        let c = m.covariance();
        assert_relative_eq!(c.get(0, 0), 1.0 / 16.0, epsilon = 1e-16);
        assert_relative_eq!(c.get(1, 1), 3.0 / 16.0, epsilon = 1e-16);
        assert!(c.get(0, 1).abs() < 1e-17);

        let scaled = build_temporal_model(h(0.5), 2, PhysicalParams::new(4.0, 1.0).unwrap()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(scaled.covariance().get(i, j), c.get(i, j) / 4.0, epsilon = 1e-18);
            }
        }
    }

    #[test]
    fn temporal_model_is_positive_definite() {
        let m = build_temporal_model(h(0.7), 64, PhysicalParams::default()).unwrap();
        assert!(m.min_factor_diagonal() > 0.0);
        assert_eq!(m.meta().jitter, 0.0);
        assert!(m.reconstruction_error() < 1e-8);
    }

    #[test]
    fn rect_model_matches_closed_form() {
        let grid = RectGrid::new(3, 4, 2.5).unwrap();
        let model = build_rect_model(grid, PhysicalParams::default()).unwrap();
        let cov = model.covariance();
        for a in 0..12 {
            for b in 0..12 {
                let expect = kernels::rect_increment_cov(&grid, a / 4, a % 4, b / 4, b % 4).unwrap();
                assert_relative_eq!(cov.get(a, b), expect, epsilon = 1e-18, max_relative = 1e-10);
            }
        }
        assert!(model.reconstruction_error() < 1e-8);
    }

    #[test]
    fn rect_model_rejects_inadmissible() {
        let grid = RectGrid::new(3, 4, 1.0).unwrap();
        assert!(matches!(build_rect_model(grid, PhysicalParams::default()), Err(Error::Constraint(_))));
        // admissible at c = 1, not at c = 40
        let grid = RectGrid::new(3, 4, 2.5).unwrap();
        assert!(matches!(
            build_rect_model(grid, PhysicalParams::new(40.0, 1.0).unwrap()),
            Err(Error::Constraint(_))
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = build_temporal_model(h(0.65), 16, PhysicalParams::default()).unwrap();
        let a = m.sample_increments(50, 11, Exec::Sequential);
        let b = m.sample_increments(50, 11, Exec::Parallel);
        let c = m.sample_increments(50, 12, Exec::Sequential);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.replication(7), m.sample_one(SeedSpec::new(11, 7)).as_slice());
    }

    #[test]
    fn identity_model_standard_normal() {
        let cov = CovarianceMatrix::from_matrix(
            DMatrix::identity(1, 1),
            ModelMeta::new(ModelKind::Custom, PhysicalParams::default()),
        )
        .unwrap();
        let m = cov.factor().unwrap();
        let reps = 100_000;
        let s = m.sample_increments(reps, 3, Exec::default());
        let mean = s.data.iter().sum::<f64>() / reps as f64;
        let var = s.data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!(mean.abs() < 4.0 / (reps as f64).sqrt());
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn jitter_rescues_semidefinite_matrix() {
        // rank-one matrix: singular, factorable only with jitter
        let v = DMatrix::from_fn(3, 3, |_, _| 1.0);
        let cov = CovarianceMatrix::from_matrix(v, ModelMeta::new(ModelKind::Custom, PhysicalParams::default())).unwrap();
        let m = cov.factor().unwrap();
        assert!(m.meta().jitter > 0.0);
        assert!(m.reconstruction_error() < 1e-8);

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let cov = CovarianceMatrix::from_matrix(bad, ModelMeta::new(ModelKind::Custom, PhysicalParams::default())).unwrap();
        assert!(matches!(cov.factor(), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn from_matrix_validation() {
        let meta = ModelMeta::new(ModelKind::Custom, PhysicalParams::default());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(CovarianceMatrix::from_matrix(asym, meta).is_err());
        let zero_diag = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!(CovarianceMatrix::from_matrix(zero_diag, meta).is_err());
    }

    #[test]
    fn factor_counter_counts_once() {
        let before = factorization_count();
        let m = build_temporal_model(h(0.6), 32, PhysicalParams::default()).unwrap();
        let _ = m.map_replications(10_000, 5, Exec::Sequential, |_, x| x[0]);
        assert_eq!(factorization_count() - before, 1);
    }

    #[test]
    fn spatial_slice_white() {
        // E[(u(t,x+δ) - u(t,x))²] = tδ/2 - δ²/8 for the unit field
        let cov = spatial_slice_covariance(8, 1.0, PhysicalParams::default(), Exec::Sequential).unwrap();
        let d = 1.0 / 8.0;
        assert_relative_eq!(cov.get(3, 3), d / 2.0 - d * d / 8.0, max_relative = 1e-12);
        assert!(cov.factor().is_ok());
    }

    #[test]
    fn levels() {
        assert_eq!(levels_from_increments(&[1.0, 2.0, -0.5]), vec![1.0, 3.0, 2.5]);
    }
}
