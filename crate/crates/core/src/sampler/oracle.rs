//! Exact moments and cumulants of centered Gaussian quadratic forms.
//!
//! For `X ~ N(0, C)` and `V = (1/norm)·Σ(Xᵢ² - E Xᵢ²)`:
//! `E V² = (2/norm²)·Σ C²ᵢⱼ` and `κ_m(V) = 2^{m-1}(m-1)!·tr(Cᵐ)/normᵐ`.

use nalgebra::DMatrix;

use super::{CovarianceMatrix, CovarianceModel};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kernels::{self, HurstParam, PhysicalParams};

/// Anything that exposes a dense covariance matrix.
pub trait CovarianceSource {
    fn cov_matrix(&self) -> &DMatrix<f64>;
}

impl CovarianceSource for DMatrix<f64> {
    fn cov_matrix(&self) -> &DMatrix<f64> {
        self
    }
}

impl CovarianceSource for CovarianceMatrix {
    fn cov_matrix(&self) -> &DMatrix<f64> {
        self.matrix()
    }
}

impl CovarianceSource for CovarianceModel {
    fn cov_matrix(&self) -> &DMatrix<f64> {
        self.covariance().matrix()
    }
}

/// `E V²` from the Wick formula.
pub fn wick_second_moment<C: CovarianceSource + ?Sized>(cov: &C, norm: f64) -> f64 {
    let m = cov.cov_matrix();
    2.0 * m.norm_squared() / (norm * norm)
}

/// `tr(Cᵐ)` by repeated multiplication: `‖C^r‖²_F` for `m = 2r`,
/// `⟨C^r, C^{r+1}⟩_F` for `m = 2r + 1`.
pub fn trace_power<C: CovarianceSource + ?Sized>(cov: &C, m: u32) -> f64 {
    let c = cov.cov_matrix();
    match m {
        0 => c.nrows() as f64,
        1 => c.trace(),
        _ => {
            let r = m / 2;
            let mut p = c.clone();
            for _ in 1..r {
                p = &p * c;
            }
            if m % 2 == 0 {
                p.norm_squared()
            } else {
                let q = &p * c;
                p.dot(&q)
            }
        }
    }
}

fn factorial(m: u32) -> f64 {
    (1..=m).map(f64::from).product()
}

/// `κ_m` of the centered quadratic form with divisor `norm`.
pub fn quadratic_form_cumulant<C: CovarianceSource + ?Sized>(cov: &C, m: u32, norm: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::domain(format!("cumulant order must be ≥ 2, got {m}")));
    }
    let coef = 2f64.powi(m as i32 - 1) * factorial(m - 1);
    Ok(coef * trace_power(cov, m) / norm.powi(m as i32))
}

/// `κ_m / κ_2^{m/2}`, the cumulant of the standardized quadratic form.
pub fn standardized_cumulant<C: CovarianceSource + ?Sized>(cov: &C, m: u32) -> Result<f64> {
    let km = quadratic_form_cumulant(cov, m, 1.0)?;
    let k2 = quadratic_form_cumulant(cov, 2, 1.0)?;
    if k2 <= 0.0 {
        return Err(Error::Degenerate("quadratic form has zero variance".into()));
    }
    Ok(km / k2.powf(m as f64 / 2.0))
}

/// `E V_N²` for the temporal model with `norm = n`, in `O(n)` operations.
///
/// Off-diagonal entries at lag `k` are `κ·(ψ₁(k) + (i+1)ψ₂(k))` with
/// `κ = H/(4n^{2H+1})`, so the sum over each lag collapses to power sums
/// of the row index.
pub fn temporal_wick_second_moment(h: HurstParam, n: usize, params: PhysicalParams) -> f64 {
    let hv = h.value();
    let nf = n as f64;
    let scale = params.variance_scale();
    let diag: f64 = (0..n)
        .map(|i| kernels::increment_variance_unchecked(hv, n, i).powi(2))
        .sum();
    let kappa = hv / (4.0 * nf.powf(2.0 * hv + 1.0));
    let power_sum1 = |k: f64| (nf * (nf + 1.0) - k * (k + 1.0)) / 2.0;
    let power_sum2 = |k: f64| (nf * (nf + 1.0) * (2.0 * nf + 1.0) - k * (k + 1.0) * (2.0 * k + 1.0)) / 6.0;
    let mut off = 0.0;
    for k in 1..n {
        let a = kernels::psi1_unchecked(hv, k as u64);
        let b = kernels::psi2_unchecked(hv, k as u64);
        let kf = k as f64;
        off += (nf - kf) * a * a + 2.0 * a * b * power_sum1(kf) + b * b * power_sum2(kf);
    }
    let sum_sq = diag + 2.0 * kappa * kappa * off;
    2.0 * scale * scale * sum_sq / (nf * nf)
}

/// `E V_N²` for the temporal model by direct `O(n²)` summation of the
/// squared increment covariances, without storing the matrix.
pub fn wick_second_moment_matrix_free(h: HurstParam, n: usize, params: PhysicalParams, exec: Exec) -> f64 {
    let hv = h.value();
    let scale = params.variance_scale();
    let sum_sq = exec.sum(n, |i| {
        let d = kernels::increment_variance_unchecked(hv, n, i);
        let row: f64 = (0..i)
            .map(|j| kernels::increment_cov_unchecked(hv, n, i, j).powi(2))
            .sum();
        d * d + 2.0 * row
    });
    let nf = n as f64;
    2.0 * scale * scale * sum_sq / (nf * nf)
}
