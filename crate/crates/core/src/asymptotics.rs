//! Limit constants of the temporal quadratic variation.
//!
//! * `H < 3/4`: `N^{4H+1}·E V_N² → σ² = (1/6)·Σ_{k∈ℤ} φ(k)²` and the
//!   standardized variation is asymptotically normal ([`sigma2`], [`clt_rate`]).
//! * `H > 3/4`: `N⁴·E V_N² → k` ([`limiting_variance_high`]) and `N²V_N/√k`
//!   converges to a second-chaos law described by its cumulants
//!   ([`limiting_cumulant`]).

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::CancelToken;
use crate::kernels::{self, HurstParam, PhysicalParams, Regime};
use crate::sampler::{self, temporal_wick_second_moment};

/// Largest number of directly summed terms in [`sigma2`].
pub const MAX_TERMS: u64 = 10_000_000;
/// Largest mesh accepted by [`limiting_cumulant`].
pub const MAX_MESH: usize = 8192;

/// Value of a series evaluated as a partial sum plus an asymptotic tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    /// `partial_sum + tail`.
    pub value: f64,
    pub partial_sum: f64,
    /// Contribution of the terms beyond `truncation`, from the large-lag
    /// expansion.
    pub tail: f64,
    /// Largest lag summed directly.
    pub truncation: u64,
    /// Bound on the error of `tail`.
    pub tail_bound: f64,
}

fn binomial(a: f64, m: u32) -> f64 {
    (0..m).fold(1.0, |acc, i| acc * (a - i as f64) / (i as f64 + 1.0))
}

/// Bernoulli numbers `B_2, B_4, …, B_12`.
const BERNOULLI_EVEN: [f64; 6] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
];

/// `Σ_{k>K} k^s` for `s < -1` by Euler–Maclaurin at `K`, with the size of
/// the first omitted correction.
fn power_tail(s: f64, k: f64) -> (f64, f64) {
    let mut sum = -k.powf(s + 1.0) / (s + 1.0) - 0.5 * k.powf(s);
    // derivative (2j-1) of x^s at K, tracked as falling factorial × power
    let mut falling = s;
    let mut fact = 2.0;
    let mut last = 0.0;
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let order = 2 * j + 1;
        let term = b / fact * falling * k.powf(s - order as f64);
        if j + 1 == BERNOULLI_EVEN.len() {
            last = term.abs();
            break;
        }
        sum -= term;
        falling *= (s - order as f64) * (s - order as f64 - 1.0);
        fact *= ((order + 2) * (order + 3)) as f64;
    }
    (sum, last)
}

/// `Σ_{k>K} φ(k)²` from `φ(k) = Σ_{m≥1} C(2H,2m)·k^{2H-2m}` truncated at
/// `k^{4H-2P}`, with an error bound.
fn phi_squared_tail(h: f64, k: u64, order: u32) -> (f64, f64) {
    let b: Vec<f64> = (0..=order).map(|m| if m == 0 { 0.0 } else { binomial(2.0 * h, 2 * m) }).collect();
    let kf = k as f64;
    let mut tail = 0.0;
    let mut bound = 0.0;
    for p in 2..=order {
        let c: f64 = (1..p).map(|m| b[m as usize] * b[(p - m) as usize]).sum();
        let (t, err) = power_tail(4.0 * h - 2.0 * p as f64, kf);
        tail += c * t;
        bound += c.abs() * err;
    }
    // Σ_m |C(2H,2m)| ≤ 2^{2H} < 4 bounds every omitted coefficient by 16
    let s = 4.0 * h - 2.0 * (order + 1) as f64;
    bound += 16.0 * kf.powf(s + 1.0) / (-(s + 1.0)) / (1.0 - kf.powi(-2));
    (tail, bound)
}

/// `(1/6)·Σ_{|k|≤K} φ(k)²`.
pub fn sigma2_partial_sum(h: HurstParam, k_max: u64) -> f64 {
    let hv = h.value();
    let off: f64 = (1..=k_max).map(|k| kernels::phi_unchecked(hv, k).powi(2)).sum();
    (1.0 + 2.0 * off) / 6.0
}

/// `(H²/24)·Σ_{|j|≤K} ψ₂(|j|)²`, with `ψ₂(0) = 2/H`.
pub fn sigma2_psi2_form(h: HurstParam, k_max: u64) -> f64 {
    let hv = h.value();
    let off: f64 = (1..=k_max).map(|k| kernels::psi2_unchecked(hv, k).powi(2)).sum();
    let zero = kernels::psi2_unchecked(hv, 0);
    hv * hv / 24.0 * (zero * zero + 2.0 * off)
}

/// `σ² = (1/6)·Σ_{k∈ℤ} φ(k)²` with `tail_bound ≤ tol`.
pub fn sigma2(h: HurstParam, tol: f64) -> Result<SeriesValue> {
    sigma2_with(h, tol, None)
}

pub fn sigma2_with(h: HurstParam, tol: f64, cancel: Option<&CancelToken>) -> Result<SeriesValue> {
    if h.regime() != Regime::Central {
        return Err(Error::domain(format!("σ² series diverges for H = {h} > 3/4")));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    if h.is_white() {
        let v = 1.0 / 6.0;
        return Ok(SeriesValue { value: v, partial_sum: v, tail: 0.0, truncation: 0, tail_bound: 0.0 });
    }
    let hv = h.value();
    let mut k_max = 1000u64;
    let mut partial = 0.0;
    let mut summed = 0u64;
    while k_max <= MAX_TERMS {
        for chunk_start in (summed + 1..=k_max).step_by(1 << 16) {
            if let Some(c) = cancel {
                c.check()?;
            }
            let hi = (chunk_start + (1 << 16) - 1).min(k_max);
            partial += (chunk_start..=hi).map(|k| kernels::phi_unchecked(hv, k).powi(2)).sum::<f64>();
        }
        summed = k_max;
        for order in [6u32, 10, 14] {
            let (tail, bound) = phi_squared_tail(hv, k_max, order);
            let bound = bound / 3.0;
            if bound <= tol {
                let partial_sum = (1.0 + 2.0 * partial) / 6.0;
                let tail = tail / 3.0;
                return Ok(SeriesValue { value: partial_sum + tail, partial_sum, tail, truncation: k_max, tail_bound: bound });
            }
        }
        k_max *= 10;
    }
    Err(Error::NonConvergence(format!(
        "σ² tail bound above {tol} after {MAX_TERMS} terms at H = {h}"
    )))
}

/// `H(2H-1)/(4(4H-1)(4H-3))`, the leading-order evaluation of `lim N⁴·E V_N²`.
pub fn high_regime_closed_form(h: HurstParam) -> f64 {
    let hv = h.value();
    hv * (2.0 * hv - 1.0) / (4.0 * (4.0 * hv - 1.0) * (4.0 * hv - 3.0))
}

/// Finite-`N` three-sum expression for `N⁴·E V_N²` over lags `k ≥ 1`:
/// `(H²/4N^{4H})·Σ_k [ψ₁²·#{i} + 2ψ₁ψ₂·Σi + ψ₂²·Σi²]` with `i` from `k+1`
/// to `N-1`.
pub fn high_regime_three_sum(h: HurstParam, n: usize) -> f64 {
    let hv = h.value();
    let nf = n as f64;
    let top = nf - 1.0;
    let s1 = |k: f64| (top * (top + 1.0) - k * (k + 1.0)) / 2.0;
    let s2 = |k: f64| (top * (top + 1.0) * (2.0 * top + 1.0) - k * (k + 1.0) * (2.0 * k + 1.0)) / 6.0;
    let mut acc = 0.0;
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        let a = kernels::psi1_unchecked(hv, k as u64);
        let b = kernels::psi2_unchecked(hv, k as u64);
        acc += a * a * (top - kf) + 2.0 * a * b * s1(kf) + b * b * s2(kf);
    }
    hv * hv / (4.0 * nf.powf(4.0 * hv)) * acc
}

/// Result of extrapolating `N⁴·E V_N²` for `H > 3/4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighRegimeConstant {
    /// Last Richardson extrapolant.
    pub value: f64,
    /// `(N, N⁴·E V_N²)` for `N = 2⁸, 2⁹, …`.
    pub sequence: Vec<(usize, f64)>,
    pub extrapolants: Vec<f64>,
    /// Correction exponent `β` in `a_N = k + c·N^{-β}`.
    pub exponent: f64,
    pub exponent_fitted: bool,
    /// Largest relative change between the last two extrapolants.
    pub last_relative_change: f64,
    pub closed_form: f64,
    /// [`high_regime_three_sum`] at the largest `N`.
    pub three_sum: f64,
}

fn richardson(seq: &[(usize, f64)], beta: f64) -> Vec<f64> {
    let f = 2f64.powf(beta);
    seq.windows(2).map(|w| (f * w[1].1 - w[0].1) / (f - 1.0)).collect()
}

/// Richardson extrapolants with the exponent fitted separately on every
/// window of three terms, plus the last fitted exponent. `None` if some
/// window is not geometrically convergent.
fn aitken(seq: &[(usize, f64)]) -> Option<(Vec<f64>, f64)> {
    let mut out = Vec::new();
    let mut beta = f64::NAN;
    for w in seq.windows(3) {
        let (d1, d2) = (w[1].1 - w[0].1, w[2].1 - w[1].1);
        beta = (d1 / d2).log2();
        if !beta.is_finite() || beta <= 0.0 {
            return None;
        }
        let f = 2f64.powf(beta);
        out.push((f * w[2].1 - w[1].1) / (f - 1.0));
    }
    Some((out, beta))
}

fn spread(xs: &[f64]) -> f64 {
    let tail = &xs[xs.len().saturating_sub(3)..];
    let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / min.abs()
}

/// Numerical limit of `N⁴·E V_N²` over `N = 2⁸ … n_max` (powers of two),
/// Richardson-extrapolated with correction order `N^{-(4H-3)}` or a fitted
/// exponent, whichever gives the tighter extrapolants.
pub fn limiting_variance_high(h: HurstParam, n_max: usize) -> Result<HighRegimeConstant> {
    if h.regime() != Regime::NonCentral {
        return Err(Error::domain(format!("high-regime normalizer needs H > 3/4, got {h}")));
    }
    if n_max < 1 << 10 {
        return Err(Error::domain("n_max must be at least 1024"));
    }
    let mut sequence = Vec::new();
    let mut n = 1usize << 8;
    while n <= n_max {
        let v = temporal_wick_second_moment(h, n, PhysicalParams::default());
        sequence.push((n, (n as f64).powi(4) * v));
        n *= 2;
    }
    let assumed = 4.0 * h.value() - 3.0;
    let by_assumed = richardson(&sequence, assumed);
    let (extrapolants, exponent, exponent_fitted) = match aitken(&sequence) {
        Some((by_fitted, fitted)) if by_fitted.len() >= 2 && spread(&by_fitted) < spread(&by_assumed) => {
            (by_fitted, fitted, true)
        }
        _ => (by_assumed, assumed, false),
    };
    let last = extrapolants[extrapolants.len() - 1];
    let prev = extrapolants[extrapolants.len() - 2];
    let last_relative_change = ((last - prev) / last).abs();
    let report = HighRegimeConstant {
        value: last,
        three_sum: high_regime_three_sum(h, sequence[sequence.len() - 1].0),
        sequence,
        extrapolants,
        exponent,
        exponent_fitted,
        last_relative_change,
        closed_form: high_regime_closed_form(h),
    };
    if last_relative_change > 0.05 {
        return Err(Error::NonConvergence(format!(
            "successive extrapolants {prev} and {last} differ by {:.1}%",
            100.0 * last_relative_change
        )));
    }
    Ok(report)
}

/// Exact integral of `|x-y|^a·min(x,y)` over the cell `[x0,x0+h]×[y0,y0+h]`.
fn kernel_cell_integral(a: f64, h: f64, x0: f64, y0: f64) -> f64 {
    if x0 == y0 {
        let diag = x0 * h.powf(a + 2.0) / ((a + 1.0) * (a + 2.0))
            + h.powf(a + 3.0) / ((a + 1.0) * (a + 2.0) * (a + 3.0));
        return 2.0 * diag;
    }
    // by symmetry take x above y, so min(x, y) = y
    let (x0, y0) = if x0 > y0 { (x0, y0) } else { (y0, x0) };
    let g = |x: f64, y: f64| {
        let d = x - y;
        let d2 = if d > 0.0 { d.powf(a + 2.0) } else { 0.0 };
        let d3 = if d > 0.0 { d.powf(a + 3.0) } else { 0.0 };
        -(x * d2 / (a + 2.0) - d3 / (a + 3.0)) / (a + 1.0)
    };
    let (x1, y1) = (x0 + h, y0 + h);
    g(x1, y1) - g(x1, y0) - g(x0, y1) + g(x0, y0)
}

/// `mesh × mesh` transfer matrix: cell integrals of
/// `K(x,y) = |x-y|^{2H-2}·min(x,y)` divided by the cell width, so that
/// `tr(Aᵐ)` approximates the cyclic integral `∫_{[0,1]ᵐ} Π K(xᵢ, xᵢ₊₁)`.
pub fn kernel_transfer_matrix(h: HurstParam, mesh: usize) -> DMatrix<f64> {
    let a = 2.0 * h.value() - 2.0;
    let w = 1.0 / mesh as f64;
    let mut m = DMatrix::zeros(mesh, mesh);
    for p in 0..mesh {
        for q in 0..=p {
            let v = kernel_cell_integral(a, w, p as f64 * w, q as f64 * w) / w;
            m[(p, q)] = v;
            m[(q, p)] = v;
        }
    }
    m
}

/// Cyclic integral `∫_{[0,1]ᵐ} Π K(xᵢ, xᵢ₊₁)` on a mesh.
pub fn cyclic_kernel_integral(h: HurstParam, m: u32, mesh: usize) -> f64 {
    sampler::trace_power(&kernel_transfer_matrix(h, mesh), m)
}

/// `m`-th cumulant of the limit of `N²V_N/√k`:
/// `(1/2)(m-1)!·(H(2H-1))ᵐ·k^{-m/2}·∫_{[0,1]ᵐ} Π K(xᵢ, xᵢ₊₁)`.
pub fn limiting_cumulant(h: HurstParam, m: u32, mesh: usize, k_norm: f64) -> Result<f64> {
    limiting_cumulant_with(h, m, mesh, k_norm, None)
}

pub fn limiting_cumulant_with(
    h: HurstParam,
    m: u32,
    mesh: usize,
    k_norm: f64,
    cancel: Option<&CancelToken>,
) -> Result<f64> {
    if h.regime() != Regime::NonCentral {
        return Err(Error::domain(format!("limiting cumulants need H > 3/4, got {h}")));
    }
    if m < 3 {
        return Err(Error::domain(format!("cumulant order must be ≥ 3, got {m}")));
    }
    if mesh < 8 {
        return Err(Error::domain(format!("mesh must be ≥ 8, got {mesh}")));
    }
    if mesh > MAX_MESH {
        return Err(Error::domain(format!("mesh {mesh} exceeds the limit {MAX_MESH}")));
    }
    if !(k_norm > 0.0) {
        return Err(Error::domain(format!("normalizer must be positive, got {k_norm}")));
    }
    if let Some(c) = cancel {
        c.check()?;
    }
    let integral = cyclic_kernel_integral(h, m, mesh);
    if let Some(c) = cancel {
        c.check()?;
    }
    let alpha = h.alpha();
    let fact: f64 = (1..m).map(f64::from).product();
    Ok(0.5 * fact * alpha.powi(m as i32) * k_norm.powf(-(m as f64) / 2.0) * integral)
}

/// Berry–Esseen-type rate `N^{exponent}·log^{log_power} N` of the CLT for
/// the standardized temporal variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateDescriptor {
    pub exponent: f64,
    pub log_power: f64,
}

impl fmt::Display for RateDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent == -0.5 {
            write!(f, "N^{{-1/2}}")?;
        } else {
            write!(f, "N^{{{}}}", self.exponent)?;
        }
        if self.log_power == 1.5 {
            write!(f, " log^{{3/2}} N")?;
        } else if self.log_power != 0.0 {
            write!(f, " log^{{{}}} N", self.log_power)?;
        }
        Ok(())
    }
}

pub fn clt_rate(h: HurstParam) -> Result<RateDescriptor> {
    let hv = h.value();
    if h.regime() != Regime::Central {
        return Err(Error::domain(format!("no normal limit for H = {h} > 3/4")));
    }
    let rate = if (hv - 0.625).abs() < 1e-12 {
        RateDescriptor { exponent: -0.5, log_power: 1.5 }
    } else if hv < 0.625 {
        RateDescriptor { exponent: -0.5, log_power: 0.0 }
    } else {
        RateDescriptor { exponent: 4.0 * hv - 3.0, log_power: 0.0 }
    };
    Ok(rate)
}
