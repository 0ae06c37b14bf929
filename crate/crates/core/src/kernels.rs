//! Closed-form covariances of the wave-equation solution field.
//!
//! The field is `u(t, x) = ∫∫ G(t - r, x - y) W(dr, dy)` with the wave kernel
//! `G(t, x) = ½·1{|x| < t}` and a driving noise that is fractional Brownian
//! (Hurst index `H`) in time and white in space. Its covariance at a fixed
//! space point is
//!
//! ```text
//! E[u(t,x) u(s,x)] = α_H/4 ∫₀ᵗ∫₀ˢ 2·min(t-u, s-v)·|u-v|^{2H-2} dv du,   α_H = H(2H-1)
//! ```
//!
//! which integrates to the closed form in [`temporal_cov`]. At `H = 1/2` the
//! noise is white in both variables and the full space-time covariance is
//! [`field_cov_white`].
//!
//! Temporal increments are indexed from zero: increment `i` of an `n`-point
//! grid is `u((i+1)/n) - u(i/n)`. The lag-based closed form
//! ([`increment_cov_psi`]) is usually written for increments
//! `u(i'/n) - u((i'-1)/n)`; the shift is `i' = i + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this lag the ψ/φ sequences are evaluated directly; above it through
/// the even binomial series, which avoids the cancellation in the second
/// difference.
const SERIES_LAG: u64 = 16;

/// Hurst index of the temporal noise, `1/2 ≤ H < 1`, `H ≠ 3/4`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParam(f64);

/// Which side of the `H = 3/4` threshold a Hurst index lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `H < 3/4`: Gaussian limit for the standardized quadratic variation.
    Central,
    /// `H > 3/4`: second-chaos (non-Gaussian) limit.
    NonCentral,
}

impl HurstParam {
    pub const WHITE: HurstParam = HurstParam(0.5);

    pub fn new(h: f64) -> Result<Self> {
        if !h.is_finite() || !(0.5..1.0).contains(&h) {
            return Err(Error::domain(format!("Hurst index {h} outside [1/2, 1)")));
        }
        if (h - 0.75).abs() < 1e-12 {
            return Err(Error::domain(
                "Hurst index 3/4 is the logarithmic boundary case and is not supported",
            ));
        }
        Ok(HurstParam(h))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `α_H = H(2H - 1)`, the constant of the fractional isometry.
    pub fn alpha(self) -> f64 {
        self.0 * (2.0 * self.0 - 1.0)
    }

    pub fn regime(self) -> Regime {
        if self.0 < 0.75 {
            Regime::Central
        } else {
            Regime::NonCentral
        }
    }

    pub fn is_white(self) -> bool {
        self.0 == 0.5
    }
}

impl TryFrom<f64> for HurstParam {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        HurstParam::new(h)
    }
}

impl From<HurstParam> for f64 {
    fn from(h: HurstParam) -> f64 {
        h.0
    }
}

impl std::fmt::Display for HurstParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub t: f64,
    pub x: f64,
}

impl SpaceTimePoint {
    pub fn new(t: f64, x: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() || !x.is_finite() {
            return Err(Error::domain(format!("invalid space-time point (t={t}, x={x})")));
        }
        Ok(SpaceTimePoint { t, x })
    }
}

/// Wave speed `c` (the equation reads `u_tt = c² u_xx + Σ Ẇ`) and noise
/// volatility `Σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub c: f64,
    pub sigma_vol: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams { c: 1.0, sigma_vol: 1.0 }
    }
}

impl PhysicalParams {
    pub fn new(c: f64, sigma_vol: f64) -> Result<Self> {
        if !c.is_finite() || c == 0.0 {
            return Err(Error::domain(format!("wave speed must be finite and nonzero, got {c}")));
        }
        if !sigma_vol.is_finite() || sigma_vol <= 0.0 {
            return Err(Error::domain(format!("volatility must be positive, got {sigma_vol}")));
        }
        Ok(PhysicalParams { c, sigma_vol })
    }

    /// Factor `Σ²/|c|` relating the covariance of `u^{c,Σ}` at a fixed space
    /// point to that of the unit-parameter field.
    pub fn variance_scale(&self) -> f64 {
        self.sigma_vol * self.sigma_vol / self.c.abs()
    }

    /// `p = c Σ⁻²`, the only combination identifiable from temporal data.
    pub fn p(&self) -> f64 {
        self.c.abs() / (self.sigma_vol * self.sigma_vol)
    }

    /// `q = c² Σ⁻²`.
    pub fn q(&self) -> f64 {
        self.c * self.c / (self.sigma_vol * self.sigma_vol)
    }
}

/// Space-time observation grid: `x_i = i/n` (`i = 0..=n`) and
/// `t_j = j·m^{-α}` (`j = 0..=m`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectGrid {
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
}

impl RectGrid {
    pub fn new(n: usize, m: usize, alpha: f64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::domain("rectangular grid needs n ≥ 1 and m ≥ 1"));
        }
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::domain(format!("grid exponent α must be positive, got {alpha}")));
        }
        Ok(RectGrid { n, m, alpha })
    }

    pub fn space_step(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn time_step(&self) -> f64 {
        (self.m as f64).powf(-self.alpha)
    }

    pub fn cells(&self) -> usize {
        self.n * self.m
    }

    /// Space-major position of cell `(i, j)` (`i` space, `j` time).
    #[inline]
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i * self.m + j
    }

    /// Whether distinct spatial columns are outside each other's light cone
    /// for wave speed `c`: `Δ_N/|c| > 2·δ_M·M`.
    pub fn is_admissible_for(&self, c: f64) -> bool {
        self.space_step() / c.abs() > 2.0 * self.time_step() * self.m as f64
    }

    pub fn is_admissible(&self) -> bool {
        self.is_admissible_for(1.0)
    }

    pub(crate) fn check_admissible(&self, c: f64) -> Result<()> {
        if self.is_admissible_for(c) {
            Ok(())
        } else {
            Err(Error::constraint(format!(
                "grid (n={}, m={}, α={}) violates Δ_N/|c| > 2·δ_M·M for c={c}: {} ≤ {}",
                self.n,
                self.m,
                self.alpha,
                self.space_step() / c.abs(),
                2.0 * self.time_step() * self.m as f64
            )))
        }
    }
}

#[inline]
fn pow_or_zero(base: f64, exponent: f64) -> f64 {
    if base <= 0.0 {
        0.0
    } else {
        (exponent * base.ln()).exp()
    }
}

pub(crate) fn temporal_cov_unchecked(h: f64, t: f64, s: f64) -> f64 {
    let (hi, lo) = if t >= s { (t, s) } else { (s, t) };
    if lo == 0.0 {
        // zero initial condition; the three terms cancel identically
        return 0.0;
    }
    let d = hi - lo;
    let two_h = 2.0 * h;
    (h / 4.0)
        * ((hi.powf(two_h + 1.0) + lo.powf(two_h + 1.0)) / (h * (two_h + 1.0))
            - (2.0 / two_h) * hi * pow_or_zero(d, two_h)
            + (2.0 / (two_h + 1.0)) * pow_or_zero(d, two_h + 1.0))
}

/// `E[u(t,x) u(s,x)]` for the unit-parameter field (independent of `x`).
pub fn temporal_cov(h: HurstParam, t: f64, s: f64) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0) || !t.is_finite() || !s.is_finite() {
        return Err(Error::domain(format!("times must be finite and nonnegative (t={t}, s={s})")));
    }
    Ok(temporal_cov_unchecked(h.value(), t, s))
}

fn check_index(i: usize, n: usize) -> Result<()> {
    if i >= n {
        Err(Error::IndexOutOfRange { index: i, size: n })
    } else {
        Ok(())
    }
}

/// Covariance of increments `i` and `j` on the uniform `n`-grid of `[0, 1]`,
/// by bilinear expansion of [`temporal_cov`].
pub fn increment_cov(h: HurstParam, n: usize, i: usize, j: usize) -> Result<f64> {
    check_index(i, n)?;
    check_index(j, n)?;
    Ok(increment_cov_unchecked(h.value(), n, i, j))
}

pub(crate) fn increment_cov_unchecked(h: f64, n: usize, i: usize, j: usize) -> f64 {
    // Evaluated on the integer grid and rescaled by self-similarity.
    let r = |a: usize, b: usize| temporal_cov_unchecked(h, a as f64, b as f64);
    let raw = r(i + 1, j + 1) - r(i + 1, j) - r(i, j + 1) + r(i, j);
    raw * (n as f64).powf(-(2.0 * h + 1.0))
}

/// Closed-form variance of increment `i`: `(i + 1/(2H+1)) / (2 n^{2H+1})`.
pub fn increment_variance(h: HurstParam, n: usize, i: usize) -> Result<f64> {
    check_index(i, n)?;
    Ok(increment_variance_unchecked(h.value(), n, i))
}

pub(crate) fn increment_variance_unchecked(h: f64, n: usize, i: usize) -> f64 {
    0.5 * (i as f64 + 1.0 / (2.0 * h + 1.0)) * (n as f64).powf(-(2.0 * h + 1.0))
}

/// Covariance of increments through the lag sequences:
/// `H/(4 n^{2H+1}) · (ψ₁(i-j) + (i+1)·ψ₂(i-j))` for `i > j`.
pub fn increment_cov_psi(h: HurstParam, n: usize, i: usize, j: usize) -> Result<f64> {
    check_index(i, n)?;
    check_index(j, n)?;
    if i == j {
        return Ok(increment_variance_unchecked(h.value(), n, i));
    }
    let (hi, lo) = if i > j { (i, j) } else { (j, i) };
    let k = (hi - lo) as u64;
    let hv = h.value();
    let scale = hv / 4.0 * (n as f64).powf(-(2.0 * hv + 1.0));
    Ok(scale * (psi1_unchecked(hv, k) + (hi as f64 + 1.0) * psi2_unchecked(hv, k)))
}

/// `Σ_{r≥1} C(a, 2r) u^{2r} = ((1+u)^a + (1-u)^a)/2 - 1` for small `|u|`.
fn even_binomial_tail(a: f64, u: f64) -> f64 {
    let u2 = u * u;
    let mut coef = 1.0; // C(a, 0)
    let mut pow = 1.0;
    let mut sum = 0.0;
    let mut r = 0.0;
    loop {
        // advance C(a, r) -> C(a, r + 2)
        coef *= (a - r) / (r + 1.0) * (a - r - 1.0) / (r + 2.0);
        r += 2.0;
        pow *= u2;
        let term = coef * pow;
        sum += term;
        if term.abs() <= f64::EPSILON * 1e-3 * sum.abs() || coef == 0.0 || r > 200.0 {
            return sum;
        }
    }
}

fn check_lag(k: u64, min: u64) -> Result<()> {
    if k < min {
        Err(Error::domain(format!("lag {k} below minimum {min}")))
    } else {
        Ok(())
    }
}

/// `ψ₁(k) = (1/H)(k^{2H} - (k-1)^{2H}) - 2/(2H+1)·((k+1)^{2H+1} - 2k^{2H+1} + (k-1)^{2H+1})`, `k ≥ 1`.
pub fn psi1(h: HurstParam, k: u64) -> Result<f64> {
    check_lag(k, 1)?;
    Ok(psi1_unchecked(h.value(), k))
}

pub(crate) fn psi1_unchecked(h: f64, k: u64) -> f64 {
    let two_h = 2.0 * h;
    let kf = k as f64;
    if k < SERIES_LAG {
        let km = (k - 1) as f64;
        (kf.powf(two_h) - pow_or_zero(km, two_h)) / h
            - 2.0 / (two_h + 1.0)
                * ((kf + 1.0).powf(two_h + 1.0) - 2.0 * kf.powf(two_h + 1.0)
                    + pow_or_zero(km, two_h + 1.0))
    } else {
        let u = 1.0 / kf;
        let first = -kf.powf(two_h) * (two_h * (-u).ln_1p()).exp_m1() / h;
        let second = 2.0 / (two_h + 1.0) * kf.powf(two_h + 1.0) * 2.0 * even_binomial_tail(two_h + 1.0, u);
        first - second
    }
}

/// `ψ₂(k) = (1/H)((k+1)^{2H} - 2k^{2H} + (k-1)^{2H})`, `k ≥ 1`.
pub fn psi2(h: HurstParam, k: u64) -> Result<f64> {
    check_lag(k, 1)?;
    Ok(psi2_unchecked(h.value(), k))
}

pub(crate) fn psi2_unchecked(h: f64, k: u64) -> f64 {
    second_difference(2.0 * h, k) / h
}

/// `φ_H(k) = ½((k+1)^{2H} - 2k^{2H} + |k-1|^{2H})`, `k ≥ 0`; the
/// autocovariance of fractional Gaussian noise.
pub fn phi(h: HurstParam, k: u64) -> f64 {
    phi_unchecked(h.value(), k)
}

pub(crate) fn phi_unchecked(h: f64, k: u64) -> f64 {
    0.5 * second_difference(2.0 * h, k)
}

/// `(k+1)^a - 2k^a + |k-1|^a`.
fn second_difference(a: f64, k: u64) -> f64 {
    if k == 0 {
        return 2.0;
    }
    let kf = k as f64;
    if k < SERIES_LAG {
        (kf + 1.0).powf(a) - 2.0 * kf.powf(a) + pow_or_zero(kf - 1.0, a)
    } else {
        2.0 * kf.powf(a) * even_binomial_tail(a, 1.0 / kf)
    }
}

/// Large-lag behaviour `ψ₁(k) ~ 2(1-2H) k^{2H-1}`.
pub fn psi1_asym(h: HurstParam, k: u64) -> f64 {
    let hv = h.value();
    2.0 * (1.0 - 2.0 * hv) * (k as f64).powf(2.0 * hv - 1.0)
}

/// Large-lag behaviour `ψ₂(k) ~ 2(2H-1) k^{2H-2}`.
pub fn psi2_asym(h: HurstParam, k: u64) -> f64 {
    let hv = h.value();
    2.0 * (2.0 * hv - 1.0) * (k as f64).powf(2.0 * hv - 2.0)
}

/// Space-time covariance of the unit-parameter field driven by space-time
/// white noise (`H = 1/2`).
pub fn field_cov_white(p1: SpaceTimePoint, p2: SpaceTimePoint) -> f64 {
    let (hi, lo) = if p1.t >= p2.t { (p1, p2) } else { (p2, p1) };
    let dist = (hi.x - lo.x).abs();
    if hi.t - lo.t >= dist {
        lo.t * lo.t / 4.0
    } else if dist < hi.t + lo.t {
        let w = hi.t + lo.t - dist;
        w * w / 16.0
    } else {
        0.0
    }
}

fn rect_corner_cov(t1: f64, x1: f64, t2: f64, x2: f64) -> f64 {
    field_cov_white(SpaceTimePoint { t: t1, x: x1 }, SpaceTimePoint { t: t2, x: x2 })
}

/// Covariance of rectangular increments `Δ_(ij)` and `Δ_(kl)` (space indices
/// `i, k`; time indices `j, l`) by expanding [`field_cov_white`] over the
/// sixteen corner pairs. Valid for every grid; `space_scale` divides the
/// spatial coordinates (pass `|c|` for wave speed `c`, `1` otherwise).
pub fn rect_increment_cov_expanded(
    grid: &RectGrid,
    space_scale: f64,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> Result<f64> {
    check_index(i, grid.n)?;
    check_index(k, grid.n)?;
    check_index(j, grid.m)?;
    check_index(l, grid.m)?;
    Ok(rect_increment_cov_expanded_unchecked(grid, space_scale, i, j, k, l))
}

pub(crate) fn rect_increment_cov_expanded_unchecked(
    grid: &RectGrid,
    space_scale: f64,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> f64 {
    let dx = grid.space_step() / space_scale;
    let dt = grid.time_step();
    let corners = |si: usize, tj: usize| {
        [
            (tj as f64 + 1.0, si as f64 + 1.0, 1.0),
            (tj as f64, si as f64 + 1.0, -1.0),
            (tj as f64 + 1.0, si as f64, -1.0),
            (tj as f64, si as f64, 1.0),
        ]
    };
    let a = corners(i, j);
    let b = corners(k, l);
    let mut acc = 0.0;
    for &(ta, xa, sa) in &a {
        for &(tb, xb, sb) in &b {
            acc += sa * sb * rect_corner_cov(ta * dt, xa * dx, tb * dt, xb * dx);
        }
    }
    acc
}

/// Closed-form rectangular increment covariance on an admissible grid:
/// `(2j+1)/(2M^{2α})` on the diagonal, `-(2j+1)/(4M^{2α})` for spatial
/// neighbours at the same time index, zero otherwise.
///
/// Admissibility makes distinct spatial columns uncorrelated, so each
/// `Δ_(ij)` is a difference of two independent time increments of variance
/// `(2j+1)/(4M^{2α})` and neighbouring cells share one of them.
pub fn rect_increment_cov(grid: &RectGrid, i: usize, j: usize, k: usize, l: usize) -> Result<f64> {
    grid.check_admissible(1.0)?;
    check_index(i, grid.n)?;
    check_index(k, grid.n)?;
    check_index(j, grid.m)?;
    check_index(l, grid.m)?;
    Ok(rect_increment_cov_unchecked(grid, i, j, k, l))
}

pub(crate) fn rect_increment_cov_unchecked(grid: &RectGrid, i: usize, j: usize, k: usize, l: usize) -> f64 {
    if j != l {
        return 0.0;
    }
    let time_var = (2 * j + 1) as f64 / 4.0 * (grid.m as f64).powf(-2.0 * grid.alpha);
    match i.abs_diff(k) {
        0 => 2.0 * time_var,
        1 => -time_var,
        _ => 0.0,
    }
}
