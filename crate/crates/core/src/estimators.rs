//! Estimators of the Hurst index and of the wave-speed/volatility
//! combinations identifiable from discrete observations.
//!
//! All intervals are plug-in asymptotic: the unknown parameter inside the
//! limiting variance is replaced by the point estimate.

use serde::{Deserialize, Serialize};

use crate::asymptotics;
use crate::error::{Error, Result};
use crate::kernels::{HurstParam, RectGrid};

pub const ESTIMATE_SCHEMA_VERSION: u32 = 1;
/// Half-width of the zone around `H = 3/4` in which Hurst intervals are
/// flagged as unreliable.
pub const BOUNDARY_BUFFER: f64 = 0.02;
const Z95: f64 = 1.959963984540054;
const PLUG_IN: &str = "plug-in asymptotic";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    H,
    C,
    P,
    Q,
    CRect,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimateInputs {
    pub n: usize,
    pub m: Option<usize>,
    pub alpha: Option<f64>,
    pub h_assumed: Option<f64>,
    pub t_fixed: Option<f64>,
    /// Mean of the squared increments.
    pub mean_square: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub target: Target,
    pub estimate: f64,
    /// Standard deviation of the estimator under its limiting law, if one
    /// applies.
    pub asymptotic_sd: Option<f64>,
    pub ci95: Option<(f64, f64)>,
    pub ci_method: Option<String>,
    pub inputs: EstimateInputs,
    pub notes: Vec<String>,
}

impl EstimateReport {
    fn new(target: Target, estimate: f64, inputs: EstimateInputs) -> Self {
        EstimateReport {
            schema_version: ESTIMATE_SCHEMA_VERSION,
            target,
            estimate,
            asymptotic_sd: None,
            ci95: None,
            ci_method: None,
            inputs,
            notes: Vec::new(),
        }
    }

    fn with_sd(mut self, sd: f64) -> Self {
        self.asymptotic_sd = Some(sd);
        self.ci95 = Some((self.estimate - Z95 * sd, self.estimate + Z95 * sd));
        self.ci_method = Some(PLUG_IN.to_string());
        self
    }

    fn note(mut self, msg: impl Into<String>) -> Self {
        self.notes.push(msg.into());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: EstimateReport = serde_json::from_str(s)?;
        if r.schema_version != ESTIMATE_SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported estimate schema {}", r.schema_version)));
        }
        Ok(r)
    }
}

/// Mean of squared increments, rejecting empty or all-zero input.
pub fn mean_square(increments: &[f64]) -> Result<f64> {
    if increments.is_empty() {
        return Err(Error::Degenerate("no increments".into()));
    }
    let s = increments.iter().map(|d| d * d).sum::<f64>() / increments.len() as f64;
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Degenerate(format!("mean squared increment is {s}")));
    }
    Ok(s)
}

fn check_len(increments: &[f64], n: usize) -> Result<()> {
    if increments.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: increments.len() });
    }
    Ok(())
}

fn sigma(h: f64) -> Result<f64> {
    let hp = HurstParam::new(h.clamp(0.5, 0.7499))?;
    Ok(asymptotics::sigma2(hp, 1e-10)?.value.sqrt())
}

/// `Ĥ = -(log 4 + log S_N)/(2 log N)` from the mean square `S_N`.
pub fn hurst_from_mean_square(s: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain("Hurst estimation needs n ≥ 2"));
    }
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Degenerate(format!("mean squared increment is {s}")));
    }
    Ok(-(4f64.ln() + s.ln()) / (2.0 * (n as f64).ln()))
}

/// Hurst index from `n` temporal increments over `[0, 1]`.
///
/// The interval uses `√N·log N·(H - Ĥ) → N(0, 4σ²(H))` with `Ĥ` plugged
/// in. It is withheld above `3/4`, where the limit is not normal, and
/// flagged inside the buffer zone around `3/4`.
pub fn estimate_hurst(increments: &[f64], n: usize) -> Result<EstimateReport> {
    check_len(increments, n)?;
    let s = mean_square(increments)?;
    let est = hurst_from_mean_square(s, n)?;
    let inputs = EstimateInputs { n, mean_square: s, ..Default::default() };
    let report = EstimateReport::new(Target::H, est, inputs);
    let near = (est - 0.75).abs() <= BOUNDARY_BUFFER;
    if est >= 0.75 {
        let mut r = report.note("non-normal regime (H > 3/4): no Gaussian interval");
        if near {
            r = r.note("near-boundary, CI unreliable");
        }
        return Ok(r);
    }
    let nf = n as f64;
    let sd = 2.0 * sigma(est)? / (nf.sqrt() * nf.ln());
    let mut r = report.with_sd(sd);
    if near {
        r = r.note("near-boundary, CI unreliable");
    }
    if est < 0.5 {
        r = r.note("estimate below 1/2; interval uses σ²(1/2)");
    }
    Ok(r)
}

/// `1/(4·S·N^{2H})`.
pub fn drift_from_mean_square(s: f64, n: usize, h: HurstParam) -> f64 {
    1.0 / (4.0 * s * (n as f64).powf(2.0 * h.value()))
}

/// `1/(2·M^{2α-1}·S)`.
pub fn rect_drift_from_mean_square(s: f64, grid: &RectGrid) -> f64 {
    1.0 / (2.0 * (grid.m as f64).powf(2.0 * grid.alpha - 1.0) * s)
}

fn drift_like(target: Target, increments: &[f64], n: usize, h_known: HurstParam) -> Result<EstimateReport> {
    check_len(increments, n)?;
    let s = mean_square(increments)?;
    let nf = n as f64;
    let hv = h_known.value();
    let est = drift_from_mean_square(s, n, h_known);
    let inputs = EstimateInputs { n, h_assumed: Some(hv), mean_square: s, ..Default::default() };
    let report = EstimateReport::new(target, est, inputs);
    if hv >= 0.75 {
        return Ok(report.note("no interval for known H > 3/4"));
    }
    let sd = 4.0 * est * sigma(hv)? / nf.sqrt();
    Ok(report.with_sd(sd))
}

/// `ĉ = 1/(4·S_N·N^{2H})` for known `H` and unit volatility, with
/// `√N(ĉ - c) → N(0, 16c²σ²)`.
pub fn estimate_c(increments: &[f64], n: usize, h_known: HurstParam) -> Result<EstimateReport> {
    drift_like(Target::C, increments, n, h_known)
}

/// `p̂ = 1/(4·S_N·N^{2H})`, consistent for `p = |c|/Σ²`.
pub fn estimate_p(increments: &[f64], n: usize, h_known: HurstParam) -> Result<EstimateReport> {
    drift_like(Target::P, increments, n, h_known)
}

/// `q̂ = (t/2)/(N^{2H}·S)` from `n` spatial increments of mesh `1/n` at
/// fixed time `t`, consistent for `q = c²/Σ²`.
///
/// The interval, from `√N(q̂ - q) → N(0, 2q²)`, is only given for
/// `H = 1/2`; that variance constant comes from a spatial limit theorem
/// established elsewhere and is flagged as such.
pub fn estimate_q(increments: &[f64], n: usize, h_known: HurstParam, t: f64) -> Result<EstimateReport> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("observation time must be positive, got {t}")));
    }
    check_len(increments, n)?;
    let s = mean_square(increments)?;
    let nf = n as f64;
    let hv = h_known.value();
    let est = 0.5 * t / (nf.powf(2.0 * hv) * s);
    let inputs = EstimateInputs { n, h_assumed: Some(hv), t_fixed: Some(t), mean_square: s, ..Default::default() };
    let report = EstimateReport::new(Target::Q, est, inputs);
    if !h_known.is_white() {
        return Ok(report.note("interval only available for H = 1/2"));
    }
    Ok(report
        .with_sd(2f64.sqrt() * est / nf.sqrt())
        .note("variance constant externally sourced (spatial CLT at H = 1/2)"))
}

/// `c̃ = 1/(2·M^{2α-1}·S_NM)` from space-major rectangular increments of a
/// white-noise solution, with `√(MN)(c̃ - c) → N(0, 4c²)`.
pub fn estimate_c_rect(increments: &[f64], grid: &RectGrid, h: HurstParam) -> Result<EstimateReport> {
    if !h.is_white() {
        return Err(Error::domain("rectangular drift estimation needs H = 1/2"));
    }
    check_len(increments, grid.cells())?;
    let s = mean_square(increments)?;
    let est = rect_drift_from_mean_square(s, grid);
    let inputs = EstimateInputs {
        n: grid.n,
        m: Some(grid.m),
        alpha: Some(grid.alpha),
        h_assumed: Some(0.5),
        mean_square: s,
        ..Default::default()
    };
    let sd = 2.0 * est / ((grid.n * grid.m) as f64).sqrt();
    let mut report = EstimateReport::new(Target::CRect, est, inputs).with_sd(sd);
    if !grid.is_admissible_for(est) {
        report = report.note("grid not admissible for the estimated wave speed");
    }
    Ok(report)
}

/// Whether `(c₁, Σ₁)` and `(c₂, Σ₂)` give the same law of temporal
/// increments, i.e. `Σ₁/√|c₁| = Σ₂/√|c₂|`.
pub fn identifiability_check(c1: f64, sigma1: f64, c2: f64, sigma2: f64) -> bool {
    let a = sigma1 / c1.abs().sqrt();
    let b = sigma2 / c2.abs().sqrt();
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::PhysicalParams;
    use crate::sampler::build_temporal_model;
    use approx::assert_relative_eq;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    fn constant_increments(n: usize, s: f64) -> Vec<f64> {
        vec![s.sqrt(); n]
    }

    #[test]
    fn hurst_exact_inversion() {
        assert_relative_eq!(hurst_from_mean_square(0.0025, 100).unwrap(), 0.5, max_relative = 1e-14);
        let s = 0.25 * 1000f64.powf(-1.3);
        assert_relative_eq!(hurst_from_mean_square(s, 1000).unwrap(), 0.65, max_relative = 1e-14);
        let r = estimate_hurst(&constant_increments(1000, s), 1000).unwrap();
        assert_relative_eq!(r.estimate, 0.65, max_relative = 1e-12);
        let (lo, hi) = r.ci95.unwrap();
        assert_relative_eq!(hi - r.estimate, Z95 * r.asymptotic_sd.unwrap(), max_relative = 1e-12);
        assert_relative_eq!(r.estimate - lo, Z95 * r.asymptotic_sd.unwrap(), max_relative = 1e-12);
        assert_eq!(r.ci_method.as_deref(), Some("plug-in asymptotic"));
    }

    #[test]
    fn hurst_regime_flags() {
        let n = 1000;
        let s_of = |hv: f64| 0.25 * (n as f64).powf(-2.0 * hv);
        let r = estimate_hurst(&constant_increments(n, s_of(0.85)), n).unwrap();
        assert!(r.ci95.is_none());
        assert!(r.notes.iter().any(|m| m.contains("non-normal")));
        let r = estimate_hurst(&constant_increments(n, s_of(0.74)), n).unwrap();
        assert!(r.ci95.is_some());
        assert!(r.notes.iter().any(|m| m.contains("near-boundary")));
        let r = estimate_hurst(&constant_increments(n, s_of(0.6)), n).unwrap();
        assert!(r.notes.is_empty());
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(estimate_hurst(&[0.0; 10], 10), Err(Error::Degenerate(_))));
        assert!(estimate_hurst(&[1.0], 1).is_err());
        assert!(estimate_c(&[0.0; 4], 4, h(0.6)).is_err());
        assert!(estimate_q(&[1.0; 4], 4, HurstParam::WHITE, 0.0).is_err());
    }

    #[test]
    fn c_and_p_inversion() {
        let n = 64;
        let hp = h(0.6);
        let s = 0.25 * (n as f64).powf(-1.2);
        assert_relative_eq!(estimate_c(&constant_increments(n, s), n, hp).unwrap().estimate, 1.0, max_relative = 1e-12);
        assert_relative_eq!(
            estimate_c(&constant_increments(n, s / 2.0), n, hp).unwrap().estimate,
            2.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(estimate_p(&constant_increments(n, s), n, hp).unwrap().estimate, 1.0, max_relative = 1e-12);
        let r = estimate_c(&constant_increments(n, s), n, h(0.8)).unwrap();
        assert!(r.ci95.is_none());
    }

    #[test]
    fn c_interval_at_white_noise() {
        // 16c²σ² = (8/3)c² at H = 1/2
        let n = 100;
        let s = 0.25 / n as f64;
        let r = estimate_c(&constant_increments(n, s), n, HurstParam::WHITE).unwrap();
        let sd = r.asymptotic_sd.unwrap();
        assert_relative_eq!(sd * sd * n as f64, 8.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn q_inversion() {
        let n = 512;
        let t = 1.3;
        let r = estimate_q(&constant_increments(n, 0.5 * t / n as f64), n, HurstParam::WHITE, t).unwrap();
        assert_relative_eq!(r.estimate, 1.0, max_relative = 1e-12);
        assert!(r.notes.iter().any(|m| m.contains("externally sourced")));
        let r = estimate_q(&constant_increments(n, 1e-3), n, h(0.6), t).unwrap();
        assert!(r.ci95.is_none());
    }

    #[test]
    fn c_rect_inversion() {
        let grid = RectGrid::new(4, 4, 2.5).unwrap();
        let s = 1.0 / (2.0 * 4f64.powf(4.0));
        let r = estimate_c_rect(&constant_increments(16, s), &grid, HurstParam::WHITE).unwrap();
        assert_relative_eq!(r.estimate, 1.0, max_relative = 1e-12);
        assert!(r.notes.is_empty());
        assert!(estimate_c_rect(&constant_increments(16, s), &grid, h(0.6)).is_err());
        let r = estimate_c_rect(&constant_increments(16, s / 100.0), &grid, HurstParam::WHITE).unwrap();
        assert!(r.notes.iter().any(|m| m.contains("admissible")));
    }

    #[test]
    fn equivariance() {
        let n = 256;
        let m = build_temporal_model(h(0.65), n, PhysicalParams::default()).unwrap();
        let d = m.sample_one(crate::sampler::SeedSpec::new(4, 0));
        let a = 1.7;
        let scaled: Vec<f64> = d.iter().map(|x| a * x).collect();
        let h0 = estimate_hurst(&d, n).unwrap().estimate;
        let h1 = estimate_hurst(&scaled, n).unwrap().estimate;
        assert_relative_eq!(h1, h0 - (a * a).ln() / (2.0 * (n as f64).ln()), epsilon = 1e-12);
        let c0 = estimate_c(&d, n, h(0.65)).unwrap().estimate;
        let c1 = estimate_c(&scaled, n, h(0.65)).unwrap().estimate;
        assert_relative_eq!(c1, c0 / (a * a), max_relative = 1e-12);
    }

    #[test]
    fn identifiability() {
        assert!(identifiability_check(1.0, 1.0, 4.0, 2.0));
        assert!(!identifiability_check(1.0, 1.0, 1.0, 2.0));
        let a = build_temporal_model(h(0.7), 16, PhysicalParams::new(1.0, 1.0).unwrap()).unwrap();
        let b = build_temporal_model(h(0.7), 16, PhysicalParams::new(4.0, 2.0).unwrap()).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                assert!((a.covariance().get(i, j) - b.covariance().get(i, j)).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let r = estimate_hurst(&constant_increments(100, 0.0025), 100).unwrap();
        let back = EstimateReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
