//! Quadratic variations of sampled increments.
//!
//! Temporal: `S_N = (1/N)Σ dᵢ²`, `V_N = S_N - E S_N`, `F_N = V_N/sd(V_N)`.
//! Rectangular: the same with `N·M` cell increments `Δ_(ij)`.
//!
//! Two standardizations are carried side by side: the exact one, using the
//! Wick second moment of the model at hand, and the asymptotic one, using
//! the large-grid rate and limit constant.

use serde::{Deserialize, Serialize};

use crate::asymptotics;
use crate::error::{Error, Result};
use crate::kernels::{HurstParam, PhysicalParams, RectGrid, Regime};
use crate::sampler::{wick_second_moment, CovarianceModel, ModelKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardization {
    ExactWick,
    Asymptotic,
}

/// Constants used to center and standardize a variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub dim: usize,
    /// Exact `E S`.
    pub mean: f64,
    /// `sqrt(E V²)` from the Wick formula.
    pub exact_sd: f64,
    /// Large-grid standard deviation, when the model has one.
    pub asymptotic_sd: Option<f64>,
    /// Human-readable form of the asymptotic normalization.
    pub asymptotic_label: Option<String>,
    /// Which of the two divides `f_standardized`.
    pub standardization: Standardization,
}

/// Variation of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationStatistic {
    pub s_raw: f64,
    pub v_centered: f64,
    pub f_standardized: f64,
    /// `v_centered / asymptotic_sd`.
    pub f_asymptotic: Option<f64>,
}

impl Normalization {
    /// Centering and standardization constants for `model`.
    pub fn for_model(model: &CovarianceModel) -> Result<Self> {
        let dim = model.dim();
        let mean = model.covariance().diagonal().iter().sum::<f64>() / dim as f64;
        let exact_sd = wick_second_moment(model, dim as f64).sqrt();
        let meta = model.meta();
        let scale = meta.params.variance_scale();
        let (asymptotic_sd, asymptotic_label) = match meta.kind {
            ModelKind::Temporal { h, n } => {
                let hp = HurstParam::new(h)?;
                let nf = n as f64;
                match hp.regime() {
                    Regime::Central => {
                        let s2 = asymptotics::sigma2(hp, 1e-12)?.value;
                        (
                            Some(scale * s2.sqrt() * nf.powf(-(2.0 * h + 0.5))),
                            Some("N^{2H+1/2}·V_N/(σ·Σ²/|c|)".to_string()),
                        )
                    }
                    Regime::NonCentral => {
                        let k = asymptotics::high_regime_closed_form(hp);
                        (Some(scale * k.sqrt() / (nf * nf)), Some("N²·V_N/(√k·Σ²/|c|)".to_string()))
                    }
                }
            }
            ModelKind::Rectangular { n, m, alpha } => (
                Some(rect_asymptotic_sd(&RectGrid::new(n, m, alpha)?, meta.params)),
                Some("√N·M^{2α-1/2}·(|c|/Σ²)·V_NM".to_string()),
            ),
            ModelKind::SpatialSlice { .. } | ModelKind::Custom => (None, None),
        };
        Ok(Normalization {
            dim,
            mean,
            exact_sd,
            asymptotic_sd,
            asymptotic_label,
            standardization: Standardization::ExactWick,
        })
    }

    /// Switches `f_standardized` to the asymptotic normalization.
    pub fn with_standardization(mut self, s: Standardization) -> Result<Self> {
        if s == Standardization::Asymptotic && self.asymptotic_sd.is_none() {
            return Err(Error::Config("model has no asymptotic normalization".into()));
        }
        self.standardization = s;
        Ok(self)
    }

    pub fn evaluate(&self, increments: &[f64]) -> Result<VariationStatistic> {
        if increments.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: increments.len() });
        }
        let s_raw = increments.iter().map(|d| d * d).sum::<f64>() / self.dim as f64;
        let v_centered = s_raw - self.mean;
        let f_asymptotic = self.asymptotic_sd.map(|sd| v_centered / sd);
        let f_standardized = match self.standardization {
            Standardization::ExactWick => v_centered / self.exact_sd,
            Standardization::Asymptotic => f_asymptotic.expect("checked in with_standardization"),
        };
        Ok(VariationStatistic { s_raw, v_centered, f_standardized, f_asymptotic })
    }
}

/// `S_N`, `V_N`, `F_N` of a temporal increment vector.
pub fn temporal_variation(increments: &[f64], model: &CovarianceModel) -> Result<VariationStatistic> {
    if !matches!(model.meta().kind, ModelKind::Temporal { .. }) {
        return Err(Error::domain("temporal_variation needs a temporal model"));
    }
    Normalization::for_model(model)?.evaluate(increments)
}

/// `S_NM`, `V_NM`, `F_NM` of space-major rectangular increments.
pub fn rect_variation(increments: &[f64], model: &CovarianceModel) -> Result<VariationStatistic> {
    if !matches!(model.meta().kind, ModelKind::Rectangular { .. }) {
        return Err(Error::domain("rect_variation needs a rectangular model"));
    }
    Normalization::for_model(model)?.evaluate(increments)
}

/// `E S_N = (Σ²/|c|)·[(1/4)N^{-2H} + (1/4)((1-2H)/(1+2H))N^{-2H-1}]`.
pub fn expected_sn(h: HurstParam, n: usize, params: PhysicalParams) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("grid size must be ≥ 1"));
    }
    let hv = h.value();
    let nf = n as f64;
    let r = (1.0 - 2.0 * hv) / (1.0 + 2.0 * hv);
    Ok(params.variance_scale() * 0.25 * nf.powf(-2.0 * hv) * (1.0 + r / nf))
}

/// `E S_NM = (Σ²/|c|)·M^{1-2α}/2` on an admissible grid.
pub fn rect_expected_s(grid: &RectGrid, params: PhysicalParams) -> Result<f64> {
    grid.check_admissible(params.c)?;
    Ok(params.variance_scale() * 0.5 * (grid.m as f64).powf(1.0 - 2.0 * grid.alpha))
}

/// Exact `E V_NM²` on an admissible grid, from the tridiagonal-in-space
/// covariance pattern.
pub fn rect_wick_second_moment(grid: &RectGrid, params: PhysicalParams) -> Result<f64> {
    grid.check_admissible(params.c)?;
    let (n, m) = (grid.n as f64, grid.m as f64);
    // Σ_j (2j+1)² = M(4M²-1)/3; each time row has N diagonal entries 2t_j
    // and 2(N-1) neighbour entries -t_j, t_j = (2j+1)/(4M^{2α})
    let sum_t2 = m * (4.0 * m * m - 1.0) / 3.0 / 16.0 * m.powf(-4.0 * grid.alpha);
    let sum_sq = (6.0 * n - 2.0) * sum_t2 * params.variance_scale().powi(2);
    Ok(2.0 * sum_sq / (n * m).powi(2))
}

/// `(Σ²/|c|)·N^{-1/2}·M^{1/2-2α}`, the large-grid standard deviation of
/// `V_NM`.
pub fn rect_asymptotic_sd(grid: &RectGrid, params: PhysicalParams) -> f64 {
    let (n, m) = (grid.n as f64, grid.m as f64);
    params.variance_scale() * n.powf(-0.5) * m.powf(0.5 - 2.0 * grid.alpha)
}
