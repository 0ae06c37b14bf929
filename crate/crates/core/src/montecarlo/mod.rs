//! Reproducible Monte Carlo experiments.
//!
//! One covariance factorization per experiment; each replication runs
//! sample → variation → estimators on its own random stream, so reports do
//! not depend on the number of workers.

mod config;
mod stats;

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{parse_kv, ExperimentConfig, ExperimentKind};
pub use stats::{
    empirical_cumulants, ks_critical_1pct, ks_distance, ks_statistic, ks_statistic_fitted, skewness_se, Histogram,
    MomentAccumulator,
};

use crate::error::{Error, Result};
use crate::estimators;
use crate::exec::Exec;
use crate::kernels::{HurstParam, PhysicalParams, RectGrid};
use crate::sampler::{self, CovarianceModel};
use crate::variations::{Normalization, Standardization};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Per-replication values. Optional fields are absent when not requested or
/// not defined for the experiment kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub index: usize,
    pub s_raw: f64,
    pub v_centered: f64,
    pub f_standardized: f64,
    pub f_asymptotic: Option<f64>,
    pub h_hat: Option<f64>,
    /// `1/(4·S·N^{2H})` with the configured `H`: the estimate of `|c|/Σ²`.
    pub p_hat: Option<f64>,
    /// Rectangular drift estimate `1/(2·M^{2α-1}·S)`.
    pub c_tilde: Option<f64>,
}

impl ReplicationRecord {
    const COLUMNS: [&'static str; 8] =
        ["index", "s_raw", "v_centered", "f_standardized", "f_asymptotic", "h_hat", "p_hat", "c_tilde"];

    fn get(&self, name: &str) -> Option<f64> {
        match name {
            "s_raw" => Some(self.s_raw),
            "v_centered" => Some(self.v_centered),
            "f_standardized" => Some(self.f_standardized),
            "f_asymptotic" => self.f_asymptotic,
            "h_hat" => self.h_hat,
            "p_hat" => self.p_hat,
            "c_tilde" => self.c_tilde,
            _ => None,
        }
    }
}

/// Summary of one statistic across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub name: String,
    pub count: u64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub skewness_se: f64,
    pub excess_kurtosis: f64,
    /// k-statistics `κ₁ … κ_max`.
    pub cumulants: Vec<f64>,
    /// KS distance to `N(0, 1)`.
    pub ks_standard_normal: f64,
    /// KS distance to the fitted normal (descriptive).
    pub ks_fitted_normal: Option<f64>,
    pub histogram: Histogram,
}

impl StatSummary {
    pub fn from_samples(name: &str, samples: &[f64], max_cumulant: usize) -> Result<Self> {
        let mut acc = MomentAccumulator::new();
        samples.iter().for_each(|&x| acc.push(x));
        let n = samples.len();
        let cumulants = if n >= 10 { acc.k_statistics(max_cumulant.clamp(2, 4)) } else { Vec::new() };
        Ok(StatSummary {
            name: name.to_string(),
            count: acc.count(),
            mean: acc.mean(),
            variance: acc.variance(),
            skewness: acc.skewness(),
            skewness_se: if n > 2 { skewness_se(n) } else { f64::NAN },
            excess_kurtosis: acc.excess_kurtosis(),
            cumulants,
            ks_standard_normal: ks_statistic(samples)?,
            ks_fitted_normal: ks_statistic_fitted(samples).ok(),
            histogram: Histogram::freedman_diaconis(samples)?,
        })
    }
}

/// Exact finite-grid reference values for the experiment's model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    /// `E S`.
    pub mean_s: f64,
    /// `E V²` from the Wick formula.
    pub variance_v: f64,
    /// Standardized cumulants `κ₃/κ₂^{3/2}`, `κ₄/κ₂²` of `V` (trace oracle).
    pub standardized_cumulants: Vec<f64>,
    /// Large-grid standard deviation of `V`, if defined.
    pub asymptotic_sd: Option<f64>,
    pub asymptotic_label: Option<String>,
    /// Jitter added before factorization.
    pub jitter: f64,
    /// Empirical variance of `V` minus `variance_v`, in standard errors
    /// computed from the exact fourth cumulant.
    pub variance_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub oracle: OracleSummary,
    pub ks_critical_1pct: f64,
    pub statistics: Vec<StatSummary>,
    pub records: Vec<ReplicationRecord>,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    pub fn statistic(&self, name: &str) -> Option<&StatSummary> {
        self.statistics.iter().find(|s| s.name == name)
    }

    /// Values of one column across replications, in replication order.
    pub fn column(&self, name: &str) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.get(name)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: ExperimentReport = serde_json::from_str(s)?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported report schema {}", r.schema_version)));
        }
        Ok(r)
    }

    /// One row per replication.
    pub fn write_records_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(ReplicationRecord::COLUMNS)?;
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            out.write_record([
                r.index.to_string(),
                r.s_raw.to_string(),
                r.v_centered.to_string(),
                r.f_standardized.to_string(),
                fmt(r.f_asymptotic),
                fmt(r.h_hat),
                fmt(r.p_hat),
                fmt(r.c_tilde),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// One row per histogram bin of every summarized statistic.
    pub fn write_histogram_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["statistic", "bin", "lower", "upper", "count"])?;
        for s in &self.statistics {
            let h = &s.histogram;
            for (i, c) in h.counts.iter().enumerate() {
                out.write_record([
                    s.name.clone(),
                    i.to_string(),
                    h.edges[i].to_string(),
                    h.edges[i + 1].to_string(),
                    c.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Factored model for a validated configuration.
pub fn build_model(config: &ExperimentConfig, exec: Exec) -> Result<CovarianceModel> {
    config.validate()?;
    let params = PhysicalParams::new(config.c, config.sigma_vol)?;
    match config.kind {
        ExperimentKind::Temporal => {
            sampler::temporal_covariance(HurstParam::new(config.h)?, config.n, params, exec)?.factor()
        }
        ExperimentKind::Rectangular => {
            let grid = RectGrid::new(config.n, config.m, config.alpha)?;
            sampler::rect_covariance(grid, params, exec)?.factor()
        }
    }
}

pub fn run_experiment(config: &ExperimentConfig, exec: Exec) -> Result<ExperimentReport> {
    let start = Instant::now();
    let model = build_model(config, exec)?;
    let mut norm = Normalization::for_model(&model)?;
    if config.asymptotic_standardization {
        norm = norm.with_standardization(Standardization::Asymptotic)?;
    }
    let hp = HurstParam::new(config.h)?;
    let grid = match config.kind {
        ExperimentKind::Rectangular => Some(RectGrid::new(config.n, config.m, config.alpha)?),
        ExperimentKind::Temporal => None,
    };

    let results = model.map_replications(config.reps, config.master_seed, exec, |index, d| {
        let v = norm.evaluate(d)?;
        let mut rec = ReplicationRecord {
            index,
            s_raw: v.s_raw,
            v_centered: v.v_centered,
            f_standardized: v.f_standardized,
            f_asymptotic: v.f_asymptotic,
            h_hat: None,
            p_hat: None,
            c_tilde: None,
        };
        if config.estimates {
            match grid {
                None => {
                    rec.h_hat = Some(estimators::hurst_from_mean_square(v.s_raw, config.n)?);
                    rec.p_hat = Some(estimators::drift_from_mean_square(v.s_raw, config.n, hp));
                }
                Some(g) => rec.c_tilde = Some(estimators::rect_drift_from_mean_square(v.s_raw, &g)),
            }
        }
        Ok(rec)
    });
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;

    let max_k = config.cumulants as usize;
    let mut names = vec!["f_standardized", "v_centered"];
    if norm.asymptotic_sd.is_some() {
        names.push("f_asymptotic");
    }
    if config.estimates {
        match config.kind {
            ExperimentKind::Temporal => names.extend(["h_hat", "p_hat"]),
            ExperimentKind::Rectangular => names.push("c_tilde"),
        }
    }
    let statistics = names
        .iter()
        .map(|name| {
            let col: Vec<f64> = records.iter().filter_map(|r| r.get(name)).collect();
            StatSummary::from_samples(name, &col, max_k)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut standardized_cumulants = Vec::new();
    for m in 3..=config.cumulants {
        standardized_cumulants.push(sampler::standardized_cumulant(&model, m)?);
    }
    let variance_z = if config.reps >= 2 {
        let dim = model.dim() as f64;
        let k2 = norm.exact_sd * norm.exact_sd;
        let k4 = sampler::quadratic_form_cumulant(&model, 4, dim)?;
        let r = config.reps as f64;
        let se = ((k4 + 2.0 * k2 * k2 * r / (r - 1.0)) / r).sqrt();
        let emp = statistics.iter().find(|s| s.name == "v_centered").map(|s| s.variance).unwrap_or(f64::NAN);
        Some((emp - k2) / se)
    } else {
        None
    };
    let oracle = OracleSummary {
        mean_s: norm.mean,
        variance_v: norm.exact_sd * norm.exact_sd,
        standardized_cumulants,
        asymptotic_sd: norm.asymptotic_sd,
        asymptotic_label: norm.asymptotic_label.clone(),
        jitter: model.meta().jitter,
        variance_z,
    };

    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        oracle,
        ks_critical_1pct: ks_critical_1pct(config.reps),
        statistics,
        records,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}
