//! Experiment configuration and its flat `key = value` text form.
//!
//! ```text
//! # comment
//! kind = temporal        # or rectangular
//! h = 0.65
//! n = 1000
//! reps = 500
//! seed = 1
//! ```
//!
//! One assignment per line; blank lines and `#` comments are ignored; every
//! key may appear at most once; omitted keys take their defaults.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{HurstParam, PhysicalParams, RectGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Temporal,
    Rectangular,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Temporal => "temporal",
            ExperimentKind::Rectangular => "rectangular",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temporal" => Ok(ExperimentKind::Temporal),
            "rectangular" => Ok(ExperimentKind::Rectangular),
            _ => Err(Error::Config(format!("unknown experiment kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    pub h: f64,
    /// Temporal grid size, or number of spatial cells.
    pub n: usize,
    /// Number of time cells (rectangular only).
    pub m: usize,
    /// Time-mesh exponent (rectangular only).
    pub alpha: f64,
    pub c: f64,
    pub sigma_vol: f64,
    pub reps: usize,
    pub master_seed: u64,
    /// Compute per-replication estimators.
    pub estimates: bool,
    /// Highest cumulant order summarized (2 to 4).
    pub cumulants: u32,
    /// Standardize `f_standardized` by the large-grid constant instead of
    /// the exact Wick moment.
    pub asymptotic_standardization: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            kind: ExperimentKind::Temporal,
            h: 0.65,
            n: 1000,
            m: 32,
            alpha: 2.5,
            c: 1.0,
            sigma_vol: 1.0,
            reps: 500,
            master_seed: 1,
            estimates: true,
            cumulants: 4,
            asymptotic_standardization: false,
        }
    }
}

/// Splits `key = value` text into assignments, in file order. Duplicate
/// keys are rejected.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        if out.iter().any(|(k, _)| k == key) {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 13] = [
        "name",
        "kind",
        "h",
        "n",
        "m",
        "alpha",
        "c",
        "sigma_vol",
        "reps",
        "seed",
        "estimates",
        "cumulants",
        "standardization",
    ];

    /// Assigns one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "name" => self.name = value.to_string(),
            "kind" => self.kind = value.parse()?,
            "h" => self.h = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "c" => self.c = parse(key, value)?,
            "sigma_vol" => self.sigma_vol = parse(key, value)?,
            "reps" => self.reps = parse(key, value)?,
            "seed" => self.master_seed = parse(key, value)?,
            "estimates" => self.estimates = parse(key, value)?,
            "cumulants" => self.cumulants = parse(key, value)?,
            "standardization" => {
                self.asymptotic_standardization = match value {
                    "exact" => false,
                    "asymptotic" => true,
                    _ => return Err(Error::Config(format!("invalid standardization '{value}'"))),
                }
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parses the text form on top of the defaults.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_kv(text)?;
        Ok(cfg)
    }

    /// Applies the assignments in `text` to `self`.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (key, value) in parse_kv(text)? {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    /// Text form with every key, in a fixed order.
    pub fn to_kv(&self) -> String {
        let standardization = if self.asymptotic_standardization { "asymptotic" } else { "exact" };
        let values = [
            self.name.clone(),
            self.kind.to_string(),
            self.h.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.alpha.to_string(),
            self.c.to_string(),
            self.sigma_vol.to_string(),
            self.reps.to_string(),
            self.master_seed.to_string(),
            self.estimates.to_string(),
            self.cumulants.to_string(),
            standardization.to_string(),
        ];
        Self::KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be ≥ 1".into()));
        }
        if !(2..=4).contains(&self.cumulants) {
            return Err(Error::Config(format!("cumulants must be in 2..=4, got {}", self.cumulants)));
        }
        if self.name.contains(['\n', '#']) {
            return Err(Error::Config("name must not contain newlines or '#'".into()));
        }
        let h = HurstParam::new(self.h)?;
        let params = PhysicalParams::new(self.c, self.sigma_vol)?;
        match self.kind {
            ExperimentKind::Temporal => {
                if self.n < 2 {
                    return Err(Error::Config("temporal experiments need n ≥ 2".into()));
                }
            }
            ExperimentKind::Rectangular => {
                if !h.is_white() {
                    return Err(Error::Config("rectangular experiments need h = 0.5".into()));
                }
                RectGrid::new(self.n, self.m, self.alpha)?.check_admissible(params.c)?;
            }
        }
        Ok(())
    }
}
