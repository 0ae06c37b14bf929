//! `fwave`: kernel queries, limit constants, simulation, estimation and
//! Monte Carlo experiments for the fractional-noise wave equation.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use fwave_core::asymptotics;
use fwave_core::estimators::{self, EstimateReport};
use fwave_core::kernels::{self, HurstParam, PhysicalParams, RectGrid, Regime, SpaceTimePoint};
use fwave_core::montecarlo::{self, parse_kv, ExperimentConfig, ExperimentKind, ExperimentReport};
use fwave_core::sampler::{self, CovarianceMatrix};
use fwave_core::{Error, Exec};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const MANIFEST: &str = "manifest.txt";

const PRESETS: [(&str, &str); 3] = [
    ("fig1-left", include_str!("../configs/fig1-left.conf")),
    ("fig1-right", include_str!("../configs/fig1-right.conf")),
    ("rect-clt", include_str!("../configs/rect-clt.conf")),
];

#[derive(Parser)]
#[command(name = "fwave", version, about = "Fractional-noise wave equation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; nothing is written elsewhere.
    #[arg(long, default_value = "fwave-out")]
    out: PathBuf,
    /// key = value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Covariance values, or an increment covariance matrix as CSV.
    #[command(allow_negative_numbers = true)]
    Cov(CovArgs),
    /// Limit constants for a Hurst index.
    #[command(allow_negative_numbers = true)]
    Constants(ConstantsArgs),
    /// Sample increment paths to CSV.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Estimate parameters from increment paths.
    #[command(allow_negative_numbers = true)]
    Estimate(EstimateArgs),
    /// Temporal or rectangular Monte Carlo experiment.
    #[command(allow_negative_numbers = true)]
    Experiment(ExperimentArgs),
    /// Rectangular experiment (starts from the `rect-clt` preset).
    #[command(allow_negative_numbers = true)]
    RectExperiment(ExperimentArgs),
}

#[derive(Args)]
struct CovArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    /// Space coordinate of the first point (white noise only).
    #[arg(long)]
    x: Option<f64>,
    /// Space coordinate of the second point (white noise only).
    #[arg(long)]
    y: Option<f64>,
    /// Write the covariance of N temporal increments (or of N×M
    /// rectangular increments with --m) to cov.csv.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    sigma_vol: Option<f64>,
}

#[derive(Args)]
struct ConstantsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    h: Option<f64>,
    /// Absolute tolerance of the σ² series.
    #[arg(long)]
    tol: Option<f64>,
    /// Also print the CLT rate.
    #[arg(long)]
    rate: bool,
    /// Largest grid used to extrapolate the high-H normalizer.
    #[arg(long)]
    n_max: Option<usize>,
    /// Highest limiting cumulant printed for H > 3/4.
    #[arg(long)]
    cumulants: Option<u32>,
    /// Mesh of the limiting-cumulant quadrature.
    #[arg(long)]
    mesh: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// temporal or rectangular
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    sigma_vol: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    /// CSV of increments, one replication per row (as written by `simulate`).
    #[arg(long)]
    input: Option<PathBuf>,
    /// h, c, p, q or c-rect
    #[arg(long)]
    target: Option<String>,
    /// Known Hurst index for c, p and q.
    #[arg(long)]
    h: Option<f64>,
    /// Observation time for q.
    #[arg(long)]
    t: Option<f64>,
    /// Grid shape for c-rect.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    /// Bundled configuration: fig1-left, fig1-right or rect-clt.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    sigma_vol: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    estimates: Option<bool>,
    #[arg(long)]
    cumulants: Option<u32>,
    /// exact or asymptotic
    #[arg(long)]
    standardization: Option<String>,
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: 2, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Constraint(_) => 3,
            Error::NotPositiveDefinite { .. } | Error::NonConvergence(_) | Error::Degenerate(_) | Error::Cancelled => 4,
            Error::Io(_) => 1,
            _ => 2,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 1, msg: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Six significant digits, trailing zeros dropped.
fn g6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let r: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    if (1e-4..1e7).contains(&r.abs()) {
        r.to_string()
    } else {
        format!("{r:e}")
    }
}

/// Resolved key/value settings: config file first, flags on top.
struct Settings {
    command: &'static str,
    values: BTreeMap<String, String>,
}

impl Settings {
    fn load(command: &'static str, common: &Common, allowed: &[&str]) -> CliResult<Self> {
        let mut s = Settings { command, values: BTreeMap::new() };
        if let Some(path) = &common.config {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
            s.merge(&text, allowed)?;
        }
        s.flag("seed", common.seed);
        Ok(s)
    }

    fn merge(&mut self, text: &str, allowed: &[&str]) -> CliResult<()> {
        for (key, value) in parse_kv(text)? {
            match key.as_str() {
                "tool_version" => {}
                "command" if value == self.command => {}
                "command" => {
                    return Err(Failure::usage(format!(
                        "config was written by '{value}', not '{}'",
                        self.command
                    )))
                }
                k if k == "seed" || allowed.contains(&k) => {
                    self.values.insert(key, value);
                }
                _ => return Err(Failure::usage(format!("unknown config key '{key}'"))),
            }
        }
        Ok(())
    }

    fn flag<T: Display>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.to_string());
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Failure::usage(format!("invalid value '{v}' for '{key}'"))),
        }
    }

    fn or<T: FromStr + Display>(&mut self, key: &str, default: T) -> CliResult<T> {
        match self.get(key)? {
            Some(v) => Ok(v),
            None => {
                self.values.insert(key.to_string(), default.to_string());
                Ok(default)
            }
        }
    }

    fn require<T: FromStr>(&self, key: &str) -> CliResult<T> {
        self.get(key)?.ok_or_else(|| Failure::usage(format!("missing --{}", key.replace('_', "-"))))
    }

    fn manifest(&self) -> String {
        let mut s = manifest_header(self.command);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

fn manifest_header(command: &str) -> String {
    format!("# fwave run manifest\ncommand = {command}\ntool_version = {VERSION}\n")
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let p = self.path(name);
        fs::write(&p, contents)?;
        Ok(p)
    }
}

fn hurst(settings: &Settings) -> CliResult<HurstParam> {
    let h: f64 = settings.require("h")?;
    if (h - 0.75).abs() < 1e-12 {
        return Err(Failure::usage(
            "H = 0.75 is the logarithmic boundary case between the normal and non-normal regimes and is unsupported",
        ));
    }
    Ok(HurstParam::new(h)?)
}

fn physical(settings: &mut Settings) -> CliResult<PhysicalParams> {
    let c = settings.or("c", 1.0)?;
    let sigma = settings.or("sigma_vol", 1.0)?;
    Ok(PhysicalParams::new(c, sigma)?)
}

fn write_matrix_csv(out: &Output, name: &str, cov: &CovarianceMatrix) -> CliResult<PathBuf> {
    let path = out.path(name);
    let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
    for i in 0..cov.dim() {
        let row: Vec<String> = (0..cov.dim()).map(|j| cov.get(i, j).to_string()).collect();
        w.write_record(&row).map_err(Error::from)?;
    }
    w.flush()?;
    Ok(path)
}

fn cmd_cov(args: CovArgs) -> CliResult<()> {
    let keys = ["h", "t", "s", "x", "y", "grid", "m", "alpha", "c", "sigma_vol"];
    let mut st = Settings::load("cov", &args.common, &keys)?;
    st.flag("h", args.h);
    st.flag("t", args.t);
    st.flag("s", args.s);
    st.flag("x", args.x);
    st.flag("y", args.y);
    st.flag("grid", args.grid);
    st.flag("m", args.m);
    st.flag("alpha", args.alpha);
    st.flag("c", args.c);
    st.flag("sigma_vol", args.sigma_vol);
    let exec = Exec::with_jobs(args.common.jobs);

    if let Some(n) = st.get::<usize>("grid")? {
        let params = physical(&mut st)?;
        let cov = match st.get::<usize>("m")? {
            Some(m) => {
                let alpha = st.or("alpha", 2.5)?;
                let h = st.or("h", 0.5)?;
                if h != 0.5 {
                    return Err(Failure::usage("rectangular grids need h = 0.5"));
                }
                sampler::rect_covariance(RectGrid::new(n, m, alpha)?, params, exec)?
            }
            None => {
                let h = hurst(&st)?;
                sampler::temporal_covariance(h, n, params, exec)?
            }
        };
        let out = Output::create(&args.common.out)?;
        let path = write_matrix_csv(&out, "cov.csv", &cov)?;
        out.write(MANIFEST, &st.manifest())?;
        println!("wrote {}×{} covariance to {}", cov.dim(), cov.dim(), path.display());
        return Ok(());
    }

    let t: f64 = st.require("t")?;
    let s: f64 = st.require("s")?;
    let value = if st.values.contains_key("x") || st.values.contains_key("y") {
        let h = st.or("h", 0.5)?;
        if h != 0.5 {
            return Err(Failure::usage("space-time covariance is only available for h = 0.5"));
        }
        let x = st.or("x", 0.0)?;
        let y = st.or("y", 0.0)?;
        kernels::field_cov_white(SpaceTimePoint::new(t, x)?, SpaceTimePoint::new(s, y)?)
    } else {
        kernels::temporal_cov(hurst(&st)?, t, s)?
    };
    let out = Output::create(&args.common.out)?;
    out.write(MANIFEST, &st.manifest())?;
    out.write("cov.txt", &format!("{value}\n"))?;
    println!("{}", g6(value));
    Ok(())
}

fn cmd_constants(args: ConstantsArgs) -> CliResult<()> {
    let keys = ["h", "tol", "rate", "n_max", "cumulants", "mesh"];
    let mut st = Settings::load("constants", &args.common, &keys)?;
    st.flag("h", args.h);
    st.flag("tol", args.tol);
    if args.rate {
        st.flag("rate", Some(true));
    }
    st.flag("n_max", args.n_max);
    st.flag("cumulants", args.cumulants);
    st.flag("mesh", args.mesh);
    let h = hurst(&st)?;
    let want_rate = st.or("rate", false)?;

    let mut lines = Vec::new();
    let mut record = serde_json::Map::new();
    record.insert("h".into(), h.value().into());
    match h.regime() {
        Regime::Central => {
            let tol = st.or("tol", 1e-10)?;
            let v = asymptotics::sigma2(h, tol)?;
            lines.push(format!("sigma2 = {}", g6(v.value)));
            lines.push(format!(
                "  partial sum to k = {}: {}, tail {} (bound {})",
                v.truncation,
                g6(v.partial_sum),
                g6(v.tail),
                g6(v.tail_bound)
            ));
            record.insert("sigma2".into(), serde_json::to_value(v).map_err(Error::from)?);
            if want_rate {
                let r = asymptotics::clt_rate(h)?;
                lines.push(format!("rate = {r}"));
                record.insert("rate".into(), r.to_string().into());
            }
        }
        Regime::NonCentral => {
            let n_max = st.or("n_max", 8192usize)?;
            let kmax = st.or("cumulants", 4u32)?;
            let mesh = st.or("mesh", 128usize)?;
            if !(3..=6).contains(&kmax) {
                return Err(Failure::usage("--cumulants must be in 3..=6"));
            }
            let k = asymptotics::limiting_variance_high(h, n_max)?;
            lines.push(format!("k = {} (extrapolated to N = {n_max})", g6(k.value)));
            lines.push(format!(
                "  exponent {}{}, last relative change {}",
                g6(k.exponent),
                if k.exponent_fitted { " (fitted)" } else { "" },
                g6(k.last_relative_change)
            ));
            lines.push(format!("k closed form = {}", g6(k.closed_form)));
            lines.push(format!("k three-sum at N = {n_max} = {}", g6(k.three_sum)));
            let mut cums = Vec::new();
            for m in 3..=kmax {
                let c = asymptotics::limiting_cumulant(h, m, mesh, k.value)?;
                lines.push(format!("kappa_{m} = {} (mesh {mesh})", g6(c)));
                cums.push(c);
            }
            if want_rate {
                lines.push("rate = none (non-normal limit)".into());
            }
            record.insert("high_regime".into(), serde_json::to_value(&k).map_err(Error::from)?);
            record.insert("limiting_cumulants".into(), cums.into());
        }
    }
    let out = Output::create(&args.common.out)?;
    let json = serde_json::to_string_pretty(&record).map_err(Error::from)?;
    out.write("constants.json", &(json + "\n"))?;
    out.write(MANIFEST, &st.manifest())?;
    for l in lines {
        println!("{l}");
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    let keys = ["kind", "h", "n", "m", "alpha", "c", "sigma_vol", "reps"];
    let mut st = Settings::load("simulate", &args.common, &keys)?;
    st.flag("kind", args.kind);
    st.flag("h", args.h);
    st.flag("n", args.n);
    st.flag("m", args.m);
    st.flag("alpha", args.alpha);
    st.flag("c", args.c);
    st.flag("sigma_vol", args.sigma_vol);
    st.flag("reps", args.reps);
    let kind: ExperimentKind = st.or("kind", "temporal".to_string())?.parse()?;
    let seed = st.or("seed", 1u64)?;
    let reps = st.or("reps", 1usize)?;
    let n = st.or("n", 1000usize)?;
    let params = physical(&mut st)?;
    let exec = Exec::with_jobs(args.common.jobs);
    if reps == 0 {
        return Err(Failure::usage("--reps must be ≥ 1"));
    }
    let cov = match kind {
        ExperimentKind::Temporal => sampler::temporal_covariance(hurst(&st)?, n, params, exec)?,
        ExperimentKind::Rectangular => {
            let m = st.or("m", 32usize)?;
            let alpha = st.or("alpha", 2.5)?;
            if st.or("h", 0.5)? != 0.5 {
                return Err(Failure::usage("rectangular simulation needs h = 0.5"));
            }
            sampler::rect_covariance(RectGrid::new(n, m, alpha)?, params, exec)?
        }
    };
    let model = cov.factor()?;
    let samples = model.sample_increments(reps, seed, exec);

    let out = Output::create(&args.common.out)?;
    let path = out.path("increments.csv");
    let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
    let mut header = vec!["replication".to_string()];
    header.extend((0..model.dim()).map(|i| format!("d{i}")));
    w.write_record(&header).map_err(Error::from)?;
    for (r, row) in samples.iter().enumerate() {
        let mut rec = vec![r.to_string()];
        rec.extend(row.iter().map(|x| x.to_string()));
        w.write_record(&rec).map_err(Error::from)?;
    }
    w.flush()?;
    out.write(MANIFEST, &st.manifest())?;
    println!("wrote {reps} × {} increments to {}", model.dim(), path.display());
    Ok(())
}

fn read_increments(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut rd = csv::Reader::from_path(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let skip = rd.headers().map_err(Error::from)?.get(0) == Some("replication");
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(Error::from)?;
        let row = rec
            .iter()
            .skip(usize::from(skip))
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Failure::usage(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

fn cmd_estimate(args: EstimateArgs) -> CliResult<()> {
    let keys = ["input", "target", "h", "t", "n", "m", "alpha"];
    let mut st = Settings::load("estimate", &args.common, &keys)?;
    st.flag("input", args.input.map(|p| p.display().to_string()));
    st.flag("target", args.target);
    st.flag("h", args.h);
    st.flag("t", args.t);
    st.flag("n", args.n);
    st.flag("m", args.m);
    st.flag("alpha", args.alpha);
    let input: String = st.require("input")?;
    let target = st.or("target", "h".to_string())?;
    let rows = read_increments(Path::new(&input))?;

    let mut reports = Vec::with_capacity(rows.len());
    for row in &rows {
        let len = row.len();
        let r: EstimateReport = match target.as_str() {
            "h" => estimators::estimate_hurst(row, len)?,
            "c" => estimators::estimate_c(row, len, hurst(&st)?)?,
            "p" => estimators::estimate_p(row, len, hurst(&st)?)?,
            "q" => {
                let t = st.require("t")?;
                estimators::estimate_q(row, len, hurst(&st)?, t)?
            }
            "c-rect" => {
                let m: usize = st.require("m")?;
                let n = st.or("n", len / m.max(1))?;
                let alpha = st.or("alpha", 2.5)?;
                estimators::estimate_c_rect(row, &RectGrid::new(n, m, alpha)?, HurstParam::WHITE)?
            }
            other => return Err(Failure::usage(format!("unknown target '{other}' (h, c, p, q, c-rect)"))),
        };
        reports.push(r);
    }

    let out = Output::create(&args.common.out)?;
    let json = serde_json::to_string_pretty(&reports).map_err(Error::from)?;
    out.write("estimates.json", &(json + "\n"))?;
    out.write(MANIFEST, &st.manifest())?;
    for (i, r) in reports.iter().take(10).enumerate() {
        let ci = r.ci95.map(|(lo, hi)| format!(" ci95 [{}, {}]", g6(lo), g6(hi))).unwrap_or_default();
        println!("{i}: {target} = {}{ci}", g6(r.estimate));
        for note in &r.notes {
            println!("   note: {note}");
        }
    }
    if reports.len() > 10 {
        let mean = reports.iter().map(|r| r.estimate).sum::<f64>() / reports.len() as f64;
        println!("... {} rows, mean {target} = {}", reports.len(), g6(mean));
    }
    Ok(())
}

fn resolve_experiment(args: &ExperimentArgs, command: &'static str) -> CliResult<ExperimentConfig> {
    let preset = match (&args.preset, command) {
        (Some(p), _) => Some(p.as_str()),
        (None, "rect-experiment") => Some("rect-clt"),
        (None, _) => None,
    };
    let mut cfg = ExperimentConfig::default();
    if let Some(name) = preset {
        let text = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| Failure::usage(format!("unknown preset '{name}' (fig1-left, fig1-right, rect-clt)")))?;
        cfg.apply_kv(text)?;
    }
    let mut st = Settings::load(command, &args.common, &ExperimentConfig::KEYS)?;
    st.flag("name", args.name.clone());
    st.flag("kind", args.kind.clone());
    st.flag("h", args.h);
    st.flag("n", args.n);
    st.flag("m", args.m);
    st.flag("alpha", args.alpha);
    st.flag("c", args.c);
    st.flag("sigma_vol", args.sigma_vol);
    st.flag("reps", args.reps);
    st.flag("estimates", args.estimates);
    st.flag("cumulants", args.cumulants);
    st.flag("standardization", args.standardization.clone());
    for (k, v) in &st.values {
        cfg.set(k, v)?;
    }
    if command == "rect-experiment" && cfg.kind != ExperimentKind::Rectangular {
        return Err(Failure::usage("rect-experiment needs kind = rectangular"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(report: &ExperimentReport) {
    let cfg = &report.config;
    println!(
        "{}: {} h = {} n = {}{} reps = {} seed = {}",
        cfg.name,
        cfg.kind,
        g6(cfg.h),
        cfg.n,
        if cfg.kind == ExperimentKind::Rectangular { format!(" m = {} alpha = {}", cfg.m, g6(cfg.alpha)) } else { String::new() },
        cfg.reps,
        cfg.master_seed
    );
    let o = &report.oracle;
    println!("  exact E S = {}  exact E V^2 = {}", g6(o.mean_s), g6(o.variance_v));
    if let Some(z) = o.variance_z {
        println!("  empirical var(V) vs exact: z = {}", g6(z));
    }
    if let (Some(sd), Some(label)) = (o.asymptotic_sd, &o.asymptotic_label) {
        println!("  asymptotic sd = {} ({label})", g6(sd));
    }
    println!("  KS 1% critical value = {}", g6(report.ks_critical_1pct));
    for s in &report.statistics {
        println!(
            "  {:<15} mean {:>12}  var {:>12}  skew {:>10} (se {})  ks {}",
            s.name,
            g6(s.mean),
            g6(s.variance),
            g6(s.skewness),
            g6(s.skewness_se),
            g6(s.ks_standard_normal)
        );
    }
}

fn cmd_experiment(args: ExperimentArgs, command: &'static str) -> CliResult<()> {
    let cfg = resolve_experiment(&args, command)?;
    let exec = Exec::with_jobs(args.common.jobs);
    let report = montecarlo::run_experiment(&cfg, exec)?;

    let out = Output::create(&args.common.out)?;
    out.write("report.json", &report.to_json()?)?;
    let mut buf = Vec::new();
    report.write_records_csv(&mut buf)?;
    out.write("records.csv", &String::from_utf8_lossy(&buf))?;
    buf.clear();
    report.write_histogram_csv(&mut buf)?;
    out.write("histogram.csv", &String::from_utf8_lossy(&buf))?;
    out.write(MANIFEST, &(manifest_header(command) + &cfg.to_kv()))?;
    print_report(&report);
    println!("  wall time {} s; outputs in {}", g6(report.wall_time_secs), out.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("fwave: {line}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Cov(a) => cmd_cov(a),
        Command::Constants(a) => cmd_constants(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Experiment(a) => cmd_experiment(a, "experiment"),
        Command::RectExperiment(a) => cmd_experiment(a, "rect-experiment"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fwave: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
