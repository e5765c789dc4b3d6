//! Command-line front end: `exp`, `match`, `check` and `symbols`.
//!
//! A run is described by a JSON config (see [`RunConfig`]); every flag has a config
//! equivalent and flags win. Exit codes: 0 success, 1 config or input error, 2 solver
//! failure, 3 failed checks.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::check::{self, CheckOptions};
use crate::curve::DiscreteCurve;
use crate::error::{Error, Result};
use crate::io;
use crate::metric::MetricConfig;
use crate::solver::{self, ExpOptions, IntegratorSettings, Scheme, ShootingOptions};
use crate::spectral;
use crate::symbol::{class_report, eval_symbol, sqrt_symbol, symbol_lambda_derivative, Family, SymbolConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

/// Environment variable overriding the seed of randomized checks.
pub const SEED_ENV: &str = "FRACSOB_SEED";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Samples per curve; input curves with another `N` are resampled.
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Final time of `exp`.
    pub t: f64,
    pub steps: usize,
    pub stride: usize,
    pub scheme: Scheme,
    /// Fourier truncation of the shooting unknown.
    pub k: usize,
    pub max_iter: usize,
    /// Relative endpoint tolerance of `match`.
    pub tolerance: f64,
    pub damping: f64,
    /// RK4 steps per shot in `match`.
    pub shooting_steps: usize,
    /// Relative energy drift above which a conservation report is flagged.
    pub drift_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let i = IntegratorSettings::default();
        let s = ShootingOptions::default();
        Self {
            t: 1.0,
            steps: i.steps,
            stride: i.stride,
            scheme: i.scheme,
            k: s.modes,
            max_iter: s.max_iter,
            tolerance: s.relative_tolerance,
            damping: s.damping,
            shooting_steps: s.steps,
            drift_threshold: solver::DRIFT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    pub curve: Option<PathBuf>,
    pub velocity: Option<PathBuf>,
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Any of `csv`, `json`, `svg`.
    pub formats: Vec<String>,
    /// Frame stride of SVG snapshots.
    pub svg_stride: usize,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            curve: None,
            velocity: None,
            source: None,
            target: None,
            out_dir: PathBuf::from("fracsob-out"),
            formats: vec!["csv".into(), "json".into()],
            svg_stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_metric")]
    pub metric: SymbolConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub io: IoConfig,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_metric() -> SymbolConfig {
    SymbolConfig { family: Family::BesselFractional, r: 1.5, alphas: vec![1.0], d: 2, table: None, derivative_table: None }
}

impl RunConfig {
    /// Parses and validates a config document.
    pub fn from_value(v: Value) -> Result<Self> {
        // Parse the sections separately so that errors name the block they come from.
        for section in ["metric", "grid", "solver", "io"] {
            if let Some(block) = v.get(section) {
                let r = match section {
                    "metric" => serde_json::from_value::<SymbolConfig>(block.clone()).map(drop),
                    "grid" => serde_json::from_value::<GridConfig>(block.clone()).map(drop),
                    "solver" => serde_json::from_value::<SolverConfig>(block.clone()).map(drop),
                    _ => serde_json::from_value::<IoConfig>(block.clone()).map(drop),
                };
                r.map_err(|e| Error::Config(format!("{section}: {e}")))?;
            }
        }
        let cfg: RunConfig = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(n) = self.grid.n {
            if n < 8 || n % 2 != 0 {
                return Err(Error::Config(format!("grid.n: must be even and >= 8, got {n}")));
            }
        }
        let s = &self.solver;
        for (key, v) in [("solver.tolerance", s.tolerance), ("solver.drift_threshold", s.drift_threshold)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{key}: must be positive, got {v}")));
            }
        }
        if !(s.t.is_finite() && s.t > 0.0) {
            return Err(Error::Config(format!("solver.t: must be positive, got {}", s.t)));
        }
        if !(s.damping >= 0.0) {
            return Err(Error::Config(format!("solver.damping: must be non-negative, got {}", s.damping)));
        }
        if s.stride == 0 || self.io.svg_stride == 0 {
            return Err(Error::Config("solver.stride / io.svg_stride: must be positive".into()));
        }
        if let Some(f) = self.io.formats.iter().find(|f| !["csv", "json", "svg"].contains(&f.as_str())) {
            return Err(Error::Config(format!("io.formats: unknown format {f:?}")));
        }
        Ok(())
    }

    /// Builds the metric, requiring the symbol class diagnostics to pass.
    pub fn metric_config(&self) -> Result<MetricConfig> {
        let symbol = self.metric.build().map_err(|e| Error::Config(format!("metric: {e}")))?;
        MetricConfig::new(symbol).map_err(|e| Error::Config(format!("metric: {e}")))
    }

    fn wants(&self, format: &str) -> bool {
        self.io.formats.iter().any(|f| f == format)
    }
}

#[derive(Debug, Parser)]
#[command(name = "fracsob", version, about = "Geodesics of fractional Sobolev metrics on closed curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the geodesic with given initial curve and velocity.
    Exp {
        #[command(flatten)]
        common: Common,
        /// Initial curve file.
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Initial velocity file.
        #[arg(long)]
        velocity: Option<PathBuf>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
        /// `rk4_momentum` or `rk4_spray`.
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Find the geodesic between two curves by shooting.
    Match {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long)]
        target: Option<PathBuf>,
        /// Fourier truncation of the initial velocity.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run the invariant suite for the configured metric.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Skip the integration checks.
        #[arg(long)]
        no_dynamics: bool,
        /// Include the individual spray terms of the first test pair in the report.
        #[arg(long)]
        dump_spray: bool,
    },
    /// Tabulate the symbol, its λ-derivative and square root, with class diagnostics.
    Symbols {
        #[command(flatten)]
        common: Common,
        /// Lengths at which to tabulate.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[arg(long, default_value_t = 64)]
        max_mode: i64,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated output formats (csv, json, svg).
    #[arg(long, value_delimiter = ',')]
    formats: Option<Vec<String>>,
}

/// Sets `doc[section][key] = value`, creating the section when absent.
fn set(doc: &mut Value, section: &str, key: &str, value: Value) {
    let root = doc.as_object_mut().expect("config root is an object");
    let entry = root.entry(section).or_insert_with(|| json!({}));
    if let Some(obj) = entry.as_object_mut() {
        obj.insert(key.into(), value);
    }
}

fn load_config(common: &Common, overrides: &[(&str, &str, Option<Value>)]) -> Result<RunConfig> {
    let mut doc = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("config {}: {e}", p.display())))?;
            serde_json::from_str::<Value>(&text).map_err(|e| Error::Config(format!("config: {e}")))?
        }
        None => json!({}),
    };
    if !doc.is_object() {
        return Err(Error::Config("config: top level must be an object".into()));
    }
    // Metric flags fill in a block that the config may have left out entirely.
    let metric_flags = [
        ("family", common.family.clone().map(Value::from)),
        ("r", common.r.map(Value::from)),
        ("alphas", common.alphas.clone().map(Value::from)),
        ("d", common.d.map(Value::from)),
    ];
    if doc.get("metric").is_none() && metric_flags.iter().any(|(_, v)| v.is_some()) {
        let base = serde_json::to_value(default_metric()).expect("metric serializes");
        doc["metric"] = base;
    }
    for (key, v) in metric_flags {
        if let Some(v) = v {
            set(&mut doc, "metric", key, v);
        }
    }
    // An integer family chosen on the command line has its order fixed by the coefficients.
    if matches!(common.family.as_deref(), Some("constant_coefficient" | "scale_invariant")) && common.r.is_none() {
        let n = doc["metric"]["alphas"].as_array().map_or(0, |a| a.len());
        set(&mut doc, "metric", "r", Value::from(n.saturating_sub(1) as f64));
    }
    let mut all: Vec<(&str, &str, Option<Value>)> = vec![
        ("grid", "n", common.n.map(Value::from)),
        ("io", "out_dir", common.out.as_ref().map(|p| Value::from(p.to_string_lossy().into_owned()))),
        ("io", "formats", common.formats.clone().map(Value::from)),
    ];
    all.extend(overrides.iter().cloned());
    for (section, key, v) in all {
        if let Some(v) = v {
            set(&mut doc, section, key, v);
        }
    }
    RunConfig::from_value(doc)
}

fn path_value(p: &Option<PathBuf>) -> Option<Value> {
    p.as_ref().map(|p| Value::from(p.to_string_lossy().into_owned()))
}

/// Reads a curve file, resampling to `grid.n` when set.
fn load_samples(path: Option<&PathBuf>, key: &str, cfg: &RunConfig) -> Result<DMatrix<f64>> {
    let path = path.ok_or_else(|| Error::Config(format!("io.{key}: missing input file")))?;
    let m = io::read_curve(path).map_err(|e| Error::Config(format!("io.{key} ({}): {e}", path.display())))?;
    if m.ncols() != cfg.metric.d {
        return Err(Error::Config(format!("io.{key}: curve has d = {}, metric has d = {}", m.ncols(), cfg.metric.d)));
    }
    match cfg.grid.n {
        Some(n) if n != m.nrows() => {
            if m.nrows() % 2 != 0 {
                return Err(Error::Config(format!("io.{key}: cannot resample odd N = {}", m.nrows())));
            }
            let targets = spectral::grid(n);
            Ok(spectral::interpolation_matrix(targets.as_slice(), m.nrows()) * m)
        }
        _ => Ok(m),
    }
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.io.out_dir)?;
    Ok(&cfg.io.out_dir)
}

fn write_path(cfg: &RunConfig, dir: &Path, path: &solver::GeodesicPath) -> Result<()> {
    if cfg.wants("csv") {
        fs::write(dir.join("path.csv"), io::path_to_csv(path))?;
    }
    if cfg.wants("json") {
        io::write_json(&dir.join("path.json"), &io::path_to_json(path))?;
    }
    if cfg.wants("svg") {
        fs::write(dir.join("path.svg"), io::path_to_svg(path, cfg.io.svg_stride))?;
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

fn cmd_exp(cfg: &RunConfig) -> Result<i32> {
    let metric = cfg.metric_config()?;
    let c0 = load_samples(cfg.io.curve.as_ref(), "curve", cfg)?;
    let h0 = load_samples(cfg.io.velocity.as_ref(), "velocity", cfg)?;
    if h0.shape() != c0.shape() {
        return Err(Error::Config("io.velocity: must have the same N and d as the curve".into()));
    }
    let c0 = DiscreteCurve::new(c0).map_err(|e| Error::Config(format!("io.curve: {e}")))?;
    let s = &cfg.solver;
    let opts = ExpOptions {
        settings: IntegratorSettings { steps: s.steps, stride: s.stride, scheme: s.scheme },
        ..ExpOptions::default()
    };
    let path = solver::exp_map_with(&metric, &c0, &h0, s.t, &opts)?;
    let dir = out_dir(cfg)?;
    write_path(cfg, dir, &path)?;
    let report = solver::conservation_report_with(&path, s.drift_threshold)?;
    io::write_json(&dir.join("conservation.json"), &report)?;
    println!(
        "exp: {} frames to t = {}, max relative energy drift {:.3e}{}",
        path.frames().len(),
        s.t,
        report.max_relative_drift,
        if report.flagged { " (flagged)" } else { "" }
    );
    Ok(EXIT_OK)
}

fn cmd_match(cfg: &RunConfig) -> Result<i32> {
    let metric = cfg.metric_config()?;
    let c0 = load_samples(cfg.io.source.as_ref(), "source", cfg)?;
    let c1 = load_samples(cfg.io.target.as_ref(), "target", cfg)?;
    if c0.shape() != c1.shape() {
        return Err(Error::Config("io.target: must have the same N and d as the source".into()));
    }
    let c0 = DiscreteCurve::new(c0).map_err(|e| Error::Config(format!("io.source: {e}")))?;
    let c1 = DiscreteCurve::new(c1).map_err(|e| Error::Config(format!("io.target: {e}")))?;
    let s = &cfg.solver;
    let opts = ShootingOptions {
        modes: s.k,
        max_iter: s.max_iter,
        damping: s.damping,
        steps: s.shooting_steps,
        relative_tolerance: s.tolerance,
    };
    let (result, code) = match solver::geodesic_bvp(&metric, &c0, &c1, &opts) {
        Ok(r) => (r, EXIT_OK),
        Err(Error::NoConvergence(best)) => (*best, EXIT_SOLVER),
        Err(e) => return Err(e),
    };
    let dir = out_dir(cfg)?;
    io::write_json(&dir.join("shooting.json"), &result.to_json())?;
    write_path(cfg, dir, &result.path)?;
    println!(
        "match: residual {:.3e} after {} iterations ({})",
        result.residual,
        result.iterations,
        if code == EXIT_OK { "converged" } else { "not converged" }
    );
    Ok(code)
}

fn cmd_check(cfg: &RunConfig, dynamics: bool, dump_spray: bool) -> Result<i32> {
    let symbol = cfg.metric.build().map_err(|e| Error::Config(format!("metric: {e}")))?;
    let mut opts = CheckOptions { seed: cfg.seed.unwrap_or(check::DEFAULT_SEED), dynamics, ..CheckOptions::default() };
    if let Some(n) = cfg.grid.n {
        opts.n = n;
    }
    let report = check::run_checks(&symbol, &opts, dump_spray)?;
    println!("{report}");
    let dir = out_dir(cfg)?;
    io::write_json(&dir.join("check.json"), &report)?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_CHECK })
}

fn cmd_symbols(cfg: &RunConfig, lambdas: &[f64], max_mode: i64) -> Result<i32> {
    let symbol = cfg.metric.build().map_err(|e| Error::Config(format!("metric: {e}")))?;
    let rows = |m: DMatrix<f64>| -> Vec<Vec<f64>> { m.row_iter().map(|r| r.iter().copied().collect()).collect() };
    let mut tables = Vec::new();
    let mut csv = String::from("lambda,m,a,da_dlambda,sqrt_a\n");
    for &lambda in lambdas {
        let mut entries = Vec::new();
        for m in 0..=max_mode {
            let a = eval_symbol(&symbol, lambda, m)?;
            let da = symbol_lambda_derivative(&symbol, lambda, m).ok();
            let sq = sqrt_symbol(&symbol, lambda, m).ok();
            csv.push_str(&format!(
                "{lambda:?},{m},{:?},{},{}\n",
                a[(0, 0)],
                da.as_ref().map_or(String::new(), |x| format!("{:?}", x[(0, 0)])),
                sq.as_ref().map_or(String::new(), |x| format!("{:?}", x[(0, 0)])),
            ));
            entries.push(json!({ "m": m, "a": rows(a), "da_dlambda": da.map(rows), "sqrt_a": sq.map(rows) }));
        }
        tables.push(json!({ "lambda": lambda, "entries": entries }));
    }
    let (lo, hi) = lambdas.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| (lo.min(l), hi.max(l)));
    let report = class_report(&symbol, (lo, hi), lambdas.len(), max_mode, 2)?;
    let dir = out_dir(cfg)?;
    io::write_json(
        &dir.join("symbols.json"),
        &json!({ "family": symbol.family(), "order": symbol.order(), "tables": tables, "class_report": report }),
    )?;
    fs::write(dir.join("symbols.csv"), csv)?;
    println!(
        "symbols: {:?} r = {}, hermitian {}, positive {}, elliptic {} (margin {:.3e})",
        symbol.family(),
        symbol.order(),
        report.hermitian,
        report.positive,
        report.elliptic,
        report.ellipticity_margin
    );
    Ok(if report.passes() { EXIT_OK } else { EXIT_CHECK })
}

fn seed_override() -> Result<Option<Value>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse::<u64>()
            .map(|v| Some(Value::from(v)))
            .map_err(|_| Error::Config(format!("{SEED_ENV}: not an unsigned integer: {s:?}"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Exp { common, curve, velocity, t, steps, stride, scheme } => {
            let cfg = load_config(
                &common,
                &[
                    ("io", "curve", path_value(&curve)),
                    ("io", "velocity", path_value(&velocity)),
                    ("solver", "t", t.map(Value::from)),
                    ("solver", "steps", steps.map(Value::from)),
                    ("solver", "stride", stride.map(Value::from)),
                    ("solver", "scheme", scheme.map(Value::from)),
                ],
            )?;
            cmd_exp(&cfg)
        }
        Command::Match { common, source, target, k, max_iter, tolerance, steps } => {
            let cfg = load_config(
                &common,
                &[
                    ("io", "source", path_value(&source)),
                    ("io", "target", path_value(&target)),
                    ("solver", "k", k.map(Value::from)),
                    ("solver", "max_iter", max_iter.map(Value::from)),
                    ("solver", "tolerance", tolerance.map(Value::from)),
                    ("solver", "shooting_steps", steps.map(Value::from)),
                ],
            )?;
            cmd_match(&cfg)
        }
        Command::Check { common, seed, no_dynamics, dump_spray } => {
            let mut cfg = load_config(&common, &[])?;
            if let Some(s) = seed_override()?.and_then(|v| v.as_u64()) {
                cfg.seed = Some(s);
            }
            if seed.is_some() {
                cfg.seed = seed;
            }
            cmd_check(&cfg, !no_dynamics, dump_spray)
        }
        Command::Symbols { common, lambdas, max_mode } => {
            let cfg = load_config(&common, &[])?;
            let lambdas = lambdas.unwrap_or_else(|| vec![0.5, 1.0, std::f64::consts::TAU, 20.0]);
            if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0)) {
                return Err(Error::Config("lambdas: must be positive".into()));
            }
            if max_mode < 0 {
                return Err(Error::Config("max_mode: must be non-negative".into()));
            }
            cmd_symbols(&cfg, &lambdas, max_mode)
        }
    }
}

/// Parses `args` (including the program name), runs the subcommand and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
