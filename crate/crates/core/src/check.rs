//! Invariant suite behind `fracsob check`: every line measures one property on seeded
//! random data and compares it with a fixed tolerance.

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curve::{l2_norm, reparametrize, Diffeo, DiscreteCurve};
use crate::error::Result;
use crate::io;
use crate::metric::{
    integer_w_total, metric, metric_symmetric, spray, w_and_w0, MetricConfig, SprayBreakdown,
};
use crate::operator::DerivativeScheme;
use crate::shapes;
use crate::solver::{exp_map, exp_map_with, ExpOptions, IntegratorSettings, Scheme};
use crate::symbol::{
    class_report, eval_symbol, sqrt_symbol, symbol_lambda_derivative, ClassReport, Family, LambdaSymbol,
};

/// Default seed of the randomized checks (overridden by `FRACSOB_SEED` in the CLI).
pub const DEFAULT_SEED: u64 = 20_240_611;

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub seed: u64,
    /// Grid of the static checks.
    pub n: usize,
    /// Grid of the integration checks.
    pub dynamics_n: usize,
    /// Random `(c, h)` pairs per static check.
    pub pairs: usize,
    pub dynamics: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, n: 128, dynamics_n: 64, pairs: 3, dynamics: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub seed: u64,
    pub family: Family,
    pub order: f64,
    pub class_report: ClassReport,
    pub lines: Vec<CheckLine>,
    /// Spray terms at the first test pair, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spray_dump: Option<serde_json::Value>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }

    pub fn line(&self, name: &str) -> Option<&CheckLine> {
        self.lines.iter().find(|l| l.name == name)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "family {:?}, order r = {}, seed {}", self.family, self.order, self.seed)?;
        for l in &self.lines {
            write!(
                f,
                "[{}] {:<40} measured {:>10.3e}  tolerance {:>8.1e}",
                if l.passed { "pass" } else { "FAIL" },
                l.name,
                l.measured,
                l.tolerance
            )?;
            if let Some(note) = &l.note {
                write!(f, "  ({note})")?;
            }
            writeln!(f)?;
        }
        let failed = self.lines.iter().filter(|l| !l.passed).count();
        write!(f, "{} checks, {failed} failed", self.lines.len())
    }
}

struct Lines(Vec<CheckLine>);

impl Lines {
    fn push(&mut self, name: &str, measured: f64, tolerance: f64) {
        self.0.push(CheckLine {
            name: name.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
            note: None,
        });
    }

    /// A line whose verdict is decided elsewhere; `measured` is shown for information.
    fn push_verdict(&mut self, name: &str, measured: f64, passed: bool) {
        self.0.push(CheckLine { name: name.into(), measured, tolerance: 0.0, passed, note: None });
    }

    fn push_result(&mut self, name: &str, measured: Result<f64>, tolerance: f64) {
        match measured {
            Ok(m) => self.push(name, m, tolerance),
            Err(e) => self.0.push(CheckLine {
                name: name.into(),
                measured: f64::NAN,
                tolerance,
                passed: false,
                note: Some(e.to_string()),
            }),
        }
    }
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(f64::MIN_POSITIVE)
}

/// `u ∘ φ` for the grid rotation by `shift` samples.
pub fn rotate_rows(u: &DMatrix<f64>, shift: usize) -> DMatrix<f64> {
    let n = u.nrows();
    DMatrix::from_fn(n, u.ncols(), |k, j| u[((k + shift) % n, j)])
}

/// Smooth non-aligned test diffeomorphisms `θ ↦ θ + p(θ)`.
pub fn test_diffeos(n: usize) -> Result<Vec<Diffeo>> {
    Ok(vec![
        Diffeo::from_fn(n, |t| 0.2 * t.sin())?,
        Diffeo::from_fn(n, |t| 0.1 * (2.0 * t).cos() - 0.05 * (3.0 * t).sin() + 0.3)?,
        Diffeo::from_fn(n, |t| 0.25 * (t + 0.7).sin() + 0.03 * (4.0 * t).cos())?,
    ])
}

/// Lengths at which symbol tables are probed.
const LAMBDAS: [f64; 4] = [0.5, 2.0, TAU, 20.0];

fn symbol_lines(s: &LambdaSymbol, lines: &mut Lines) -> Result<()> {
    let mut sqrt_err: f64 = 0.0;
    let mut deriv_err: f64 = 0.0;
    for &lambda in &LAMBDAS {
        for m in 0..=64 {
            let a = eval_symbol(s, lambda, m)?;
            let b = sqrt_symbol(s, lambda, m)?;
            sqrt_err = sqrt_err.max((&b * &b - &a).amax() / a.amax());
            if s.has_lambda_derivative() {
                let eps = 1e-4 * lambda;
                let fd = (eval_symbol(s, lambda + eps, m)? - eval_symbol(s, lambda - eps, m)?) / (2.0 * eps);
                let an = symbol_lambda_derivative(s, lambda, m)?;
                deriv_err = deriv_err.max((fd - &an).amax() / an.amax().max(1e-300 + a.amax() / lambda));
            }
        }
    }
    lines.push("sqrt_symbol squared equals symbol", sqrt_err, 1e-12);
    if s.has_lambda_derivative() {
        lines.push("lambda-derivative vs central difference", deriv_err, 1e-6);
    }
    Ok(())
}

fn static_lines(cfg: &MetricConfig, opts: &CheckOptions, lines: &mut Lines, dump: &mut Option<SprayBreakdown>) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = opts.n;
    let d = cfg.symbol().dim();
    let pairs: Vec<(DiscreteCurve, DMatrix<f64>, DMatrix<f64>)> = (0..opts.pairs)
        .map(|_| {
            let c = shapes::random_curve(&mut rng, n, 6);
            let h = shapes::random_field(&mut rng, n, d, 8, 0.5, true);
            let k = shapes::random_field(&mut rng, n, d, 8, 0.5, true);
            (DiscreteCurve::new(c).expect("test curves are immersions"), h, k)
        })
        .collect();

    // curve geometry
    lines.push_result(
        "length invariant under reparametrization",
        (|| {
            let mut worst: f64 = 0.0;
            for (c, _, _) in &pairs {
                for phi in test_diffeos(n)? {
                    let cp = c.reparametrized(&phi)?;
                    worst = worst.max((cp.length() - c.length()).abs() / c.length());
                }
            }
            Ok(worst)
        })(),
        1e-9,
    );
    lines.push_result(
        "reparametrize then inverse is identity",
        (|| {
            let mut worst: f64 = 0.0;
            for (_, h, _) in &pairs {
                for phi in test_diffeos(n)? {
                    let back = reparametrize(&reparametrize(h, &phi)?, &phi.inverse())?;
                    worst = worst.max(rel(&back, h));
                }
            }
            Ok(worst)
        })(),
        1e-8,
    );

    // conjugated operator
    lines.push_result(
        "A_c symmetric in L2(ds)",
        (|| {
            let mut worst: f64 = 0.0;
            for (c, h, k) in &pairs {
                let a = metric(cfg, c, h, k)?;
                let b = metric(cfg, c, k, h)?;
                let scale = (metric(cfg, c, h, h)? * metric(cfg, c, k, k)?).sqrt();
                worst = worst.max((a - b).abs() / scale);
            }
            Ok(worst)
        })(),
        1e-10,
    );
    let min_ratio = (|| {
        let mut min = f64::INFINITY;
        for (c, h, _) in &pairs {
            min = min.min(metric(cfg, c, h, h)? / l2_norm(h).powi(2));
        }
        Ok(min)
    })();
    match min_ratio {
        Ok(m) => lines.push_verdict("metric positive (min G(h,h)/|h|^2)", m, m > 0.0),
        Err(e) => lines.push_result("metric positive (min G(h,h)/|h|^2)", Err(e), 0.0),
    }
    lines.push_result(
        "B_c B_c equals A_c",
        (|| {
            let mut worst: f64 = 0.0;
            for (c, h, k) in &pairs {
                let bb = cfg.apply_sqrt(c, &cfg.apply_sqrt(c, h)?)?;
                worst = worst.max(rel(&bb, &cfg.apply(c, h)?));
                let g = metric(cfg, c, h, k)?;
                let gs = metric_symmetric(cfg, c, h, k)?;
                let scale = (metric(cfg, c, h, h)? * metric(cfg, c, k, k)?).sqrt();
                worst = worst.max((g - gs).abs() / scale);
            }
            Ok(worst)
        })(),
        1e-10,
    );
    lines.push_result(
        "A_c equivariant under grid rotations",
        (|| {
            let mut worst: f64 = 0.0;
            for (c, h, _) in &pairs {
                for shift in [1, n / 3, n / 2 + 5] {
                    let cr = DiscreteCurve::new(rotate_rows(c.samples(), shift))?;
                    let lhs = cfg.apply(&cr, &rotate_rows(h, shift))?;
                    worst = worst.max(rel(&lhs, &rotate_rows(&cfg.apply(c, h)?, shift)));
                }
            }
            Ok(worst)
        })(),
        1e-10,
    );
    lines.push_result(
        "A_c commutes with D_s",
        (|| {
            let mut worst: f64 = 0.0;
            for (c, h, _) in &pairs {
                let lhs = cfg.apply(c, &c.arc_derivative(h)?)?;
                let rhs = c.arc_derivative(&cfg.apply(c, h)?)?;
                worst = worst.max(rel(&lhs, &rhs));
            }
            Ok(worst)
        })(),
        1e-8,
    );

    // metric
    lines.push_result(
        "metric invariant under smooth diffeos",
        (|| {
            let mut worst: f64 = 0.0;
            for (c, h, k) in &pairs {
                let g = metric(cfg, c, h, k)?;
                let scale = (metric(cfg, c, h, h)? * metric(cfg, c, k, k)?).sqrt();
                for phi in test_diffeos(n)? {
                    let cp = c.reparametrized(&phi)?;
                    let gp = metric(cfg, &cp, &reparametrize(h, &phi)?, &reparametrize(k, &phi)?)?;
                    worst = worst.max((gp - g).abs() / scale);
                }
            }
            Ok(worst)
        })(),
        1e-8,
    );
    if cfg.symbol().family() == Family::ScaleInvariant {
        lines.push_result(
            "scale-invariant metric unchanged under scaling",
            (|| {
                let mut worst: f64 = 0.0;
                for (c, h, k) in &pairs {
                    let g = metric(cfg, c, h, k)?;
                    let scale = (metric(cfg, c, h, h)? * metric(cfg, c, k, k)?).sqrt();
                    for s in [0.5, 2.0, 5.0] {
                        let cs = DiscreteCurve::new(c.samples() * s)?;
                        let gs = metric(cfg, &cs, &(h * s), &(k * s))?;
                        worst = worst.max((gs - g).abs() / scale);
                    }
                }
                Ok(worst)
            })(),
            1e-9,
        );
    }
    if cfg.symbol().family() == Family::ConstantCoefficient {
        lines.push_result(
            "integer oracle: w + w0 equals sum (-1)^j alpha_j W_j",
            (|| {
                let mut worst: f64 = 0.0;
                for (c, h, _) in &pairs {
                    let (w, w0) = w_and_w0(cfg, c, h)?;
                    let general = DMatrix::from_column_slice(n, 1, w.values.add_scalar(w0).as_slice());
                    let closed = integer_w_total(cfg, c, h)?;
                    worst = worst.max(rel(&general, &DMatrix::from_column_slice(n, 1, closed.as_slice())));
                }
                Ok(worst)
            })(),
            1e-8,
        );
    }
    if cfg.require_dynamics().is_ok() {
        lines.push_result(
            "w integrand has zero ds-mean",
            (|| {
                let mut worst: f64 = 0.0;
                for (c, h, _) in &pairs {
                    worst = worst.max(w_and_w0(cfg, c, h)?.0.relative_mean());
                }
                Ok(worst)
            })(),
            crate::metric::W_MEAN_TOLERANCE,
        );
        lines.push_result(
            "spray form matches momentum form",
            (|| {
                let mut worst: f64 = 0.0;
                for (i, (c, h, _)) in pairs.iter().enumerate() {
                    let (s, parts) = spray(cfg, c, h, DerivativeScheme::Central)?;
                    // ∂_t(A_c c_t) = A_c c_tt + (D_{c,c_t} A_c) c_t
                    let lhs = cfg.apply(c, &s)? + &parts.term_operator_derivative;
                    let rhs = crate::metric::momentum_rhs(cfg, c, h)?;
                    let scale = parts.total().amax().max(f64::MIN_POSITIVE);
                    worst = worst.max((lhs - rhs.values()).amax() / scale);
                    if i == 0 {
                        *dump = Some(parts);
                    }
                }
                Ok(worst)
            })(),
            1e-8,
        );
        lines.push_result(
            "spray is quadratic in the velocity",
            (|| {
                let mut worst: f64 = 0.0;
                for (c, h, _) in &pairs {
                    let (s, _) = spray(cfg, c, h, DerivativeScheme::Richardson)?;
                    for t in [2.0, -1.0] {
                        let (st, _) = spray(cfg, c, &(h * t), DerivativeScheme::Richardson)?;
                        worst = worst.max(rel(&st, &(s.values() * (t * t))));
                    }
                }
                Ok(worst)
            })(),
            1e-8,
        );
    }
}

fn dynamics_lines(cfg: &MetricConfig, opts: &CheckOptions, lines: &mut Lines) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let n = opts.dynamics_n;
    let d = cfg.symbol().dim();
    let c0 = DiscreteCurve::new(shapes::ellipse(n, 1.5, 1.0)).expect("ellipse is an immersion");
    let h0 = shapes::random_field(&mut rng, n, d, 6, 0.3, true);
    let path = exp_map(cfg, &c0, &h0, 1.0, 200);
    let path = match path {
        Ok(p) => p,
        Err(e) => {
            lines.push_result("exp_map energy drift", Err(e), 1e-6);
            return;
        }
    };
    lines.push_result(
        "exp_map energy drift",
        crate::solver::conservation_report(&path).map(|r| r.max_relative_drift),
        1e-6,
    );
    lines.push_result(
        "stored momentum equals A_c c_t",
        crate::solver::conservation_report(&path).map(|r| r.max_momentum_residual),
        1e-8,
    );
    lines.push_result(
        "time reversal returns to start",
        (|| {
            let end = path.end();
            let c1 = DiscreteCurve::new(end.curve.clone())?;
            let v = end.velocity.clone().expect("exp_map stores velocities");
            let back = exp_map(cfg, &c1, &(-v), 1.0, 200)?;
            Ok((&back.end().curve - c0.samples()).amax())
        })(),
        1e-6,
    );
    lines.push_result(
        "spray and momentum integration agree",
        (|| {
            let o = ExpOptions {
                settings: IntegratorSettings { steps: 200, stride: 200, scheme: Scheme::Rk4Spray },
                curve_options: path.curve_options(),
            };
            let sp = exp_map_with(cfg, &c0, &h0, 1.0, &o)?;
            Ok((&sp.end().curve - &path.end().curve).amax())
        })(),
        1e-6,
    );
    lines.push_result(
        "exp_map equivariant under grid rotations",
        (|| {
            let shift = n / 4 + 1;
            let cr = DiscreteCurve::new(rotate_rows(c0.samples(), shift))?;
            let pr = exp_map(cfg, &cr, &rotate_rows(&h0, shift), 1.0, 200)?;
            Ok((&pr.end().curve - rotate_rows(&path.end().curve, shift)).amax())
        })(),
        1e-6,
    );
}

/// Runs every applicable check for `symbol`.
///
/// A symbol that fails its class diagnostics produces only the class lines; the operator,
/// metric and dynamics checks need a valid metric.
pub fn run_checks(symbol: &LambdaSymbol, opts: &CheckOptions, dump_spray: bool) -> Result<CheckReport> {
    let max_mode = if symbol.family() == Family::CustomTable { 0 } else { 256 };
    let report = class_report(symbol, (0.1, 100.0), 7, max_mode.max(table_len(symbol)), 0)?;
    let mut lines = Lines(Vec::new());
    lines.push("symbol Hermitian", if report.hermitian { 0.0 } else { 1.0 }, 0.0);
    lines.push_verdict("symbol positive (min eigenvalue)", report.min_eigenvalue, report.positive);
    lines.push_verdict("symbol elliptic (margin)", report.ellipticity_margin, report.elliptic);
    let mut dump = None;
    if report.passes() {
        symbol_lines(symbol, &mut lines)?;
        let cfg = MetricConfig::new(symbol.clone())?;
        static_lines(&cfg, opts, &mut lines, &mut dump);
        if opts.dynamics && cfg.require_dynamics().is_ok() {
            dynamics_lines(&cfg, opts, &mut lines);
        }
    }
    let round_trip = {
        let c = shapes::random_curve(&mut ChaCha8Rng::seed_from_u64(opts.seed), 64, 6);
        let back = io::curve_from_json(&io::curve_to_json(&c))?;
        if back == c { 0.0 } else { 1.0 }
    };
    lines.push("curve JSON round trip bit-exact", round_trip, 0.0);
    Ok(CheckReport {
        seed: opts.seed,
        family: symbol.family(),
        order: symbol.order(),
        class_report: report,
        lines: lines.0,
        spray_dump: if dump_spray { dump.map(|b| b.to_json()) } else { None },
    })
}

fn table_len(s: &LambdaSymbol) -> i64 {
    if s.family() != Family::CustomTable {
        return 0;
    }
    let mut m = 0;
    while s.value(1.0, m + 1).is_ok() {
        m += 1;
    }
    m
}
