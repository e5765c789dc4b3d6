//! Geodesic initial- and boundary-value problems.
//!
//! The exponential map integrates the momentum form of the geodesic equation,
//!
//! ```text
//! ċ = h,   μ̇ = momentum_rhs(c, h),   h = A_c⁻¹ μ,
//! ```
//!
//! with classical fixed-step RK4. The endpoint problem is solved by shooting with a
//! Levenberg–Marquardt iteration over a band-limited initial velocity.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::curve::{l2_norm, CurveOptions, DiscreteCurve, TangentField};
use crate::error::{Error, Result};
use crate::metric::{kinetic_energy, momentum_rhs, spray, MetricConfig};
use crate::operator::DerivativeScheme;

/// One stored state of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub curve: DMatrix<f64>,
    pub velocity: Option<DMatrix<f64>>,
    /// `μ = A_c c_t`.
    pub momentum: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// RK4 on `(c, A_c c_t)`; needs no derivative of `A_c` in `c`.
    Rk4Momentum,
    /// RK4 on `(c, c_t)` with the spray, `(D_{c,h} A_c) h` by finite differences.
    Rk4Spray,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub steps: usize,
    /// Store every `stride`-th step (the final step is always stored).
    pub stride: usize,
    pub scheme: Scheme,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self { steps: 200, stride: 1, scheme: Scheme::Rk4Momentum }
    }
}

/// Time-ordered frames of a path together with the metric it was computed for.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    frames: Vec<Frame>,
    config: MetricConfig,
    settings: IntegratorSettings,
    curve_options: CurveOptions,
}

impl GeodesicPath {
    /// Wraps externally produced frames; times must increase strictly and shapes agree.
    pub fn from_frames(config: MetricConfig, frames: Vec<Frame>, settings: IntegratorSettings) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::Grid("path has no frames".into()))?;
        let shape = first.curve.shape();
        for w in frames.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::Grid("frame times must increase strictly".into()));
            }
        }
        let same = |m: &Option<DMatrix<f64>>| m.as_ref().is_none_or(|m| m.shape() == shape);
        if !frames.iter().all(|f| f.curve.shape() == shape && same(&f.velocity) && same(&f.momentum)) {
            return Err(Error::Grid("all frames must share N and d".into()));
        }
        Ok(Self { frames, config, settings, curve_options: CurveOptions::default() })
    }

    /// Sets the options used to rebuild curves from frames (diagnostics, energies).
    pub fn with_curve_options(mut self, options: CurveOptions) -> Self {
        self.curve_options = options;
        self
    }

    pub fn curve_options(&self) -> CurveOptions {
        self.curve_options
    }

    /// The curve of frame `i`.
    pub fn curve(&self, i: usize) -> Result<DiscreteCurve> {
        DiscreteCurve::with_options(self.frames[i].curve.clone(), self.curve_options)
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frames_mut(&mut self) -> &mut [Frame] {
        &mut self.frames
    }

    pub fn config(&self) -> &MetricConfig {
        &self.config
    }

    pub fn settings(&self) -> IntegratorSettings {
        self.settings
    }

    pub fn start(&self) -> &Frame {
        &self.frames[0]
    }

    pub fn end(&self) -> &Frame {
        self.frames.last().expect("path is non-empty")
    }
}

/// Options for [`exp_map_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExpOptions {
    pub settings: IntegratorSettings,
    pub curve_options: CurveOptions,
}


/// Minimum number of RK4 steps accepted.
pub const MIN_STEPS: usize = 16;

/// Geodesic with initial data `(c0, h0)` on `[0, t_final]`, all steps stored.
pub fn exp_map(
    cfg: &MetricConfig,
    c0: &DiscreteCurve,
    h0: &DMatrix<f64>,
    t_final: f64,
    steps: usize,
) -> Result<GeodesicPath> {
    let opts = ExpOptions {
        settings: IntegratorSettings { steps, ..Default::default() },
        curve_options: c0.options(),
    };
    exp_map_with(cfg, c0, h0, t_final, &opts)
}

/// Headroom of the run-wide flat grid over what the initial curve needs.
pub const FLAT_HEADROOM: f64 = 1.6;

/// Fixes the flat grid for a whole run so the discrete vector field is smooth in time.
/// Anything that differentiates along a family of curves (paths, variations) should
/// evaluate all of them with one such grid.
pub fn run_curve_options(c0: &DiscreteCurve, opts: CurveOptions) -> CurveOptions {
    let flat_size = opts.flat_size.unwrap_or_else(|| {
        let m = (FLAT_HEADROOM * c0.flat().size() as f64).ceil() as usize;
        m.div_ceil(8) * 8
    });
    CurveOptions { flat_size: Some(flat_size), ..opts }
}

fn curve_at(samples: &DMatrix<f64>, opts: CurveOptions, t: f64) -> Result<DiscreteCurve> {
    DiscreteCurve::with_options(samples.clone(), opts).map_err(|e| match e {
        e @ Error::Immersion { .. } => Error::ImmersionLost { t, source: Box::new(e) },
        e => e,
    })
}

fn check_finite(m: &DMatrix<f64>, t: f64) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Step { t })
    }
}

/// Geodesic integration with explicit settings.
pub fn exp_map_with(
    cfg: &MetricConfig,
    c0: &DiscreteCurve,
    h0: &DMatrix<f64>,
    t_final: f64,
    opts: &ExpOptions,
) -> Result<GeodesicPath> {
    cfg.require_dynamics()?;
    let settings = opts.settings;
    if settings.steps < MIN_STEPS {
        return Err(Error::Domain(format!("need at least {MIN_STEPS} steps, got {}", settings.steps)));
    }
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::Domain(format!("integration time must be positive, got {t_final}")));
    }
    if h0.shape() != c0.samples().shape() {
        return Err(Error::Grid("initial velocity must match the curve grid".into()));
    }
    let copts = run_curve_options(c0, opts.curve_options);
    let c0 = &DiscreteCurve::with_options(c0.samples().clone(), copts)?;
    let dt = t_final / settings.steps as f64;
    let stride = settings.stride.max(1);

    let mut frames = Vec::with_capacity(settings.steps / stride + 2);
    let mut c = c0.samples().clone();
    match settings.scheme {
        Scheme::Rk4Momentum => {
            let mut mu = cfg.apply(c0, h0)?;
            frames.push(Frame { t: 0.0, curve: c.clone(), velocity: Some(h0.clone()), momentum: Some(mu.clone()) });
            let field = |c: &DMatrix<f64>, mu: &DMatrix<f64>, t: f64| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
                let curve = curve_at(c, copts, t)?;
                let h = cfg.apply_inverse(&curve, mu)?;
                let dmu = momentum_rhs(cfg, &curve, &h)?.into_values();
                check_finite(&dmu, t)?;
                Ok((h, dmu))
            };
            for step in 0..settings.steps {
                let t = step as f64 * dt;
                let (k1c, k1m) = field(&c, &mu, t)?;
                let (k2c, k2m) = field(&(&c + &k1c * (0.5 * dt)), &(&mu + &k1m * (0.5 * dt)), t + 0.5 * dt)?;
                let (k3c, k3m) = field(&(&c + &k2c * (0.5 * dt)), &(&mu + &k2m * (0.5 * dt)), t + 0.5 * dt)?;
                let (k4c, k4m) = field(&(&c + &k3c * dt), &(&mu + &k3m * dt), t + dt)?;
                c += (k1c + k2c * 2.0 + k3c * 2.0 + k4c) * (dt / 6.0);
                mu += (k1m + k2m * 2.0 + k3m * 2.0 + k4m) * (dt / 6.0);
                check_finite(&c, t + dt)?;
                if (step + 1) % stride == 0 || step + 1 == settings.steps {
                    let tn = (step + 1) as f64 * dt;
                    let curve = curve_at(&c, copts, tn)?;
                    let h = cfg.apply_inverse(&curve, &mu)?;
                    frames.push(Frame { t: tn, curve: c.clone(), velocity: Some(h), momentum: Some(mu.clone()) });
                }
            }
        }
        Scheme::Rk4Spray => {
            let mut h = h0.clone();
            frames.push(Frame { t: 0.0, curve: c.clone(), velocity: Some(h.clone()), momentum: Some(cfg.apply(c0, &h)?) });
            let field = |c: &DMatrix<f64>, h: &DMatrix<f64>, t: f64| -> Result<DMatrix<f64>> {
                let curve = curve_at(c, copts, t)?;
                let (s, _) = spray(cfg, &curve, h, DerivativeScheme::Central)?;
                check_finite(&s, t)?;
                Ok(s.into_values())
            };
            for step in 0..settings.steps {
                let t = step as f64 * dt;
                let k1h = field(&c, &h, t)?;
                let k1c = h.clone();
                let k2c = &h + &k1h * (0.5 * dt);
                let k2h = field(&(&c + &k1c * (0.5 * dt)), &k2c, t + 0.5 * dt)?;
                let k3c = &h + &k2h * (0.5 * dt);
                let k3h = field(&(&c + &k2c * (0.5 * dt)), &k3c, t + 0.5 * dt)?;
                let k4c = &h + &k3h * dt;
                let k4h = field(&(&c + &k3c * dt), &k4c, t + dt)?;
                c += (k1c + k2c * 2.0 + k3c * 2.0 + k4c) * (dt / 6.0);
                h += (k1h + k2h * 2.0 + k3h * 2.0 + k4h) * (dt / 6.0);
                check_finite(&c, t + dt)?;
                if (step + 1) % stride == 0 || step + 1 == settings.steps {
                    let tn = (step + 1) as f64 * dt;
                    let curve = curve_at(&c, copts, tn)?;
                    let mu = cfg.apply(&curve, &h)?;
                    frames.push(Frame { t: tn, curve: c.clone(), velocity: Some(h.clone()), momentum: Some(mu) });
                }
            }
        }
    }
    Ok(GeodesicPath::from_frames(cfg.clone(), frames, settings)?.with_curve_options(copts))
}

/// Settings for [`geodesic_bvp`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingOptions {
    /// Fourier truncation `K` of the unknown initial velocity (modes `|m| <= K`).
    pub modes: usize,
    pub max_iter: usize,
    /// Initial Levenberg–Marquardt damping.
    pub damping: f64,
    /// RK4 steps per shot on `[0, 1]`.
    pub steps: usize,
    /// Converged when `‖endpoint - c1‖ <= relative_tolerance · ‖c1‖` (both `L²(dθ)`).
    pub relative_tolerance: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { modes: 8, max_iter: 50, damping: 1e-3, steps: 32, relative_tolerance: 1e-6 }
    }
}

/// Outcome of a shooting run.
#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub initial_velocity: TangentField,
    /// `‖endpoint - c1‖` in `L²(dθ)`.
    pub residual: f64,
    pub iterations: usize,
    pub path: GeodesicPath,
}

impl ShootingResult {
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<f64>> =
            self.initial_velocity.row_iter().map(|r| r.iter().cloned().collect()).collect();
        json!({
            "initial_velocity": { "d": self.initial_velocity.dim(), "samples": rows },
            "residual": self.residual,
            "iterations": self.iterations,
            "frames": self.path.frames().len(),
        })
    }
}

/// Real Fourier basis `1, cos mθ, sin mθ` (`m = 1..=K`) per component.
struct VelocityBasis {
    n: usize,
    d: usize,
    modes: usize,
}

impl VelocityBasis {
    fn per_dim(&self) -> usize {
        2 * self.modes + 1
    }

    fn len(&self) -> usize {
        self.per_dim() * self.d
    }

    fn basis_value(&self, i: usize, theta: f64) -> f64 {
        match i {
            0 => 1.0,
            i if i <= self.modes => (i as f64 * theta).cos(),
            i => ((i - self.modes) as f64 * theta).sin(),
        }
    }

    fn field(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let p = self.per_dim();
        DMatrix::from_fn(self.n, self.d, |k, j| {
            let theta = TAU * k as f64 / self.n as f64;
            (0..p).map(|i| x[j * p + i] * self.basis_value(i, theta)).sum()
        })
    }

    /// Discrete Fourier projection onto the truncated basis.
    fn project(&self, u: &DMatrix<f64>) -> DVector<f64> {
        let p = self.per_dim();
        let mut x = DVector::zeros(self.len());
        for j in 0..self.d {
            for i in 0..p {
                let norm = if i == 0 { 1.0 } else { 2.0 } / self.n as f64;
                x[j * p + i] = norm
                    * (0..self.n)
                        .map(|k| u[(k, j)] * self.basis_value(i, TAU * k as f64 / self.n as f64))
                        .sum::<f64>();
            }
        }
        x
    }
}

/// Geodesic from `c0` to `c1` on `[0, 1]` by Levenberg–Marquardt shooting.
///
/// Unknowns are the `2K + 1` real Fourier coefficients per component of the initial
/// velocity; the Jacobian is assembled by forward differences, one shot per column
/// (in parallel). Trial shots that leave the immersion set count as rejected steps
/// and increase the damping. Returns [`Error::NoConvergence`] carrying the best iterate
/// when the tolerance is not met.
pub fn geodesic_bvp(
    cfg: &MetricConfig,
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    opts: &ShootingOptions,
) -> Result<ShootingResult> {
    cfg.require_dynamics()?;
    if c0.samples().shape() != c1.samples().shape() {
        return Err(Error::Grid("source and target must share N and d".into()));
    }
    let (n, d) = c0.samples().shape();
    if 2 * opts.modes >= n {
        return Err(Error::Domain(format!("mode truncation K = {} needs 2K < N = {n}", opts.modes)));
    }
    let basis = VelocityBasis { n, d, modes: opts.modes };
    let target = c1.samples();
    let tolerance = opts.relative_tolerance * l2_norm(target);
    let exp_opts = ExpOptions {
        settings: IntegratorSettings { steps: opts.steps, stride: opts.steps, scheme: Scheme::Rk4Momentum },
        curve_options: c0.options(),
    };
    let weight = (TAU / n as f64).sqrt();

    let shoot = |x: &DVector<f64>| -> Result<(DVector<f64>, GeodesicPath)> {
        let h0 = basis.field(x);
        let path = exp_map_with(cfg, c0, &h0, 1.0, &exp_opts)?;
        let diff = &path.end().curve - target;
        Ok((DVector::from_column_slice(diff.as_slice()) * weight, path))
    };
    let is_trial_failure = |e: &Error| matches!(e, Error::ImmersionLost { .. } | Error::Immersion { .. } | Error::Step { .. });

    // initial guess c1 - c0, shrunk towards zero if its shot leaves the immersion set
    let mut x = basis.project(&(target - c0.samples()));
    let mut current = None;
    for _ in 0..8 {
        match shoot(&x) {
            Ok(r) => {
                current = Some(r);
                break;
            }
            Err(e) if is_trial_failure(&e) => x *= 0.5,
            Err(e) => return Err(e),
        }
    }
    let (mut residual, mut path) = match current {
        Some(r) => r,
        None => {
            return Err(Error::Immersion { min_speed: 0.0, threshold: 0.0 });
        }
    };
    let mut cost = residual.norm();
    let mut damping = opts.damping;
    let mut iterations = 0;

    let result = |x: &DVector<f64>, cost: f64, iterations: usize, path: GeodesicPath| ShootingResult {
        initial_velocity: TangentField::from(basis.field(x)),
        residual: cost,
        iterations,
        path,
    };

    while cost > tolerance && iterations < opts.max_iter {
        iterations += 1;
        let columns: Vec<Result<DVector<f64>>> = (0..basis.len())
            .into_par_iter()
            .map(|i| {
                let step = 1e-7 * x[i].abs().max(1.0);
                let mut xp = x.clone();
                xp[i] += step;
                match shoot(&xp) {
                    Ok((rp, _)) => Ok((rp - &residual) / step),
                    Err(e) if is_trial_failure(&e) => {
                        xp[i] = x[i] - step;
                        let (rm, _) = shoot(&xp)?;
                        Ok((&residual - rm) / step)
                    }
                    Err(e) => Err(e),
                }
            })
            .collect();
        let mut jac = DMatrix::zeros(residual.len(), basis.len());
        for (i, col) in columns.into_iter().enumerate() {
            jac.set_column(i, &col?);
        }
        let jtj = jac.tr_mul(&jac);
        let grad = jac.tr_mul(&residual);
        let scale = jtj.diagonal().map(|v| v.max(1e-12 * jtj.diagonal().max()));

        let mut accepted = false;
        for _ in 0..16 {
            let mut lhs = jtj.clone();
            for i in 0..lhs.nrows() {
                lhs[(i, i)] += damping * scale[i];
            }
            let Some(step) = lhs.cholesky().map(|ch| ch.solve(&(-&grad))) else {
                damping *= 4.0;
                continue;
            };
            let trial = &x + &step;
            match shoot(&trial) {
                Ok((r_new, p_new)) if r_new.norm() < cost => {
                    x = trial;
                    cost = r_new.norm();
                    residual = r_new;
                    path = p_new;
                    damping = (damping / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
                Ok(_) => damping *= 4.0,
                Err(e) if is_trial_failure(&e) => damping *= 4.0,
                Err(e) => return Err(e),
            }
        }
        log::debug!("shooting iteration {iterations}: residual {cost:.3e}, damping {damping:.1e}");
        if !accepted {
            break;
        }
    }

    // the iterations only keep endpoints; the returned path stores every step
    let full = ExpOptions { settings: IntegratorSettings { stride: 1, ..exp_opts.settings }, ..exp_opts };
    let path = exp_map_with(cfg, c0, &basis.field(&x), 1.0, &full).unwrap_or(path);
    let out = result(&x, cost, iterations, path);
    if cost <= tolerance {
        Ok(out)
    } else {
        Err(Error::NoConvergence(Box::new(out)))
    }
}

/// Time series and drift diagnostics of a path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConservationReport {
    pub times: Vec<f64>,
    /// `G_c(c_t, c_t)` per frame.
    pub energies: Vec<f64>,
    pub lengths: Vec<f64>,
    pub min_speeds: Vec<f64>,
    /// `max_i |E_i - E_0| / |E_0|` (absolute when `E_0 = 0`).
    pub max_relative_drift: f64,
    /// `max_i ‖μ_i - A_c c_t‖ / ‖μ_i‖` over frames that store a momentum.
    pub max_momentum_residual: f64,
    pub drift_threshold: f64,
    pub flagged: bool,
    pub flags: Vec<String>,
}

/// Default drift threshold of [`conservation_report`].
pub const DRIFT_THRESHOLD: f64 = 1e-6;
/// Allowed mismatch between a stored momentum and `A_c c_t`.
pub const MOMENTUM_TOLERANCE: f64 = 1e-8;

/// Energy, length and speed series of a path, flagging drift above `threshold`.
pub fn conservation_report_with(path: &GeodesicPath, threshold: f64) -> Result<ConservationReport> {
    let frames = path.frames();
    if frames.len() < 2 {
        return Err(Error::Grid("conservation report needs at least two frames".into()));
    }
    let cfg = path.config();
    let mut times = Vec::new();
    let mut energies = Vec::new();
    let mut lengths = Vec::new();
    let mut min_speeds = Vec::new();
    let mut flags = Vec::new();
    let mut momentum_residual: f64 = 0.0;

    let velocities: Vec<DMatrix<f64>> = if frames.iter().all(|f| f.velocity.is_some()) {
        frames.iter().map(|f| f.velocity.clone().unwrap()).collect()
    } else {
        let t: Vec<f64> = frames.iter().map(|f| f.t).collect();
        let curves: Vec<&DMatrix<f64>> = frames.iter().map(|f| &f.curve).collect();
        crate::metric::time_derivatives(&t, &curves)?
    };

    for (i, (f, h)) in frames.iter().zip(&velocities).enumerate() {
        times.push(f.t);
        let c = match path.curve(i) {
            Ok(c) => c,
            Err(e) => {
                flags.push(format!("frame at t = {}: {e}", f.t));
                energies.push(f64::NAN);
                lengths.push(f64::NAN);
                min_speeds.push(0.0);
                continue;
            }
        };
        energies.push(2.0 * kinetic_energy(cfg, &c, h)?);
        lengths.push(c.length());
        min_speeds.push(c.speed().min());
        if let Some(mu) = &f.momentum {
            let ah = cfg.apply(&c, h)?;
            let scale = mu.norm().max(f64::MIN_POSITIVE);
            let rel = (mu - ah).norm() / scale;
            momentum_residual = momentum_residual.max(rel);
            if rel > MOMENTUM_TOLERANCE {
                flags.push(format!("frame at t = {}: momentum mismatch {rel:.3e}", f.t));
            }
        }
    }

    let e0 = energies[0];
    let scale = if e0.abs() > 0.0 { e0.abs() } else { 1.0 };
    let max_relative_drift = energies
        .iter()
        .map(|e| if e.is_finite() { (e - e0).abs() / scale } else { f64::INFINITY })
        .fold(0.0, f64::max);
    if max_relative_drift > threshold {
        flags.push(format!("energy drift {max_relative_drift:.3e} exceeds {threshold:.1e}"));
    }
    Ok(ConservationReport {
        times,
        energies,
        lengths,
        min_speeds,
        max_relative_drift,
        max_momentum_residual: momentum_residual,
        drift_threshold: threshold,
        flagged: !flags.is_empty(),
        flags,
    })
}

/// [`conservation_report_with`] at [`DRIFT_THRESHOLD`].
pub fn conservation_report(path: &GeodesicPath) -> Result<ConservationReport> {
    conservation_report_with(path, DRIFT_THRESHOLD)
}
