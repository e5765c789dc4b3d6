//! Closed curves sampled on a uniform periodic grid.
//!
//! A [`DiscreteCurve`] caches its arc-length geometry: speed `|c'|`, length `ℓ_c`,
//! unit tangent `v = D_s c` and the constant-speed reparametrization `ψ_c`,
//! `ψ_c(θ) = (2π/ℓ_c) ∫_0^θ |c'|`, so that `c ∘ ψ_c⁻¹` has constant speed.

use std::f64::consts::TAU;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectral::{self, TrigPoly};

/// Relative immersion floor: construction fails if `min |c'| <= IMMERSION_FLOOR * max |c'|`.
pub const IMMERSION_FLOOR: f64 = 1e-8;

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 60;

/// `L²(dθ)` norm of an `N × d` array: `sqrt((2π/N) Σ |x_k|²)`.
pub fn l2_norm(values: &DMatrix<f64>) -> f64 {
    let n = values.nrows().max(1) as f64;
    (TAU / n * values.norm_squared()).sqrt()
}

/// Pointwise inner product of two `N × d` arrays.
pub fn pointwise_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(a.nrows(), |k, _| a.row(k).dot(&b.row(k)))
}

/// Multiplies row `k` of `a` by `s[k]`.
pub fn scale_rows(s: &DVector<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for (k, mut row) in out.row_iter_mut().enumerate() {
        row *= s[k];
    }
    out
}

fn check_grid(n: usize) -> Result<()> {
    if n < 8 || !n.is_multiple_of(2) {
        return Err(Error::Grid(format!("grid size must be even and >= 8, got {n}")));
    }
    Ok(())
}

/// `N` samples of an `ℝ^d`-valued periodic field (a tangent vector to the space of curves).
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField {
    values: DMatrix<f64>,
}

impl TangentField {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Grid("tangent field has non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self { values: DMatrix::zeros(n, d) }
    }

    /// The constant field `θ ↦ value`.
    pub fn constant(n: usize, value: &[f64]) -> Self {
        Self { values: DMatrix::from_fn(n, value.len(), |_, j| value[j]) }
    }

    /// Samples `f(θ_k)` on the grid.
    pub fn from_fn(n: usize, d: usize, f: impl Fn(f64) -> Vec<f64>) -> Self {
        let mut values = DMatrix::zeros(n, d);
        for k in 0..n {
            let row = f(TAU * k as f64 / n as f64);
            for j in 0..d {
                values[(k, j)] = row[j];
            }
        }
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.values)
    }
}

impl From<DMatrix<f64>> for TangentField {
    fn from(values: DMatrix<f64>) -> Self {
        Self { values }
    }
}

impl Deref for TangentField {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Orientation-preserving circle diffeomorphism `ψ(θ) = θ + p(θ)` with `p` periodic.
///
/// Holds the inverse displacement `q` (`ψ⁻¹(θ) = θ + q(θ)`) and the interpolation
/// matrices that evaluate `u ∘ ψ` and `u ∘ ψ⁻¹` on the grid.
#[derive(Debug, Clone)]
pub struct Diffeo {
    displacement: DVector<f64>,
    inverse_displacement: DVector<f64>,
    forward: DMatrix<f64>,
    backward: DMatrix<f64>,
}

impl Diffeo {
    pub fn identity(n: usize) -> Self {
        Self {
            displacement: DVector::zeros(n),
            inverse_displacement: DVector::zeros(n),
            forward: DMatrix::identity(n, n),
            backward: DMatrix::identity(n, n),
        }
    }

    /// The rotation `θ ↦ θ + α`.
    pub fn rotation(n: usize, alpha: f64) -> Self {
        let p = DVector::from_element(n, alpha);
        let q = DVector::from_element(n, -alpha);
        Self::assemble(p, q)
    }

    /// Builds `ψ = id + p` from displacement samples, inverting it by safeguarded Newton iteration.
    pub fn from_displacement(displacement: DVector<f64>) -> Result<Self> {
        let n = displacement.len();
        check_grid(n)?;
        if displacement.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diffeo("non-finite displacement".into()));
        }
        let dp = spectral::derivative(displacement.as_slice());
        if let Some((k, v)) = dp.iter().enumerate().find(|(_, v)| 1.0 + **v <= 0.0) {
            return Err(Error::Diffeo(format!(
                "not orientation preserving: 1 + p'(θ_{k}) = {}",
                1.0 + v
            )));
        }
        let q = invert_displacement(&displacement)?;
        Ok(Self::assemble(displacement, q))
    }

    /// Samples `θ ↦ ψ(θ)` given as a closure returning `ψ(θ) - θ`.
    pub fn from_fn(n: usize, displacement: impl Fn(f64) -> f64) -> Result<Self> {
        let p = spectral::grid(n).map(displacement);
        Self::from_displacement(p)
    }

    fn assemble(p: DVector<f64>, q: DVector<f64>) -> Self {
        let n = p.len();
        let theta = spectral::grid(n);
        let fwd: Vec<f64> = (0..n).map(|k| theta[k] + p[k]).collect();
        let bwd: Vec<f64> = (0..n).map(|k| theta[k] + q[k]).collect();
        Self {
            forward: spectral::interpolation_matrix(&fwd, n),
            backward: spectral::interpolation_matrix(&bwd, n),
            displacement: p,
            inverse_displacement: q,
        }
    }

    pub fn n(&self) -> usize {
        self.displacement.len()
    }

    pub fn displacement(&self) -> &DVector<f64> {
        &self.displacement
    }

    pub fn inverse_displacement(&self) -> &DVector<f64> {
        &self.inverse_displacement
    }

    /// `ψ(θ_k) = θ_k + p_k` (not reduced mod 2π).
    pub fn values(&self) -> DVector<f64> {
        spectral::grid(self.n()) + &self.displacement
    }

    pub fn inverse(&self) -> Diffeo {
        Diffeo {
            displacement: self.inverse_displacement.clone(),
            inverse_displacement: self.displacement.clone(),
            forward: self.backward.clone(),
            backward: self.forward.clone(),
        }
    }

    /// `R_ψ u = u ∘ ψ` by trigonometric interpolation.
    pub fn pull_back(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.forward * u
    }

    /// `R_{ψ⁻¹} u = u ∘ ψ⁻¹`.
    pub fn push_forward(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.backward * u
    }

    /// Largest `|ψ(ψ⁻¹(θ_k)) - θ_k|` on the grid.
    pub fn inverse_residual(&self) -> f64 {
        let n = self.n();
        let p = TrigPoly::from_samples(self.displacement.as_slice());
        let theta = spectral::grid(n);
        (0..n)
            .map(|k| {
                let x = theta[k] + self.inverse_displacement[k];
                (x + p.eval(x) - theta[k]).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn invert_displacement(p: &DVector<f64>) -> Result<DVector<f64>> {
    let theta = spectral::grid(p.len());
    let x = inverse_at(p, theta.as_slice())?;
    Ok(x - theta)
}

/// `ψ⁻¹(t)` for each target `t`, with `ψ = id + p`.
fn inverse_at(p: &DVector<f64>, targets: &[f64]) -> Result<DVector<f64>> {
    let poly = TrigPoly::from_samples(p.as_slice());
    // the interpolant of p can exceed its sample maximum between nodes; any bracket
    // works for a monotone function, so be generous
    let spread = p.amax() + 0.5;
    targets
        .iter()
        .map(|&t| solve_monotone(&poly, t, t - spread, t + spread))
        .collect::<Result<Vec<_>>>()
        .map(DVector::from_vec)
}

/// Solves `x + p(x) = target` on a bracket where the left side is increasing.
fn solve_monotone(p: &TrigPoly, target: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut x = target;
    for _ in 0..NEWTON_MAX_ITER {
        let (val, der) = p.eval_with_derivative(x);
        let f = x + val - target;
        if f.abs() <= NEWTON_TOL {
            // one more quadratic step takes x to roundoff; jitter in the inverse points
            // would otherwise be amplified by high-order multipliers
            let polished = x - f / (1.0 + der);
            return Ok(if polished > lo && polished < hi { polished } else { x });
        }
        if f > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let slope = 1.0 + der;
        let newton = x - f / slope;
        x = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    // bisection fallback
    for _ in 0..200 {
        let f = x + p.eval(x) - target;
        if f.abs() <= NEWTON_TOL || hi - lo < 1e-15 {
            return Ok(x);
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        x = 0.5 * (lo + hi);
    }
    Err(Error::Diffeo(format!("inverse did not converge at target {target}")))
}

/// Construction switches for [`DiscreteCurve`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CurveOptions {
    /// Apply the two-thirds low-pass filter to `|c'|` and `v` before they enter
    /// further products. Off by default.
    pub dealias: bool,
    /// Size of the uniform grid in the constant-speed parameter on which flat multipliers
    /// act. `None` picks [`flat_size_for`] of the curve.
    pub flat_size: Option<usize>,
}

/// Oversampling of the constant-speed grid relative to the slowest part of the curve.
pub const FLAT_OVERSAMPLING: f64 = 1.25;

/// Smallest multiple of 8 that is at least `FLAT_OVERSAMPLING · N · max_θ 1/ψ'(θ)`.
///
/// A field with `N/2` modes in `θ` has up to `N/(2 min ψ')` modes after the change of
/// variable `φ = ψ(θ)`, so the flat grid must be finer than the curve grid wherever
/// the curve is slower than average.
pub fn flat_size_for(n: usize, length: f64, min_speed: f64) -> usize {
    let stretch = length / (TAU * min_speed);
    let target = (FLAT_OVERSAMPLING * n as f64 * stretch.max(1.0)).ceil() as usize;
    target.div_ceil(8) * 8
}

/// Transfer operators between the curve grid and the constant-speed grid.
///
/// Both directions go through real Fourier coefficients (FFT, then the trigonometric basis
/// evaluated at the target points). Rounding then stays at the level of the coefficients,
/// which matters because high-order multipliers amplify any noise in the flat samples.
#[derive(Debug, Clone)]
pub struct FlatGrid {
    /// Basis `1, cos mθ, sin mθ, cos(Nθ/2)` at `ψ⁻¹(φ_j)`, `φ_j = 2πj/M`.
    to_flat: DMatrix<f64>,
    /// The `M`-point basis at `ψ(θ_k)`.
    from_flat: DMatrix<f64>,
}

impl FlatGrid {
    fn new(psi: &Diffeo, m: usize) -> Result<Self> {
        let n = psi.n();
        let phi = spectral::grid(m);
        let back = inverse_at(psi.displacement(), phi.as_slice())?;
        let fwd = psi.values();
        Ok(Self {
            to_flat: spectral::real_trig_basis(back.as_slice(), n),
            from_flat: spectral::real_trig_basis(fwd.as_slice(), m),
        })
    }

    pub fn size(&self) -> usize {
        self.to_flat.nrows()
    }

    /// `u ∘ ψ⁻¹` sampled on the flat grid.
    pub fn to_flat(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.to_flat * spectral::map_columns(u, spectral::real_coefficients)
    }

    /// `f ∘ ψ` sampled on the curve grid.
    pub fn from_flat(&self, f: &DMatrix<f64>) -> DMatrix<f64> {
        &self.from_flat * spectral::map_columns(f, spectral::real_coefficients)
    }
}

/// Result of [`DiscreteCurve::antiderivative`].
#[derive(Debug, Clone)]
pub struct Antiderivative {
    /// `θ ↦ ∫_0^θ f |c'| dσ` on the grid.
    pub values: DVector<f64>,
    /// The ds-mean `∫ f ds / ℓ_c` that was split off before modewise integration.
    pub removed_mean: f64,
}

/// First variations of length and of `ψ_c` in direction `h`.
#[derive(Debug, Clone)]
pub struct FirstVariation {
    pub length: f64,
    pub psi: DVector<f64>,
}

/// A closed immersed curve `c: S¹ → ℝ^d` sampled at `θ_k = 2πk/N`.
#[derive(Debug, Clone)]
pub struct DiscreteCurve {
    samples: DMatrix<f64>,
    derivative: DMatrix<f64>,
    speed: DVector<f64>,
    length: f64,
    unit_tangent: DMatrix<f64>,
    psi: Diffeo,
    flat: FlatGrid,
    options: CurveOptions,
}

impl DiscreteCurve {
    pub fn new(samples: DMatrix<f64>) -> Result<Self> {
        Self::with_options(samples, CurveOptions::default())
    }

    pub fn with_options(samples: DMatrix<f64>, options: CurveOptions) -> Result<Self> {
        let (n, d) = samples.shape();
        check_grid(n)?;
        if d < 2 {
            return Err(Error::Grid(format!("ambient dimension must be >= 2, got {d}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Grid("curve has non-finite samples".into()));
        }
        let derivative = spectral::map_columns(&samples, spectral::derivative);
        let mut speed = DVector::from_fn(n, |k, _| derivative.row(k).norm());
        let max_speed = speed.max();
        let min_speed = speed.min();
        let threshold = IMMERSION_FLOOR * max_speed;
        if !(min_speed > threshold) {
            return Err(Error::Immersion { min_speed, threshold });
        }
        if options.dealias {
            speed = DVector::from_vec(spectral::low_pass_two_thirds(speed.as_slice()));
        }
        let mut unit_tangent = derivative.clone();
        for (k, mut row) in unit_tangent.row_iter_mut().enumerate() {
            row /= derivative.row(k).norm();
        }
        if options.dealias {
            unit_tangent = spectral::map_columns(&unit_tangent, spectral::low_pass_two_thirds);
        }
        let length = TAU / n as f64 * speed.sum();
        let (anti, _) = spectral::periodic_antiderivative(speed.as_slice());
        let p = DVector::from_vec(anti) * (TAU / length);
        let q = invert_displacement(&p)?;
        let psi = Diffeo::assemble(p, q);
        let m = match options.flat_size {
            Some(m) if m % 2 != 0 || m < n => {
                return Err(Error::Grid(format!("flat grid size {m} must be even and at least N = {n}")))
            }
            Some(m) => m,
            None => flat_size_for(n, length, speed.min()),
        };
        let flat = FlatGrid::new(&psi, m)?;
        Ok(Self { samples, derivative, speed, length, unit_tangent, psi, flat, options })
    }

    pub fn n(&self) -> usize {
        self.samples.nrows()
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    /// `c'(θ_k)`.
    pub fn derivative(&self) -> &DMatrix<f64> {
        &self.derivative
    }

    pub fn speed(&self) -> &DVector<f64> {
        &self.speed
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `v = D_s c`.
    pub fn unit_tangent(&self) -> &DMatrix<f64> {
        &self.unit_tangent
    }

    /// The constant-speed reparametrization `ψ_c`.
    pub fn psi(&self) -> &Diffeo {
        &self.psi
    }

    pub fn options(&self) -> CurveOptions {
        self.options
    }

    /// The constant-speed grid used by conjugated operators.
    pub fn flat(&self) -> &FlatGrid {
        &self.flat
    }

    fn check(&self, rows: usize) -> Result<()> {
        if rows != self.n() {
            return Err(Error::Grid(format!(
                "field has {rows} samples, curve has {}",
                self.n()
            )));
        }
        Ok(())
    }

    /// Arc-length derivative `D_s u = u' / |c'|` of a field with any number of columns.
    pub fn arc_derivative(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(u.nrows())?;
        let du = spectral::map_columns(u, spectral::derivative);
        Ok(scale_rows(&self.speed.map(|s| 1.0 / s), &du))
    }

    /// `D_s` applied to a scalar field.
    pub fn arc_derivative_scalar(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(f.len())?;
        let df = spectral::derivative(f.as_slice());
        Ok(DVector::from_fn(f.len(), |k, _| df[k] / self.speed[k]))
    }

    /// Curvature vector `D_s v`.
    pub fn curvature_vector(&self) -> DMatrix<f64> {
        self.arc_derivative(&self.unit_tangent).expect("grid matches")
    }

    /// `∫ f ds` for a scalar field.
    pub fn ds_integral(&self, f: &DVector<f64>) -> Result<f64> {
        self.check(f.len())?;
        Ok(TAU / self.n() as f64 * f.dot(&self.speed))
    }

    /// Componentwise `∫ u ds` for an `N × d` field.
    pub fn ds_integral_field(&self, u: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check(u.nrows())?;
        Ok(u.tr_mul(&self.speed) * (TAU / self.n() as f64))
    }

    /// Arc length from `θ = 0` to each grid point, `ℓ_c ψ_c(θ_k) / 2π`.
    pub fn arc_length_function(&self) -> DVector<f64> {
        self.psi.values() * (self.length / TAU)
    }

    /// `θ ↦ ∫_0^θ f |c'| dσ`, integrating the ds-mean-free part modewise and adding the
    /// mean back as a multiple of the arc-length function.
    pub fn antiderivative(&self, f: &DVector<f64>) -> Result<Antiderivative> {
        self.check(f.len())?;
        let mean = self.ds_integral(f)? / self.length;
        let g: Vec<f64> = (0..self.n()).map(|k| (f[k] - mean) * self.speed[k]).collect();
        let (anti, _) = spectral::periodic_antiderivative(&g);
        let values = DVector::from_vec(anti) + self.arc_length_function() * mean;
        Ok(Antiderivative { values, removed_mean: mean })
    }

    /// `δℓ = ∫⟨D_s h, v⟩ ds` and `δψ(θ) = (2π/ℓ) ∫_0^θ ⟨D_s h, v⟩ ds̃ - (δℓ/ℓ) ψ(θ)`.
    pub fn first_variations(&self, h: &DMatrix<f64>) -> Result<FirstVariation> {
        let dsh = self.arc_derivative(h)?;
        let g = pointwise_dot(&dsh, &self.unit_tangent);
        let length = self.ds_integral(&g)?;
        let anti = self.antiderivative(&g)?;
        let psi = anti.values * (TAU / self.length) - self.psi.values() * (length / self.length);
        Ok(FirstVariation { length, psi })
    }

    /// The curve `c ∘ φ`, sampled by interpolation.
    pub fn reparametrized(&self, phi: &Diffeo) -> Result<DiscreteCurve> {
        DiscreteCurve::with_options(reparametrize(&self.samples, phi)?, self.options)
    }
}

/// `R_ψ u = u ∘ ψ` for an `N × d` array of periodic samples.
pub fn reparametrize(u: &DMatrix<f64>, psi: &Diffeo) -> Result<DMatrix<f64>> {
    if u.nrows() != psi.n() {
        return Err(Error::Grid(format!(
            "field has {} samples, diffeomorphism has {}",
            u.nrows(),
            psi.n()
        )));
    }
    Ok(psi.pull_back(u))
}
