//! The Riemannian metric `G_c(h, k) = ∫ ⟨A_c h, k⟩ ds`, the nonlocal coefficients
//! `w` and `w₀`, the geodesic spray and the momentum form of the geodesic equation
//!
//! ```text
//! ∂_t (A_c c_t) = -⟨D_s c_t, v⟩ A_c c_t - ⟨A_c c_t, D_s c_t⟩ v - (w + w₀) D_s v
//! ```
//!
//! with `w(θ) = ∫_0^θ ⟨A_c h, D_s h⟩ ds` and
//! `w₀ = ∫ (1/2π) ⟨A_c h, ψ_c D_s h⟩ + ½ ⟨(ℓ_c⁻¹ A_c + A_c') h, h⟩ ds`.

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::curve::{pointwise_dot, scale_rows, DiscreteCurve, TangentField};
use crate::error::{Error, Result};
use crate::operator::{apply_conjugated, operator_directional_derivative, DerivativeScheme};
use crate::solver::GeodesicPath;
use crate::symbol::{class_report, Family, LambdaSymbol, Variant};

/// Tolerance on the removed ds-mean of the `w` integrand, relative to its sup norm.
pub const W_MEAN_TOLERANCE: f64 = 1e-6;

/// Relative residual at which [`MetricConfig::apply_inverse`] stops refining.
pub const INVERSE_TOLERANCE: f64 = 1e-14;
const INVERSE_REFINEMENTS: usize = 8;

/// A metric defined by a symbol family.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricConfig {
    symbol: LambdaSymbol,
}

impl MetricConfig {
    /// Validates the symbol (Hermitian, positive, elliptic on a broad length range).
    pub fn new(symbol: LambdaSymbol) -> Result<Self> {
        let max_mode = match symbol.family() {
            Family::CustomTable => {
                // only the tabulated modes can be checked; no difference orders needed
                let mut m = 0;
                while symbol.value(1.0, m + 1).is_ok() {
                    m += 1;
                }
                m
            }
            _ => 64,
        };
        let report = class_report(&symbol, (0.1, 100.0), 7, max_mode, 0)?;
        if !(report.hermitian && report.positive && report.elliptic) {
            return Err(Error::Domain(format!(
                "symbol is not an elliptic positive Hermitian family (margin {:.3e}, min eigenvalue {:.3e})",
                report.ellipticity_margin, report.min_eigenvalue
            )));
        }
        Ok(Self { symbol })
    }

    pub fn symbol(&self) -> &LambdaSymbol {
        &self.symbol
    }

    /// Integrating the geodesic equation needs `r >= 1` and an analytic `λ`-derivative.
    pub fn require_dynamics(&self) -> Result<()> {
        if self.symbol.order() < 1.0 {
            return Err(Error::NotSupported(format!(
                "geodesic integration needs order r >= 1, symbol has r = {}",
                self.symbol.order()
            )));
        }
        if !self.symbol.has_lambda_derivative() {
            return Err(Error::NotSupported("symbol has no lambda-derivative".into()));
        }
        Ok(())
    }

    /// `A_c u`.
    pub fn apply(&self, c: &DiscreteCurve, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        apply_conjugated(c, &self.symbol, Variant::Identity, u)
    }

    /// `A_c⁻¹ u`, solved against the discrete `A_c` so that `A_c (A_c⁻¹ u) = u` to roundoff.
    ///
    /// The conjugated flat inverse is only an approximate inverse once the flat grid is
    /// finer than the curve grid; it serves as the preconditioner of a short
    /// refinement iteration.
    pub fn apply_inverse(&self, c: &DiscreteCurve, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let approx = |r: &DMatrix<f64>| apply_conjugated(c, &self.symbol, Variant::Inverse, r);
        let target = u.norm() * INVERSE_TOLERANCE;
        let mut h = approx(u)?;
        let mut residual = u - self.apply(c, &h)?;
        for _ in 0..INVERSE_REFINEMENTS {
            if residual.norm() <= target {
                break;
            }
            h += approx(&residual)?;
            let next = u - self.apply(c, &h)?;
            if next.norm() >= residual.norm() {
                break; // at the roundoff floor
            }
            residual = next;
        }
        Ok(h)
    }

    /// `B_c u` with `B_c ∘ B_c = A_c`.
    pub fn apply_sqrt(&self, c: &DiscreteCurve, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        apply_conjugated(c, &self.symbol, Variant::Sqrt, u)
    }
}

fn check_field(c: &DiscreteCurve, u: &DMatrix<f64>) -> Result<()> {
    if u.nrows() != c.n() || u.ncols() != c.dim() {
        return Err(Error::Grid(format!(
            "field is {}x{}, curve is {}x{}",
            u.nrows(),
            u.ncols(),
            c.n(),
            c.dim()
        )));
    }
    Ok(())
}

/// `G_c(h, k)`.
pub fn metric(cfg: &MetricConfig, c: &DiscreteCurve, h: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<f64> {
    check_field(c, h)?;
    check_field(c, k)?;
    let ah = cfg.apply(c, h)?;
    c.ds_integral(&pointwise_dot(&ah, k))
}

/// `∫ ⟨B_c h, B_c k⟩ ds`, the symmetric form of the metric.
pub fn metric_symmetric(
    cfg: &MetricConfig,
    c: &DiscreteCurve,
    h: &DMatrix<f64>,
    k: &DMatrix<f64>,
) -> Result<f64> {
    check_field(c, h)?;
    check_field(c, k)?;
    let bh = cfg.apply_sqrt(c, h)?;
    let bk = cfg.apply_sqrt(c, k)?;
    c.ds_integral(&pointwise_dot(&bh, &bk))
}

/// `w` together with the split-off mean of its integrand.
#[derive(Debug, Clone)]
pub struct WField {
    pub values: DVector<f64>,
    /// ds-mean of `⟨A_c h, D_s h⟩`; zero for exact arithmetic.
    pub removed_mean: f64,
    /// Sup norm of the integrand, the scale for `removed_mean`.
    pub integrand_scale: f64,
}

impl WField {
    pub fn relative_mean(&self) -> f64 {
        if self.integrand_scale == 0.0 {
            0.0
        } else {
            self.removed_mean.abs() / self.integrand_scale
        }
    }
}

/// Everything the right-hand side of the geodesic equation is built from.
struct Terms {
    ah: DMatrix<f64>,
    dsh: DMatrix<f64>,
    integrand: DVector<f64>,
    w: WField,
    w0: f64,
}

fn terms(cfg: &MetricConfig, c: &DiscreteCurve, h: &DMatrix<f64>) -> Result<Terms> {
    check_field(c, h)?;
    let ah = cfg.apply(c, h)?;
    let dsh = c.arc_derivative(h)?;
    let integrand = pointwise_dot(&ah, &dsh);
    let anti = c.antiderivative(&integrand)?;
    let w = WField {
        values: anti.values,
        removed_mean: anti.removed_mean,
        integrand_scale: integrand.amax(),
    };
    let w0 = w0_from_parts(cfg, c, h, &ah, &w)?;
    Ok(Terms { ah, dsh, integrand, w, w0 })
}

/// `w₀` with the non-periodic first term integrated by parts:
/// `(1/2π)∫ g ψ_c ds = (1/ℓ)(μ ℓ²/2 - ∫ W ds)`, where `g = μ + D_s W` and `W` is periodic.
fn w0_from_parts(
    cfg: &MetricConfig,
    c: &DiscreteCurve,
    h: &DMatrix<f64>,
    ah: &DMatrix<f64>,
    w: &WField,
) -> Result<f64> {
    let ell = c.length();
    let mu = w.removed_mean;
    let periodic = &w.values - c.arc_length_function() * mu;
    let transport = (mu * ell * ell / 2.0 - c.ds_integral(&periodic)?) / ell;
    let a_prime_h = apply_conjugated(c, cfg.symbol(), Variant::LambdaDerivative, h)?;
    let combined = ah / ell + a_prime_h;
    let quadratic = 0.5 * c.ds_integral(&pointwise_dot(&combined, h))?;
    Ok(transport + quadratic)
}

/// `w(θ) = ∫_0^θ ⟨A_c h, D_s h⟩ ds̃`, without the mean-residual check.
pub fn w_field_unchecked(cfg: &MetricConfig, c: &DiscreteCurve, h: &DMatrix<f64>) -> Result<WField> {
    check_field(c, h)?;
    let ah = cfg.apply(c, h)?;
    let dsh = c.arc_derivative(h)?;
    let integrand = pointwise_dot(&ah, &dsh);
    let anti = c.antiderivative(&integrand)?;
    Ok(WField { values: anti.values, removed_mean: anti.removed_mean, integrand_scale: integrand.amax() })
}

/// `w(θ)`; fails when the integrand's ds-mean exceeds [`W_MEAN_TOLERANCE`] of its scale.
pub fn w_field(cfg: &MetricConfig, c: &DiscreteCurve, h: &DMatrix<f64>) -> Result<DVector<f64>> {
    let w = w_field_unchecked(cfg, c, h)?;
    if w.relative_mean() > W_MEAN_TOLERANCE {
        return Err(Error::MeanResidual { residual: w.relative_mean(), tolerance: W_MEAN_TOLERANCE });
    }
    Ok(w.values)
}

/// `w₀(c, h)`.
pub fn w0_scalar(cfg: &MetricConfig, c: &DiscreteCurve, h: &DMatrix<f64>) -> Result<f64> {
    if !cfg.symbol().has_lambda_derivative() {
        return Err(Error::NotSupported("w0 needs the symbol's lambda-derivative".into()));
    }
    Ok(terms(cfg, c, h)?.w0)
}

/// `W_0 = ½|h|²` and `W_j = ½ Σ_{k=1}^{2j-1} (-1)^{k+1} ⟨D_s^{2j-k} h, D_s^k h⟩`.
pub fn wj_fields(c: &DiscreteCurve, h: &DMatrix<f64>, n: usize) -> Result<Vec<DVector<f64>>> {
    let mut derivs = vec![h.clone()];
    for _ in 0..2 * n {
        let next = c.arc_derivative(derivs.last().unwrap())?;
        derivs.push(next);
    }
    let mut out = vec![pointwise_dot(h, h) * 0.5];
    for j in 1..=n {
        let mut acc = DVector::zeros(c.n());
        for k in 1..2 * j {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            acc += pointwise_dot(&derivs[2 * j - k], &derivs[k]) * sign;
        }
        out.push(acc * 0.5);
    }
    Ok(out)
}

/// The pieces of the spray, `-A_c S_c(h) = Σ terms`.
#[derive(Debug, Clone)]
pub struct SprayBreakdown {
    /// `(D_{c,h} A_c) h`
    pub term_operator_derivative: DMatrix<f64>,
    /// `⟨D_s h, v⟩ A_c h`
    pub term_dsh_v: DMatrix<f64>,
    /// `⟨A_c h, D_s h⟩ v`
    pub term_transport: DMatrix<f64>,
    /// `(w + w₀) D_s v`
    pub term_w_w0: DMatrix<f64>,
    pub w_field: DVector<f64>,
    pub w0: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

impl SprayBreakdown {
    pub fn total(&self) -> DMatrix<f64> {
        &self.term_operator_derivative + &self.term_dsh_v + &self.term_transport + &self.term_w_w0
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "term_operator_derivative": rows(&self.term_operator_derivative),
            "term_dsh_v": rows(&self.term_dsh_v),
            "term_transport": rows(&self.term_transport),
            "term_w_w0": rows(&self.term_w_w0),
            "w_field": self.w_field.iter().collect::<Vec<_>>(),
            "w0": self.w0,
        })
    }
}

fn warn_mean(w: &WField) {
    if w.relative_mean() > W_MEAN_TOLERANCE {
        log::warn!("w integrand has relative ds-mean {:.3e}", w.relative_mean());
    }
}

/// The three transport terms shared by the spray and momentum forms.
fn local_terms(c: &DiscreteCurve, t: &Terms) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let v = c.unit_tangent();
    let stretch = pointwise_dot(&t.dsh, v);
    let dsh_v = scale_rows(&stretch, &t.ah);
    let transport = scale_rows(&t.integrand, v);
    let coeff = t.w.values.add_scalar(t.w0);
    let w_w0 = scale_rows(&coeff, &c.curvature_vector());
    (dsh_v, transport, w_w0)
}

/// Geodesic spray `S_c(h) = -A_c⁻¹{(D_{c,h}A_c)h + ⟨D_s h,v⟩A_c h + ⟨A_c h,D_s h⟩v + (w+w₀)D_s v}`.
pub fn spray(
    cfg: &MetricConfig,
    c: &DiscreteCurve,
    h: &DMatrix<f64>,
    scheme: DerivativeScheme,
) -> Result<(TangentField, SprayBreakdown)> {
    let t = terms(cfg, c, h)?;
    warn_mean(&t.w);
    let (dsh_v, transport, w_w0) = local_terms(c, &t);
    let op_der = operator_directional_derivative(c, h, cfg.symbol(), h, scheme)?.into_values();
    let breakdown = SprayBreakdown {
        term_operator_derivative: op_der,
        term_dsh_v: dsh_v,
        term_transport: transport,
        term_w_w0: w_w0,
        w_field: t.w.values,
        w0: t.w0,
    };
    let s = -cfg.apply_inverse(c, &breakdown.total())?;
    Ok((TangentField::from(s), breakdown))
}

/// `∂_t(A_c c_t)` from the geodesic equation at `(c, c_t = h)`.
pub fn momentum_rhs(cfg: &MetricConfig, c: &DiscreteCurve, h: &DMatrix<f64>) -> Result<TangentField> {
    let t = terms(cfg, c, h)?;
    warn_mean(&t.w);
    let (dsh_v, transport, w_w0) = local_terms(c, &t);
    Ok(TangentField::from(-(dsh_v + transport + w_w0)))
}

/// Energy density `½ G_c(h, h)`.
pub fn kinetic_energy(cfg: &MetricConfig, c: &DiscreteCurve, h: &DMatrix<f64>) -> Result<f64> {
    Ok(0.5 * metric(cfg, c, h, h)?)
}

/// Time derivatives of a sequence of sample arrays: three-point centered differences in
/// the interior, second-order one-sided stencils at the ends.
pub fn time_derivatives(times: &[f64], frames: &[&DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    let n = frames.len();
    if n < 2 || times.len() != n {
        return Err(Error::Grid("need at least two frames with matching times".into()));
    }
    if n == 2 {
        let d = (frames[1] - frames[0]) / (times[1] - times[0]);
        return Ok(vec![d.clone(), d]);
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b, cidx, at) = if i == 0 {
            (0, 1, 2, 0)
        } else if i == n - 1 {
            (n - 3, n - 2, n - 1, 2)
        } else {
            (i - 1, i, i + 1, 1)
        };
        let (t0, t1, t2) = (times[a], times[b], times[cidx]);
        // derivative of the quadratic Lagrange interpolant at the chosen node
        let x = [t0, t1, t2][at];
        let l0 = ((x - t1) + (x - t2)) / ((t0 - t1) * (t0 - t2));
        let l1 = ((x - t0) + (x - t2)) / ((t1 - t0) * (t1 - t2));
        let l2 = ((x - t0) + (x - t1)) / ((t2 - t0) * (t2 - t1));
        out.push(frames[a] * l0 + frames[b] * l1 + frames[cidx] * l2);
    }
    Ok(out)
}

/// `E = ∫ ½ ∫ ⟨A_c c_t, c_t⟩ ds dt` over the path's time span, trapezoidal in time.
/// Stored velocities are used when every frame has one.
pub fn path_energy(cfg: &MetricConfig, path: &GeodesicPath) -> Result<f64> {
    let frames = path.frames();
    if frames.len() < 2 {
        return Err(Error::Grid("path energy needs at least two frames".into()));
    }
    let times: Vec<f64> = frames.iter().map(|f| f.t).collect();
    let velocities: Vec<DMatrix<f64>> = if frames.iter().all(|f| f.velocity.is_some()) {
        frames.iter().map(|f| f.velocity.clone().unwrap()).collect()
    } else {
        let curves: Vec<&DMatrix<f64>> = frames.iter().map(|f| &f.curve).collect();
        time_derivatives(&times, &curves)?
    };
    let mut density = Vec::with_capacity(frames.len());
    for (i, v) in velocities.iter().enumerate() {
        let c = path.curve(i)?;
        density.push(kinetic_energy(cfg, &c, v)?);
    }
    Ok(times
        .windows(2)
        .zip(density.windows(2))
        .map(|(t, e)| 0.5 * (t[1] - t[0]) * (e[0] + e[1]))
        .sum())
}

/// `∫ W_j ds` closed form `½ (1 - 2j) ∫ ⟨D_s^{2j} h, h⟩ ds`, used by the checks.
pub fn wj_integral_identity(c: &DiscreteCurve, h: &DMatrix<f64>, j: usize) -> Result<f64> {
    let mut d = h.clone();
    for _ in 0..2 * j {
        d = c.arc_derivative(&d)?;
    }
    Ok(0.5 * (1.0 - 2.0 * j as f64) * c.ds_integral(&pointwise_dot(&d, h))?)
}

/// `Σ_j (-1)^j α_j W_j` for an integer constant-coefficient symbol: the closed form of
/// `w + w₀` for those metrics.
pub fn integer_w_total(cfg: &MetricConfig, c: &DiscreteCurve, h: &DMatrix<f64>) -> Result<DVector<f64>> {
    let s = cfg.symbol();
    if s.family() != Family::ConstantCoefficient {
        return Err(Error::NotSupported("closed form only exists for constant-coefficient symbols".into()));
    }
    let alphas = s.alphas();
    let w = wj_fields(c, h, alphas.len() - 1)?;
    let mut acc = DVector::zeros(c.n());
    for (j, (a, wj)) in alphas.iter().zip(&w).enumerate() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += wj * (sign * a);
    }
    Ok(acc)
}

/// `(w, w₀)` evaluated together.
pub fn w_and_w0(cfg: &MetricConfig, c: &DiscreteCurve, h: &DMatrix<f64>) -> Result<(WField, f64)> {
    let t = terms(cfg, c, h)?;
    Ok((t.w, t.w0))
}
