//! Flat multipliers `A(λ)` and their curve-conjugated versions
//! `A_c = R_{ψ_c} ∘ A(ℓ_c) ∘ R_{ψ_c⁻¹}`.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;

use crate::curve::{CurveOptions, DiscreteCurve, TangentField};
use crate::error::{Error, Result};
use crate::spectral;
use crate::symbol::{LambdaSymbol, SymbolValue, Variant};

/// A multiplier frozen at one length `λ`.
#[derive(Debug, Clone, Copy)]
pub struct FlatOperator<'a> {
    pub symbol: &'a LambdaSymbol,
    pub lambda: f64,
    pub variant: Variant,
}

impl<'a> FlatOperator<'a> {
    pub fn new(symbol: &'a LambdaSymbol, lambda: f64, variant: Variant) -> Self {
        Self { symbol, lambda, variant }
    }

    /// Forward transform, multiply mode `m` by the variant of `a(λ, m)`, transform back.
    pub fn apply(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        apply_flat(self, u)
    }
}

/// Modewise application of `variant(a(λ, m))` to the columns of `u`.
pub fn apply_flat(op: &FlatOperator<'_>, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, d) = u.shape();
    if !op.symbol.is_scalar() && d != op.symbol.dim() {
        return Err(Error::Grid(format!(
            "field has {d} components, symbol acts on {}",
            op.symbol.dim()
        )));
    }
    let mut coeffs: Vec<Vec<Complex64>> =
        (0..d).map(|j| spectral::forward(u.column(j).as_slice())).collect();
    // a(λ, m) = a(λ, -m): evaluate once per |m|
    let mut cache: Vec<Option<SymbolValue>> = vec![None; n / 2 + 1];
    for k in 0..n {
        let m = spectral::mode(k, n);
        let slot = &mut cache[m.unsigned_abs() as usize];
        if slot.is_none() {
            *slot = Some(op.symbol.variant_value(op.variant, op.lambda, m)?);
        }
        match slot.as_ref().unwrap() {
            SymbolValue::Scalar(a) => {
                for col in coeffs.iter_mut() {
                    col[k] *= *a;
                }
            }
            SymbolValue::Matrix(mat) => {
                let before: Vec<Complex64> = coeffs.iter().map(|col| col[k]).collect();
                for (i, col) in coeffs.iter_mut().enumerate() {
                    col[k] = (0..d).map(|j| before[j] * mat[(i, j)]).sum();
                }
            }
        }
    }
    let mut out = DMatrix::zeros(n, d);
    for (j, col) in coeffs.into_iter().enumerate() {
        out.column_mut(j).copy_from_slice(&spectral::inverse_real(col));
    }
    Ok(out)
}

/// `R_{ψ_c} ∘ variant(A(ℓ_c)) ∘ R_{ψ_c⁻¹}` applied to `u`.
///
/// The flat multiplier acts on the curve's oversampled constant-speed grid
/// (see [`DiscreteCurve::flat`]).
///
/// The `LambdaDerivative` variant gives `A_c'`, the conjugated `λ`-derivative of the
/// flat operator, which is not the full variation of `A_c` with respect to `c`.
pub fn apply_conjugated(
    c: &DiscreteCurve,
    symbol: &LambdaSymbol,
    variant: Variant,
    u: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if u.nrows() != c.n() {
        return Err(Error::Grid(format!("field has {} samples, curve has {}", u.nrows(), c.n())));
    }
    let flat = c.flat();
    let mut flat_in = flat.to_flat(u);
    if c.options().dealias {
        flat_in = spectral::map_columns(&flat_in, spectral::low_pass_two_thirds);
    }
    let flat_out = apply_flat(&FlatOperator::new(symbol, c.length(), variant), &flat_in)?;
    Ok(flat.from_flat(&flat_out))
}

/// Scalar-field convenience wrapper around [`apply_conjugated`].
pub fn apply_conjugated_scalar(
    c: &DiscreteCurve,
    symbol: &LambdaSymbol,
    variant: Variant,
    f: &DVector<f64>,
) -> Result<DVector<f64>> {
    let m = DMatrix::from_column_slice(f.len(), 1, f.as_slice());
    let out = apply_conjugated(c, symbol, variant, &m)?;
    Ok(DVector::from_column_slice(out.as_slice()))
}

/// How [`operator_directional_derivative`] differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeScheme {
    #[default]
    Central,
    /// Central differences at `ε` and `ε/2` combined to cancel the `ε²` term.
    Richardson,
}

/// Step used for the curve perturbation `c ± εh`.
/// Relative size of the foot-point perturbation, `ε max|h'| = step · min|c'|`.
/// Each scheme's step balances its truncation order against rounding in `A_c`,
/// which the symbol's top modes amplify.
pub fn relative_step(scheme: DerivativeScheme) -> f64 {
    match scheme {
        DerivativeScheme::Central => 1e-4,
        DerivativeScheme::Richardson => 3e-3,
    }
}

/// `ε` for perturbing `c` along `h`. A_c depends on the samples only through c',
/// so both are measured in derivative terms. `None` when `h` is a translation.
pub fn directional_step(c: &DiscreteCurve, h: &DMatrix<f64>, scheme: DerivativeScheme) -> Option<f64> {
    let dh = spectral::map_columns(h, spectral::derivative).amax();
    (dh > 0.0).then(|| relative_step(scheme) * c.speed().min() / dh)
}

fn central(
    c: &DiscreteCurve,
    h: &DMatrix<f64>,
    symbol: &LambdaSymbol,
    k: &DMatrix<f64>,
    eps: f64,
) -> Result<DMatrix<f64>> {
    // same flat grid on both sides, so the difference quotient is smooth in ε
    let opts = CurveOptions { flat_size: Some(c.flat().size()), ..c.options() };
    let plus = DiscreteCurve::with_options(c.samples() + h * eps, opts)?;
    let minus = DiscreteCurve::with_options(c.samples() - h * eps, opts)?;
    let ap = apply_conjugated(&plus, symbol, Variant::Identity, k)?;
    let am = apply_conjugated(&minus, symbol, Variant::Identity, k)?;
    Ok((ap - am) / (2.0 * eps))
}

/// `(D_{c,h} A_c) k` by central differences in the foot point.
pub fn operator_directional_derivative(
    c: &DiscreteCurve,
    h: &DMatrix<f64>,
    symbol: &LambdaSymbol,
    k: &DMatrix<f64>,
    scheme: DerivativeScheme,
) -> Result<TangentField> {
    if h.nrows() != c.n() || k.nrows() != c.n() {
        return Err(Error::Grid("fields must share the curve grid".into()));
    }
    // A_c sees the samples only through their derivative, so the constant part of h
    // contributes nothing; dropping it keeps translations exact and lowers rounding noise.
    let mut h = h.clone();
    for mut col in h.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let h = &h;
    let eps = match directional_step(c, h, scheme) {
        Some(eps) if k.amax() > 0.0 => eps,
        _ => return Ok(TangentField::zeros(c.n(), k.ncols())),
    };
    let d1 = central(c, h, symbol, k, eps)?;
    Ok(TangentField::from(match scheme {
        DerivativeScheme::Central => d1,
        DerivativeScheme::Richardson => {
            let d2 = central(c, h, symbol, k, 0.5 * eps)?;
            (d2 * 4.0 - d1) / 3.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use std::f64::consts::TAU;

    #[test]
    fn identity_symbol_is_identity() {
        let s = LambdaSymbol::custom_table(0.0, vec![DMatrix::identity(2, 2); 17], None).unwrap();
        let u = TangentField::from_fn(32, 2, |t| vec![t.sin() + 0.1, (5.0 * t).cos()]);
        let out = apply_flat(&FlatOperator::new(&s, 1.0, Variant::Identity), &u).unwrap();
        assert!((out - u.values()).amax() < 1e-13);
    }

    #[test]
    fn pure_mode_is_scaled_by_symbol() {
        let s = LambdaSymbol::constant_coefficient(vec![1.0, 1.0], 2).unwrap();
        let u = TangentField::from_fn(32, 2, |t| vec![(2.0 * t).cos(), 0.0]);
        let out = apply_flat(&FlatOperator::new(&s, TAU, Variant::Identity), &u).unwrap();
        assert!((out - u.values() * 5.0).amax() < 1e-12);
    }

    #[test]
    fn inverse_round_trip() {
        let s = LambdaSymbol::bessel(1.5, 1.0, 2).unwrap();
        let u = TangentField::from_fn(64, 2, |t| vec![(3.0 * t).sin(), (t).cos() + 0.3]);
        let inv = apply_flat(&FlatOperator::new(&s, 2.0, Variant::Inverse), &u).unwrap();
        let back = apply_flat(&FlatOperator::new(&s, 2.0, Variant::Identity), &inv).unwrap();
        // the forward symbol amplifies roundoff by ~1e7 at the top modes
        assert!((back - u.values()).amax() < 1e-9);
    }

    #[test]
    fn degenerate_symbol_has_no_inverse() {
        let s = LambdaSymbol::two_term(1.0, 0.0, 1.0, 2).unwrap();
        let u = DMatrix::from_element(16, 2, 1.0);
        let r = apply_flat(&FlatOperator::new(&s, 1.0, Variant::Inverse), &u);
        assert!(matches!(r, Err(Error::NotPositiveDefinite { mode: 0, .. })));
    }

    #[test]
    fn constant_speed_conjugation_is_flat() {
        let c = DiscreteCurve::new(shapes::circle(32, 1.3)).unwrap();
        let s = LambdaSymbol::bessel(0.8, 1.0, 2).unwrap();
        let u = TangentField::from_fn(32, 2, |t| vec![(3.0 * t).sin(), (2.0 * t).cos()]);
        let a = apply_conjugated(&c, &s, Variant::Identity, &u).unwrap();
        let b = apply_flat(&FlatOperator::new(&s, c.length(), Variant::Identity), &u).unwrap();
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn zero_direction_gives_zero() {
        let c = DiscreteCurve::new(shapes::ellipse(32, 2.0, 1.0)).unwrap();
        let s = LambdaSymbol::bessel(1.5, 1.0, 2).unwrap();
        let h = TangentField::from_fn(32, 2, |t| vec![t.cos(), 0.0]);
        let z = operator_directional_derivative(&c, &h, &s, &DMatrix::zeros(32, 2), DerivativeScheme::Central).unwrap();
        assert_eq!(z.amax(), 0.0);
    }
}
