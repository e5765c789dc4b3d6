//! Length-dependent Fourier multiplier symbols `a(λ, m)`.
//!
//! The built-in families are
//!
//! | family                 | `a(λ, m)`                                  |
//! |------------------------|--------------------------------------------|
//! | `constant_coefficient` | `Σ_j α_j (2πm/λ)^{2j} · I`                 |
//! | `scale_invariant`      | `λ⁻³ Σ_j α_j (2πm)^{2j} · I`               |
//! | `bessel_fractional`    | `α_0 (1 + (2πm/λ)²)^r · I`                 |
//! | `two_term_fractional`  | `(α_0 + α_1 (2πm/λ)^{2r}) · I`             |
//! | `custom_table`         | tabulated symmetric matrices, `λ`-free     |
//!
//! All families are even in `m` and real symmetric, so they map real fields to real
//! fields. Each one belongs to the symbol class of order `2r` and is elliptic when its
//! leading and constant coefficients are positive; [`class_report`] checks this on a
//! finite range of modes and lengths.

use std::f64::consts::TAU;

use nalgebra::{ComplexField, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ConstantCoefficient,
    ScaleInvariant,
    BesselFractional,
    TwoTermFractional,
    CustomTable,
}

/// Which function of the symbol a multiplier applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Identity,
    Inverse,
    Sqrt,
    SqrtInverse,
    LambdaDerivative,
}

/// A tabulated, length-independent matrix symbol indexed by `|m|`.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomTable {
    values: Vec<DMatrix<f64>>,
    derivative: Option<Vec<DMatrix<f64>>>,
}

/// Symbol value at one `(λ, m)`: either a multiple of the identity or a full matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolValue {
    Scalar(f64),
    Matrix(DMatrix<f64>),
}

impl SymbolValue {
    pub fn to_matrix(&self, d: usize) -> DMatrix<f64> {
        match self {
            SymbolValue::Scalar(a) => DMatrix::identity(d, d) * *a,
            SymbolValue::Matrix(m) => m.clone(),
        }
    }
}

/// A family `λ ↦ a(λ, ·)` of multiplier symbols acting on `ℝ^d`-valued fields.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSymbol {
    family: Family,
    order: f64,
    alphas: Vec<f64>,
    dim: usize,
    table: Option<CustomTable>,
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::Domain(format!("coefficients must be finite and >= 0, got {alphas:?}")));
    }
    Ok(())
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    Ok(())
}

impl LambdaSymbol {
    /// Sobolev metric with constant coefficients, order `n = alphas.len() - 1`.
    pub fn constant_coefficient(alphas: Vec<f64>, d: usize) -> Result<Self> {
        Self::integer(Family::ConstantCoefficient, alphas, d)
    }

    /// Scale-invariant Sobolev metric, weights `ℓ^{2j-3}`.
    pub fn scale_invariant(alphas: Vec<f64>, d: usize) -> Result<Self> {
        Self::integer(Family::ScaleInvariant, alphas, d)
    }

    fn integer(family: Family, alphas: Vec<f64>, d: usize) -> Result<Self> {
        check_dim(d)?;
        check_alphas(&alphas)?;
        if alphas.is_empty() || alphas[0] <= 0.0 || *alphas.last().unwrap() <= 0.0 {
            return Err(Error::Domain(
                "integer families need alpha_0 > 0 and alpha_n > 0".into(),
            ));
        }
        Ok(Self { family, order: (alphas.len() - 1) as f64, alphas, dim: d, table: None })
    }

    /// `α_0 (1 + (2πm/λ)²)^r`.
    pub fn bessel(r: f64, alpha0: f64, d: usize) -> Result<Self> {
        check_dim(d)?;
        check_alphas(&[alpha0])?;
        if !(r >= 0.0 && r.is_finite()) || alpha0 <= 0.0 {
            return Err(Error::Domain(format!("bessel symbol needs r >= 0, alpha_0 > 0 (r = {r}, alpha_0 = {alpha0})")));
        }
        Ok(Self { family: Family::BesselFractional, order: r, alphas: vec![alpha0], dim: d, table: None })
    }

    /// `α_0 + α_1 (2πm/λ)^{2r}`. `α_0 = 0` is accepted and yields a degenerate symbol.
    pub fn two_term(r: f64, alpha0: f64, alpha1: f64, d: usize) -> Result<Self> {
        check_dim(d)?;
        check_alphas(&[alpha0, alpha1])?;
        if !(r > 0.0 && r.is_finite()) || alpha1 <= 0.0 {
            return Err(Error::Domain(format!("two-term symbol needs r > 0, alpha_1 > 0 (r = {r}, alpha_1 = {alpha1})")));
        }
        Ok(Self {
            family: Family::TwoTermFractional,
            order: r,
            alphas: vec![alpha0, alpha1],
            dim: d,
            table: None,
        })
    }

    /// Tabulated symbol: `values[|m|]` is `a(·, m)`. `order` is the nominal order `r`
    /// used by the class diagnostics. Without a derivative table the symbol cannot
    /// drive the geodesic equation.
    pub fn custom_table(
        order: f64,
        values: Vec<DMatrix<f64>>,
        derivative: Option<Vec<DMatrix<f64>>>,
    ) -> Result<Self> {
        let first = values.first().ok_or_else(|| Error::Domain("empty symbol table".into()))?;
        let d = first.nrows();
        check_dim(d)?;
        let square = |m: &DMatrix<f64>| m.nrows() == d && m.ncols() == d;
        if !values.iter().all(square) {
            return Err(Error::Domain("symbol table entries must all be d x d".into()));
        }
        if let Some(der) = &derivative {
            if der.len() != values.len() || !der.iter().all(square) {
                return Err(Error::Domain("derivative table must match the value table".into()));
            }
        }
        Ok(Self {
            family: Family::CustomTable,
            order,
            alphas: vec![],
            dim: d,
            table: Some(CustomTable { values, derivative }),
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// `r`; the operator has order `2r`.
    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_lambda_derivative(&self) -> bool {
        match &self.table {
            Some(t) => t.derivative.is_some(),
            None => true,
        }
    }

    /// True when the symbol is a multiple of the identity at every mode.
    pub fn is_scalar(&self) -> bool {
        self.family != Family::CustomTable
    }

    fn check_lambda(lambda: f64) -> Result<()> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        Ok(())
    }

    fn table_entry(entries: &[DMatrix<f64>], m: i64) -> Result<&DMatrix<f64>> {
        entries
            .get(m.unsigned_abs() as usize)
            .ok_or_else(|| Error::Domain(format!("mode {m} outside the symbol table")))
    }

    /// `a(λ, m)`.
    pub fn value(&self, lambda: f64, m: i64) -> Result<SymbolValue> {
        Self::check_lambda(lambda)?;
        let x2 = (TAU * m as f64 / lambda).powi(2);
        let a = &self.alphas;
        Ok(SymbolValue::Scalar(match self.family {
            Family::ConstantCoefficient => poly(a, x2),
            Family::ScaleInvariant => poly(a, (TAU * m as f64).powi(2)) / lambda.powi(3),
            Family::BesselFractional => a[0] * (1.0 + x2).powf(self.order),
            Family::TwoTermFractional => a[0] + a[1] * x2.powf(self.order),
            Family::CustomTable => {
                let t = self.table.as_ref().expect("custom symbol has a table");
                return Ok(SymbolValue::Matrix(Self::table_entry(&t.values, m)?.clone()));
            }
        }))
    }

    /// `∂_λ a(λ, m)`.
    pub fn lambda_derivative(&self, lambda: f64, m: i64) -> Result<SymbolValue> {
        Self::check_lambda(lambda)?;
        let x2 = (TAU * m as f64 / lambda).powi(2);
        let a = &self.alphas;
        let r = self.order;
        Ok(SymbolValue::Scalar(match self.family {
            Family::ConstantCoefficient => {
                let mut acc = 0.0;
                let mut pow = 1.0;
                for (j, aj) in a.iter().enumerate() {
                    acc -= 2.0 * j as f64 / lambda * aj * pow;
                    pow *= x2;
                }
                acc
            }
            Family::ScaleInvariant => -3.0 / lambda * poly(a, (TAU * m as f64).powi(2)) / lambda.powi(3),
            Family::BesselFractional => a[0] * r * (1.0 + x2).powf(r - 1.0) * (-2.0 * x2 / lambda),
            Family::TwoTermFractional => -(2.0 * r / lambda) * a[1] * x2.powf(r),
            Family::CustomTable => {
                let t = self.table.as_ref().expect("custom symbol has a table");
                let der = t.derivative.as_ref().ok_or_else(|| {
                    Error::NotSupported("custom symbol table has no lambda-derivative".into())
                })?;
                return Ok(SymbolValue::Matrix(Self::table_entry(der, m)?.clone()));
            }
        }))
    }

    /// The matrix actually applied at mode `m` for the given variant.
    pub fn variant_value(&self, variant: Variant, lambda: f64, m: i64) -> Result<SymbolValue> {
        if variant == Variant::LambdaDerivative {
            return self.lambda_derivative(lambda, m);
        }
        let value = self.value(lambda, m)?;
        if variant == Variant::Identity {
            return Ok(value);
        }
        match value {
            SymbolValue::Scalar(a) => {
                if !(a > 0.0) {
                    return Err(Error::NotPositiveDefinite { mode: m, min_eigenvalue: a });
                }
                Ok(SymbolValue::Scalar(match variant {
                    Variant::Inverse => 1.0 / a,
                    Variant::Sqrt => a.sqrt(),
                    Variant::SqrtInverse => 1.0 / a.sqrt(),
                    _ => unreachable!(),
                }))
            }
            SymbolValue::Matrix(mat) => {
                let f: fn(f64) -> f64 = match variant {
                    Variant::Inverse => |x| 1.0 / x,
                    Variant::Sqrt => f64::sqrt,
                    Variant::SqrtInverse => |x| 1.0 / x.sqrt(),
                    _ => unreachable!(),
                };
                positive_spectral_map(&mat, f)
                    .map(SymbolValue::Matrix)
                    .map_err(|min_eigenvalue| Error::NotPositiveDefinite { mode: m, min_eigenvalue })
            }
        }
    }
}

fn poly(alphas: &[f64], x: f64) -> f64 {
    alphas.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

/// Applies `f` to the eigenvalues of a positive definite Hermitian matrix.
/// Returns the smallest eigenvalue as the error when the matrix is not positive definite.
pub fn positive_spectral_map<T>(a: &DMatrix<T>, f: impl Fn(f64) -> f64) -> std::result::Result<DMatrix<T>, f64>
where
    T: ComplexField<RealField = f64>,
{
    let herm = (a + a.adjoint()) * T::from_real(0.5);
    let eig = herm.symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(min);
    }
    let mut scaled = eig.eigenvectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= T::from_real(f(eig.eigenvalues[j]));
    }
    Ok(scaled * eig.eigenvectors.adjoint())
}

/// Unique positive Hermitian square root.
pub fn hermitian_sqrt<T>(a: &DMatrix<T>) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64>,
{
    positive_spectral_map(a, f64::sqrt)
        .map_err(|min_eigenvalue| Error::NotPositiveDefinite { mode: 0, min_eigenvalue })
}

/// `a(λ, m)` as a `d × d` matrix.
pub fn eval_symbol(s: &LambdaSymbol, lambda: f64, m: i64) -> Result<DMatrix<f64>> {
    Ok(s.value(lambda, m)?.to_matrix(s.dim()))
}

/// `∂_λ a(λ, m)` as a `d × d` matrix.
pub fn symbol_lambda_derivative(s: &LambdaSymbol, lambda: f64, m: i64) -> Result<DMatrix<f64>> {
    Ok(s.lambda_derivative(lambda, m)?.to_matrix(s.dim()))
}

/// Positive square root `b(λ, m)` with `b² = a(λ, m)`.
pub fn sqrt_symbol(s: &LambdaSymbol, lambda: f64, m: i64) -> Result<DMatrix<f64>> {
    Ok(s.variant_value(Variant::Sqrt, lambda, m)?.to_matrix(s.dim()))
}

/// Finite-range diagnostics for the symbol class of order `2r` and its elliptic subclass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassReport {
    pub family: Family,
    pub order: f64,
    pub lambdas: Vec<f64>,
    pub max_mode: i64,
    /// `p_α = max ‖Δ^α a(λ, m)‖ ⟨m⟩^{α - 2r}` for `α = 0..=α_max`.
    pub seminorms: Vec<f64>,
    /// `min ‖a(λ, m)⁻¹‖⁻¹ ⟨m⟩^{-2r}`; zero or negative when some mode is degenerate.
    pub ellipticity_margin: f64,
    /// `max ‖a(λ, m)‖ ⟨m⟩^{-2r}`.
    pub upper_ratio: f64,
    pub min_eigenvalue: f64,
    pub hermitian: bool,
    pub positive: bool,
    pub elliptic: bool,
}

impl ClassReport {
    /// All verdicts hold and every reported number is finite.
    pub fn passes(&self) -> bool {
        self.hermitian
            && self.positive
            && self.elliptic
            && self.seminorms.iter().all(|p| p.is_finite())
            && self.ellipticity_margin.is_finite()
    }
}

fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)].abs();
    }
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Evaluates the class diagnostics at `lambda_samples` points spread over
/// `lambda_range`, modes `|m| <= max_mode`, differences up to order `alpha_max`.
pub fn class_report(
    s: &LambdaSymbol,
    lambda_range: (f64, f64),
    lambda_samples: usize,
    max_mode: i64,
    alpha_max: usize,
) -> Result<ClassReport> {
    let (lo, hi) = lambda_range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::Domain(format!("lambda range must be positive and ordered, got [{lo}, {hi}]")));
    }
    let samples = lambda_samples.max(1);
    let lambdas: Vec<f64> = (0..samples)
        .map(|i| if samples == 1 { lo } else { lo + (hi - lo) * i as f64 / (samples - 1) as f64 })
        .collect();
    let r = s.order();
    let japanese = |m: i64| (1.0 + (m * m) as f64).sqrt();

    let mut seminorms = vec![0.0f64; alpha_max + 1];
    let mut margin = f64::INFINITY;
    let mut upper: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let mut hermitian = true;

    for &lambda in &lambdas {
        let modes: Vec<i64> = (-max_mode..=max_mode + alpha_max as i64).collect();
        let values: Vec<DMatrix<f64>> =
            modes.iter().map(|&m| eval_symbol(s, lambda, m)).collect::<Result<_>>()?;
        let in_range = 2 * max_mode as usize + 1;
        for (i, a) in values.iter().take(in_range).enumerate() {
            let m = modes[i];
            let norm = spectral_norm(a);
            if (a - a.transpose()).amax() > 1e-14 * norm.max(f64::MIN_POSITIVE) {
                hermitian = false;
            }
            let ev = min_eigenvalue(a);
            min_eig = min_eig.min(ev);
            let weight = japanese(m).powf(-2.0 * r);
            margin = margin.min(ev * weight);
            upper = upper.max(norm * weight);
        }
        let mut diff = values;
        for (alpha, p) in seminorms.iter_mut().enumerate() {
            if alpha > 0 {
                diff = diff.windows(2).map(|w| &w[1] - &w[0]).collect();
            }
            for (i, a) in diff.iter().take(in_range).enumerate() {
                let m = modes[i];
                *p = p.max(spectral_norm(a) * japanese(m).powf(alpha as f64 - 2.0 * r));
            }
        }
    }

    Ok(ClassReport {
        family: s.family(),
        order: r,
        lambdas,
        max_mode,
        seminorms,
        ellipticity_margin: margin,
        upper_ratio: upper,
        min_eigenvalue: min_eig,
        hermitian,
        positive: min_eig > 0.0,
        elliptic: margin > 0.0,
    })
}

/// Symbol block of a run configuration: `{"family", "r", "alphas", "d"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub family: Family,
    pub r: f64,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default = "default_dim")]
    pub d: usize,
    /// Rows of each `d × d` entry, indexed by `|m|` (custom tables only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative_table: Option<Vec<Vec<Vec<f64>>>>,
}

fn default_dim() -> usize {
    2
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Config("table entries must be square".into()));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

impl SymbolConfig {
    pub fn build(&self) -> Result<LambdaSymbol> {
        let alpha = |j: usize| -> Result<f64> {
            self.alphas
                .get(j)
                .copied()
                .ok_or_else(|| Error::Config(format!("alphas needs at least {} entries", j + 1)))
        };
        let built = match self.family {
            Family::ConstantCoefficient | Family::ScaleInvariant => {
                let expected = self.alphas.len().saturating_sub(1) as f64;
                if (self.r - expected).abs() > 0.0 {
                    return Err(Error::Config(format!(
                        "r = {} does not match the {} coefficients of an integer family (expected r = {expected})",
                        self.r,
                        self.alphas.len()
                    )));
                }
                if self.family == Family::ConstantCoefficient {
                    LambdaSymbol::constant_coefficient(self.alphas.clone(), self.d)
                } else {
                    LambdaSymbol::scale_invariant(self.alphas.clone(), self.d)
                }
            }
            Family::BesselFractional => LambdaSymbol::bessel(self.r, alpha(0)?, self.d),
            Family::TwoTermFractional => LambdaSymbol::two_term(self.r, alpha(0)?, alpha(1)?, self.d),
            Family::CustomTable => {
                let table = self
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::Config("custom_table needs a table".into()))?;
                let values = table.iter().map(|e| rows_to_matrix(e)).collect::<Result<Vec<_>>>()?;
                let derivative = self
                    .derivative_table
                    .as_ref()
                    .map(|t| t.iter().map(|e| rows_to_matrix(e)).collect::<Result<Vec<_>>>())
                    .transpose()?;
                LambdaSymbol::custom_table(self.r, values, derivative)
            }
        };
        built.map_err(|e| Error::Config(e.to_string()))
    }
}
