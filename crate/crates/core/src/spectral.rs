//! Fourier machinery on the uniform periodic grid `θ_k = 2πk/N`.
//!
//! Coefficients are normalized so that `u(θ_k) = Σ_m û(m) exp(i m θ_k)`. For even
//! `N` the Nyquist coefficient is stored at mode `-N/2` and interpolates as
//! `cos(N θ / 2)` (split evenly between `±N/2`), which keeps interpolants of real
//! data real.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANS: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> = RefCell::new(HashMap::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry((n, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

/// Grid angles `2πk/N`.
pub fn grid(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |k, _| TAU * k as f64 / n as f64)
}

/// Signed wavenumber stored at FFT index `k`; the Nyquist slot maps to `-N/2`.
#[inline]
pub fn mode(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Normalized forward transform of real samples.
pub fn forward(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(n, false).process(&mut buf);
    let scale = 1.0 / n as f64;
    for c in buf.iter_mut() {
        *c *= scale;
    }
    buf
}

/// Inverse of [`forward`], keeping the real part.
pub fn inverse_real(mut coeffs: Vec<Complex64>) -> Vec<f64> {
    let n = coeffs.len();
    plan(n, true).process(&mut coeffs);
    coeffs.into_iter().map(|c| c.re).collect()
}

/// Multiplies mode `m` by `f(m)` and transforms back.
pub fn apply_multiplier(values: &[f64], f: impl Fn(i64) -> f64) -> Vec<f64> {
    let n = values.len();
    let mut coeffs = forward(values);
    for (k, c) in coeffs.iter_mut().enumerate() {
        *c *= f(mode(k, n));
    }
    inverse_real(coeffs)
}

/// Spectral derivative `∂_θ`; the Nyquist mode is dropped.
pub fn derivative(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut coeffs = forward(values);
    for (k, c) in coeffs.iter_mut().enumerate() {
        let m = mode(k, n);
        if 2 * m.unsigned_abs() as usize == n {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= Complex64::new(0.0, m as f64);
        }
    }
    inverse_real(coeffs)
}

/// Periodic antiderivative of the zero-mean part of `values`, pinned to zero at `θ = 0`.
///
/// Returns the antiderivative samples together with the removed θ-mean.
pub fn periodic_antiderivative(values: &[f64]) -> (Vec<f64>, f64) {
    let n = values.len();
    let mut coeffs = forward(values);
    let mean = coeffs[0].re;
    for (k, c) in coeffs.iter_mut().enumerate() {
        let m = mode(k, n);
        if m == 0 || 2 * m.unsigned_abs() as usize == n {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c /= Complex64::new(0.0, m as f64);
        }
    }
    let mut out = inverse_real(coeffs);
    let offset = out[0];
    for v in out.iter_mut() {
        *v -= offset;
    }
    (out, mean)
}

/// Two-thirds low-pass filter: zeroes every mode with `|m| > N/3`.
pub fn low_pass_two_thirds(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let cutoff = n as i64 / 3;
    apply_multiplier(values, |m| if m.abs() > cutoff { 0.0 } else { 1.0 })
}

/// Applies a per-column map to an `N × d` array.
pub fn map_columns(values: &DMatrix<f64>, f: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let (n, d) = values.shape();
    let mut out = DMatrix::zeros(n, d);
    for j in 0..d {
        let col = values.column(j);
        let res = f(col.as_slice());
        out.column_mut(j).copy_from_slice(&res);
    }
    out
}

/// Trigonometric interpolation weights of the `N` grid samples at `x`
/// (the periodic sinc `sin(Nδ/2) / (N tan(δ/2))`, `δ = x - θ_j`).
///
/// Away from the nodes the numerator is evaluated as `(-1)^j sin(Nx/2)`, so its rounding
/// error is common to all weights (a shift of `x`) instead of growing with `N|δ|`.
pub fn interpolation_weights(x: f64, n: usize, out: &mut [f64]) {
    let nf = n as f64;
    let x = x.rem_euclid(TAU);
    let s = (0.5 * nf * x).sin();
    for (j, w) in out.iter_mut().enumerate() {
        let theta = TAU * j as f64 / nf;
        let delta = (x - theta + PI).rem_euclid(TAU) - PI;
        *w = if delta == 0.0 {
            1.0
        } else if delta.abs() < PI / nf {
            (0.5 * nf * delta).sin() / (nf * (0.5 * delta).tan())
        } else {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * s / (nf * (0.5 * delta).tan())
        };
    }
}

/// Matrix `E` with `(E u)_k = ũ(points_k)` for the trigonometric interpolant `ũ` of `u`.
pub fn interpolation_matrix(points: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(points.len(), n);
    let mut row = vec![0.0; n];
    for (i, &x) in points.iter().enumerate() {
        interpolation_weights(x, n, &mut row);
        for (j, &w) in row.iter().enumerate() {
            m[(i, j)] = w;
        }
    }
    m
}

/// Real Fourier coefficients `a_0, a_1, b_1, ..., a_{N/2-1}, b_{N/2-1}, a_{N/2}` of the
/// interpolant `a_0 + Σ a_m cos mθ + b_m sin mθ + a_{N/2} cos(Nθ/2)`.
pub fn real_coefficients(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let c = forward(values);
    let mut out = Vec::with_capacity(n);
    out.push(c[0].re);
    for cm in &c[1..n / 2] {
        out.push(2.0 * cm.re);
        out.push(-2.0 * cm.im);
    }
    out.push(c[n / 2].re);
    out
}

/// Rows `[1, cos x, sin x, ..., cos((N/2-1)x), sin((N/2-1)x), cos(Nx/2)]` at each point,
/// so that `real_trig_basis(x, N) · real_coefficients(u)` evaluates the interpolant of `u`.
pub fn real_trig_basis(points: &[f64], n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(points.len(), n);
    for (i, &x) in points.iter().enumerate() {
        let x = x.rem_euclid(TAU);
        out[(i, 0)] = 1.0;
        for m in 1..n / 2 {
            let (s, c) = (m as f64 * x).sin_cos();
            out[(i, 2 * m - 1)] = c;
            out[(i, 2 * m)] = s;
        }
        out[(i, n - 1)] = (0.5 * n as f64 * x).cos();
    }
    out
}

/// A real trigonometric polynomial kept in coefficient form for fast point evaluation.
#[derive(Debug, Clone)]
pub struct TrigPoly {
    coeffs: Vec<Complex64>,
}

impl TrigPoly {
    pub fn from_samples(values: &[f64]) -> Self {
        Self { coeffs: forward(values) }
    }

    /// Value and first derivative at `x`.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let n = self.coeffs.len();
        let half = n / 2;
        let z = Complex64::from_polar(1.0, x);
        let mut zm = Complex64::new(1.0, 0.0);
        let mut value = self.coeffs[0].re;
        let mut deriv = 0.0;
        for m in 1..half {
            zm *= z;
            let term = self.coeffs[m] * zm;
            value += 2.0 * term.re;
            // d/dx of 2 Re(c e^{imx}) = -2 m Im(c e^{imx})
            deriv -= 2.0 * m as f64 * term.im;
        }
        let nyq = self.coeffs[half].re;
        let hx = half as f64 * x;
        value += nyq * hx.cos();
        deriv -= nyq * half as f64 * hx.sin();
        (value, deriv)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).0
    }
}
