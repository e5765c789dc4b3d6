//! Sample curves and fields: circles, ellipses and seeded random band-limited shapes.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::Rng;

/// Circle of the given radius, `(r cos θ, r sin θ)`.
pub fn circle(n: usize, radius: f64) -> DMatrix<f64> {
    ellipse(n, radius, radius)
}

/// Axis-aligned ellipse `(a cos θ, b sin θ)`.
pub fn ellipse(n: usize, a: f64, b: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, 2, |k, j| {
        let t = TAU * k as f64 / n as f64;
        if j == 0 {
            a * t.cos()
        } else {
            b * t.sin()
        }
    })
}

/// Rotates a planar sample array by `angle` and scales it by `scale`.
pub fn rotate_scale(samples: &DMatrix<f64>, angle: f64, scale: f64) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_fn(samples.nrows(), 2, |k, j| {
        let (x, y) = (samples[(k, 0)], samples[(k, 1)]);
        scale * if j == 0 { c * x - s * y } else { s * x + c * y }
    })
}

/// Random band-limited field: Fourier modes `1..=max_mode` (plus a constant when
/// `with_mean`) with amplitudes decaying like `amplitude / m²`.
pub fn random_field<R: Rng>(
    rng: &mut R,
    n: usize,
    d: usize,
    max_mode: usize,
    amplitude: f64,
    with_mean: bool,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, d);
    for j in 0..d {
        let mean = if with_mean { amplitude * rng.gen_range(-1.0..1.0) } else { 0.0 };
        let coeffs: Vec<(f64, f64)> = (1..=max_mode)
            .map(|m| {
                let scale = amplitude / (m * m) as f64;
                (scale * rng.gen_range(-1.0..1.0), scale * rng.gen_range(-1.0..1.0))
            })
            .collect();
        for k in 0..n {
            let t = TAU * k as f64 / n as f64;
            let mut v = mean;
            for (i, (a, b)) in coeffs.iter().enumerate() {
                let m = (i + 1) as f64;
                v += a * (m * t).cos() + b * (m * t).sin();
            }
            out[(k, j)] = v;
        }
    }
    out
}

/// Ellipse `(a cos θ, b sin θ)` plus a small random band-limited perturbation of
/// modes `2..=max_mode`, kept well inside the immersion set.
pub fn random_curve<R: Rng>(rng: &mut R, n: usize, max_mode: usize) -> DMatrix<f64> {
    let a = rng.gen_range(0.9..1.4);
    let b = rng.gen_range(0.7..1.1);
    let mut out = ellipse(n, a, b);
    for j in 0..2 {
        for m in 2..=max_mode {
            let scale = 0.08 / (m * m) as f64;
            let (ca, cb) = (scale * rng.gen_range(-1.0..1.0), scale * rng.gen_range(-1.0..1.0));
            for k in 0..n {
                let t = TAU * k as f64 / n as f64;
                out[(k, j)] += ca * (m as f64 * t).cos() + cb * (m as f64 * t).sin();
            }
        }
    }
    out
}
