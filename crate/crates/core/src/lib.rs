//! Geodesics on the space of closed immersed curves for reparametrization-invariant
//! Sobolev metrics of fractional order.
//!
//! The metric is `G_c(h, k) = ∫ ⟨A_c h, k⟩ ds` where `A_c` is a Fourier multiplier
//! conjugated to constant speed, `A_c = R_{ψ_c} ∘ A(ℓ_c) ∘ R_{ψ_c⁻¹}`, and `A(λ)` is
//! given by a length-dependent symbol `a(λ, m)`. Everything is discretized on a
//! uniform periodic grid and evaluated spectrally.
//!
//! Module map:
//! - [`curve`]: discrete curves, arc-length calculus, reparametrization.
//! - [`symbol`]: symbol families, `λ`-derivatives, square roots, class diagnostics.
//! - [`operator`]: flat and conjugated multipliers.
//! - [`metric`]: the metric, `w`, `w₀`, the spray and the momentum form of the geodesic equation.
//! - [`solver`]: exponential map, shooting, conservation diagnostics.
//! - [`io`], [`cli`], [`check`]: file formats, command-line front end, invariant suite.

pub mod check;
pub mod cli;
pub mod curve;
pub mod error;
pub mod io;
pub mod metric;
pub mod operator;
pub mod shapes;
pub mod solver;
pub mod spectral;
pub mod symbol;

pub use curve::{DiscreteCurve, Diffeo, TangentField};
pub use error::{Error, Result};
pub use metric::MetricConfig;
pub use symbol::{Family, LambdaSymbol, Variant};
