//! The conjugated operator A_c, its inverse and square root on a non-constant-speed curve.

use fracsob::operator::{operator_directional_derivative, DerivativeScheme};
use fracsob::{shapes, Diffeo, DiscreteCurve, LambdaSymbol, MetricConfig};

fn main() -> fracsob::Result<()> {
    let n = 128;
    let phi = Diffeo::from_fn(n, |t| 0.25 * (2.0 * t).sin())?;
    let c = DiscreteCurve::new(shapes::ellipse(n, 1.0, 0.5))?.reparametrized(&phi)?;
    let cfg = MetricConfig::new(LambdaSymbol::bessel(1.5, 1.0, 2)?)?;
    let h = fracsob::TangentField::from_fn(n, 2, |t| vec![(2.0 * t).cos(), 0.3 * (3.0 * t).sin()]).into_values();

    let ah = cfg.apply(&c, &h)?;
    let back = cfg.apply_inverse(&c, &ah)?;
    let bb = cfg.apply_sqrt(&c, &cfg.apply_sqrt(&c, &h)?)?;
    println!("flat grid size M = {}", c.flat().size());
    println!("|A⁻¹A h - h| / |h| = {:.2e}", (back - &h).amax() / h.amax());
    println!("|B B h - A h| / |A h| = {:.2e}", (bb - &ah).amax() / ah.amax());

    // derivative of A_c along the scaling direction h = c
    let d = operator_directional_derivative(&c, c.samples(), cfg.symbol(), &h, DerivativeScheme::Richardson)?;
    println!("|(D_(c,c) A_c) h| = {:.4e}", d.values().amax());
    Ok(())
}
