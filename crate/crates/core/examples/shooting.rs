//! Geodesic boundary value problem: circle to a rotated, enlarged circle.

use fracsob::solver::{geodesic_bvp, ShootingOptions};
use fracsob::{shapes, DiscreteCurve, LambdaSymbol, MetricConfig};

fn main() -> fracsob::Result<()> {
    let n = 64;
    let c0 = shapes::circle(n, 1.0);
    let c1 = shapes::rotate_scale(&c0, 0.4, 1.2);
    let cfg = MetricConfig::new(LambdaSymbol::constant_coefficient(vec![1.0, 1.0], 2)?)?;
    let r = geodesic_bvp(&cfg, &DiscreteCurve::new(c0)?, &DiscreteCurve::new(c1)?, &ShootingOptions::default())?;
    println!("residual {:.2e} after {} iterations", r.residual, r.iterations);
    println!("|initial velocity|_∞ = {:.6}", r.initial_velocity.values().amax());
    Ok(())
}
