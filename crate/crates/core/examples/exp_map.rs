//! Integrate a geodesic from an ellipse and report energy conservation.

use fracsob::solver::{conservation_report, exp_map};
use fracsob::{shapes, DiscreteCurve, LambdaSymbol, MetricConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fracsob::Result<()> {
    let n = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let c0 = DiscreteCurve::new(shapes::ellipse(n, 1.0, 0.6))?;
    let h0 = shapes::random_field(&mut rng, n, 2, 4, 0.3, true);
    let cfg = MetricConfig::new(LambdaSymbol::bessel(1.5, 1.0, 2)?)?;

    let path = exp_map(&cfg, &c0, &h0, 1.0, 64)?;
    let report = conservation_report(&path)?;
    for (i, f) in path.frames().iter().enumerate().step_by(16) {
        println!("t = {:.3}  length {:.6}  energy {:.10}", f.t, report.lengths[i], report.energies[i]);
    }
    println!("max relative energy drift {:.2e}, momentum residual {:.2e}", report.max_relative_drift, report.max_momentum_residual);
    Ok(())
}
