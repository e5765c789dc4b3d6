//! Metric, w/w₀ fields and the geodesic spray with its individual terms.

use fracsob::metric::{metric, spray, w_and_w0};
use fracsob::operator::DerivativeScheme;
use fracsob::{shapes, DiscreteCurve, LambdaSymbol, MetricConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fracsob::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 128;
    let c = DiscreteCurve::new(shapes::random_curve(&mut rng, n, 4))?;
    let h = shapes::random_field(&mut rng, n, 2, 5, 0.3, true);
    let k = shapes::random_field(&mut rng, n, 2, 5, 0.3, true);
    let cfg = MetricConfig::new(LambdaSymbol::bessel(1.5, 1.0, 2)?)?;

    println!("G(h,k) = {:.10}, G(k,h) = {:.10}", metric(&cfg, &c, &h, &k)?, metric(&cfg, &c, &k, &h)?);
    let (w, w0) = w_and_w0(&cfg, &c, &h)?;
    println!("w0 = {w0:.6e}, |w|_∞ = {:.6e}, relative ds-mean removed {:.1e}", w.values.amax(), w.relative_mean());

    let (s, parts) = spray(&cfg, &c, &h, DerivativeScheme::Richardson)?;
    println!("|S_c(h)|_∞ = {:.6e}", s.values().amax());
    for (name, term) in [
        ("(D A_c) h", &parts.term_operator_derivative),
        ("<D_s h, v> A_c h", &parts.term_dsh_v),
        ("<A_c h, D_s h> v", &parts.term_transport),
        ("(w + w0) D_s v", &parts.term_w_w0),
    ] {
        println!("  {name:<18} {:.6e}", term.amax());
    }
    Ok(())
}
