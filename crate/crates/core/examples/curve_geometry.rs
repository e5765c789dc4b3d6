//! Arc-length calculus on a non-uniformly sampled ellipse, and reparametrization.

use fracsob::curve::reparametrize;
use fracsob::{shapes, Diffeo, DiscreteCurve};

fn main() -> fracsob::Result<()> {
    let n = 128;
    let phi = Diffeo::from_fn(n, |t| 0.3 * t.sin())?;
    let c = DiscreteCurve::new(shapes::ellipse(n, 1.5, 0.7))?;
    let cp = c.reparametrized(&phi)?;
    println!("length {:.12} (reparametrized {:.12})", c.length(), cp.length());
    println!("min speed {:.4}, reparametrized {:.4}", c.speed().min(), cp.speed().min());

    // ∫ κ ds = 2π for a convex curve
    let kappa = c.curvature_vector().row_iter().map(|r| r.norm()).collect::<Vec<_>>();
    let total = c.ds_integral(&nalgebra::DVector::from_vec(kappa))?;
    println!("total curvature / 2π = {:.12}", total / std::f64::consts::TAU);

    // ψ_c maps θ to normalized arc length
    println!("ψ_c residual of inverse {:.2e}", c.psi().inverse_residual());

    let h = c.unit_tangent().clone();
    let back = reparametrize(&reparametrize(&h, &phi)?, &phi.inverse())?;
    println!("reparametrize round trip {:.2e}", (back - h).amax());
    Ok(())
}
