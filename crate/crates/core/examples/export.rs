//! Write a geodesic as CSV, JSON and an SVG strip of snapshots.

use std::path::PathBuf;

use fracsob::solver::exp_map;
use fracsob::{io, shapes, DiscreteCurve, LambdaSymbol, MetricConfig};

fn main() -> fracsob::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fracsob-export".into()));
    std::fs::create_dir_all(&out)?;
    let n = 64;
    let c0 = DiscreteCurve::new(shapes::circle(n, 1.0))?;
    // squeeze the circle along x
    let h0 = fracsob::TangentField::from_fn(n, 2, |t| vec![-0.4 * t.cos(), 0.0]).into_values();
    let cfg = MetricConfig::new(LambdaSymbol::bessel(1.5, 1.0, 2)?)?;
    let path = exp_map(&cfg, &c0, &h0, 1.0, 40)?;

    io::write_curve(&out.join("start.json"), &path.start().curve)?;
    std::fs::write(out.join("path.csv"), io::path_to_csv(&path))?;
    io::write_json(&out.join("path.json"), &io::path_to_json(&path))?;
    std::fs::write(out.join("path.svg"), io::path_to_svg(&path, 10))?;
    println!("wrote {} frames to {}", path.frames().len(), out.display());
    Ok(())
}
