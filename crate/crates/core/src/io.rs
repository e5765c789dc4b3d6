//! Curve files, path exports and SVG snapshots.
//!
//! Curves are exchanged as `{"d": 2, "samples": [[x, y], ...]}` in θ-order, one period.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::solver::GeodesicPath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveFile {
    pub d: usize,
    pub samples: Vec<Vec<f64>>,
}

impl CurveFile {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self { d: m.ncols(), samples: m.row_iter().map(|r| r.iter().copied().collect()).collect() }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.d == 0 {
            return Err(Error::Config("d: must be positive".into()));
        }
        if let Some(k) = self.samples.iter().position(|r| r.len() != self.d) {
            return Err(Error::Config(format!(
                "samples: row {k} has {} entries, expected d = {}",
                self.samples[k].len(),
                self.d
            )));
        }
        Ok(DMatrix::from_fn(self.samples.len(), self.d, |k, j| self.samples[k][j]))
    }
}

/// Parses a curve (or tangent field) from its JSON text.
pub fn curve_from_json(text: &str) -> Result<DMatrix<f64>> {
    serde_json::from_str::<CurveFile>(text)?.to_matrix()
}

pub fn curve_to_json(m: &DMatrix<f64>) -> String {
    serde_json::to_string(&CurveFile::from_matrix(m)).expect("curve serializes")
}

pub fn read_curve(path: &Path) -> Result<DMatrix<f64>> {
    curve_from_json(&fs::read_to_string(path)?)
}

pub fn write_curve(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    Ok(fs::write(path, curve_to_json(m))?)
}

/// One row per frame and sample: `t, k, x_1..x_d, v_1..v_d` (velocity columns empty when absent).
pub fn path_to_csv(path: &GeodesicPath) -> String {
    let d = path.start().curve.ncols();
    let mut out = String::from("t,k");
    for j in 1..=d {
        write!(out, ",x{j}").unwrap();
    }
    for j in 1..=d {
        write!(out, ",v{j}").unwrap();
    }
    out.push('\n');
    for f in path.frames() {
        for k in 0..f.curve.nrows() {
            write!(out, "{:?},{k}", f.t).unwrap();
            for j in 0..d {
                write!(out, ",{:?}", f.curve[(k, j)]).unwrap();
            }
            for j in 0..d {
                match &f.velocity {
                    Some(v) => write!(out, ",{:?}", v[(k, j)]).unwrap(),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Frame list with curve, velocity and momentum samples.
pub fn path_to_json(path: &GeodesicPath) -> serde_json::Value {
    let rows = |m: &DMatrix<f64>| CurveFile::from_matrix(m).samples;
    let frames: Vec<_> = path
        .frames()
        .iter()
        .map(|f| {
            json!({
                "t": f.t,
                "curve": rows(&f.curve),
                "velocity": f.velocity.as_ref().map(rows),
                "momentum": f.momentum.as_ref().map(rows),
            })
        })
        .collect();
    json!({
        "n": path.start().curve.nrows(),
        "d": path.start().curve.ncols(),
        "symbol": {
            "family": path.config().symbol().family(),
            "order": path.config().symbol().order(),
            "alphas": path.config().symbol().alphas(),
        },
        "settings": path.settings(),
        "frames": frames,
    })
}

/// Polylines of the first two coordinates of every `stride`-th frame (and the last).
pub fn path_to_svg(path: &GeodesicPath, stride: usize) -> String {
    let frames = path.frames();
    let stride = stride.max(1);
    let chosen: Vec<_> = frames
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i + 1 == frames.len())
        .map(|(_, f)| &f.curve)
        .collect();
    curves_to_svg(&chosen)
}

/// Closed polylines in a shared viewBox; colour runs from blue (first) to red (last).
pub fn curves_to_svg(curves: &[&DMatrix<f64>]) -> String {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for c in curves {
        for k in 0..c.nrows() {
            for j in 0..2.min(c.ncols()) {
                lo[j] = lo[j].min(c[(k, j)]);
                hi[j] = hi[j].max(c[(k, j)]);
            }
        }
    }
    if !lo[0].is_finite() {
        lo = [0.0; 2];
        hi = [1.0; 2];
    }
    let pad = 0.05 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let (w, h) = (hi[0] - lo[0] + 2.0 * pad, hi[1] - lo[1] + 2.0 * pad);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {w} {h}\">\n",
        lo[0] - pad,
        -hi[1] - pad
    );
    let stroke = 0.004 * w.max(h);
    for (i, c) in curves.iter().enumerate() {
        let s = if curves.len() > 1 { i as f64 / (curves.len() - 1) as f64 } else { 0.0 };
        let colour = format!("rgb({},{},{})", (255.0 * s) as u8, 40, (255.0 * (1.0 - s)) as u8);
        let mut points = String::new();
        for k in 0..c.nrows() {
            let y = if c.ncols() > 1 { c[(k, 1)] } else { 0.0 };
            write!(points, "{},{} ", c[(k, 0)], -y).unwrap();
        }
        writeln!(
            out,
            "  <polygon points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"{stroke}\"/>",
            points.trim_end()
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    Ok(fs::write(path, serde_json::to_string_pretty(value)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn curve_json_round_trip_is_exact() {
        let c = shapes::ellipse(37, std::f64::consts::PI, 1.0 / 3.0);
        let back = curve_from_json(&curve_to_json(&c)).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let r = curve_from_json(r#"{"d": 2, "samples": [[0, 1], [1]]}"#);
        assert!(matches!(r, Err(Error::Config(msg)) if msg.contains("samples")));
    }

    #[test]
    fn svg_has_one_polygon_per_curve() {
        let a = shapes::circle(8, 1.0);
        let b = shapes::circle(8, 2.0);
        assert_eq!(curves_to_svg(&[&a, &b]).matches("<polygon").count(), 2);
    }
}
