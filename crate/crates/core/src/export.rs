//! Text serializations of results. Every writer is deterministic: the same
//! input gives the same bytes.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Boundary;

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// `x,y,nx,ny` rows, shortest round-trip formatting.
pub fn boundary_csv(boundary: &Boundary) -> String {
    let mut s = String::from("x,y,nx,ny\n");
    for (p, n) in boundary.points.iter().zip(&boundary.normals) {
        let _ = writeln!(s, "{},{},{},{}", p[0], p[1], n[0], n[1]);
    }
    s
}

pub const SVG_SIZE: f64 = 1000.0;
pub const SVG_MARGIN: f64 = 0.05;

/// Closed path on a 1000×1000 canvas, scaled uniformly to fit inside a 5%
/// margin and centred; `y` points up in model coordinates.
pub fn boundary_svg(boundary: &Boundary) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &boundary.points {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let inner = SVG_SIZE * (1.0 - 2.0 * SVG_MARGIN);
    let span = (x1 - x0).max(y1 - y0);
    let scale = if span > 0.0 { inner / span } else { 1.0 };
    let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let mut path = String::new();
    for (k, p) in boundary.points.iter().enumerate() {
        let sx = 0.5 * SVG_SIZE + scale * (p[0] - cx);
        let sy = 0.5 * SVG_SIZE - scale * (p[1] - cy);
        let _ = write!(path, "{}{sx:.3},{sy:.3} ", if k == 0 { "M" } else { "L" });
    }
    path.push('Z');
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {s} {s}\" width=\"{s}\" height=\"{s}\">\n\
         <path d=\"{path}\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n</svg>\n",
        s = SVG_SIZE as u32
    )
}

/// Two-column CSV with the given header.
pub fn pairs_csv(header: [&str; 2], rows: &[(f64, f64)]) -> String {
    let mut s = format!("{},{}\n", header[0], header[1]);
    for (a, b) in rows {
        let _ = writeln!(s, "{a},{b}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::circle;

    #[test]
    fn csv_header_and_rows() {
        let b = circle([0.0, 0.0], 1.0, 4);
        let csv = boundary_csv(&b);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,y,nx,ny");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "1,0,1,0");
    }

    #[test]
    fn svg_fits_margin() {
        let b = circle([3.0, -2.0], 0.5, 64);
        let svg = boundary_svg(&b);
        assert!(svg.starts_with("<svg") && svg.contains("viewBox=\"0 0 1000 1000\""));
        let d = svg.split("d=\"").nth(1).unwrap().split('"').next().unwrap();
        let coords: Vec<f64> = d
            .split(|c: char| c == ' ' || c == ',' || c == 'M' || c == 'L' || c == 'Z')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse().unwrap())
            .collect();
        let max = coords.iter().cloned().fold(f64::MIN, f64::max);
        let min = coords.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - 950.0).abs() < 1e-3 && (min - 50.0).abs() < 1e-3);
    }

    #[test]
    fn pairs() {
        assert_eq!(pairs_csv(["lambda", "H"], &[(1.5, -2.0)]), "lambda,H\n1.5,-2\n");
    }
}
