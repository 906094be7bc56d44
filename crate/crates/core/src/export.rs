//! CSV tables, compact binary snapshots of periodic fields, and simple SVG
//! line plots.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::dispersal::Grid;
use crate::error::{Error, Result};
use crate::periodic_orbits::PeriodicOrbit;
use crate::semitrivial::PeriodicField;

const SNAPSHOT_MAGIC: &[u8; 8] = b"SPLFLD01";

/// CSV with a header line; floats written with full round-trip precision.
pub fn csv_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn orbit_csv(orbit: &PeriodicOrbit) -> String {
    let rows: Vec<Vec<f64>> = orbit.times().into_iter().zip(orbit.values()).map(|(t, v)| vec![t, *v]).collect();
    csv_table(&["t", "value"], &rows)
}

/// Long format `(t, x, value)`, every `stride`-th time step.
pub fn periodic_field_csv(field: &PeriodicField, stride: usize) -> String {
    let xs = field.grid().points();
    let mut rows = Vec::new();
    for k in (0..field.steps_per_period()).step_by(stride.max(1)) {
        let t = k as f64 * field.dt();
        for (x, v) in xs.iter().zip(field.at_step(k)) {
            rows.push(vec![t, *x, *v]);
        }
    }
    csv_table(&["t", "x", "value"], &rows)
}

/// `(x, value)` of one profile.
pub fn profile_csv(grid: &Grid, values: &[f64]) -> String {
    let rows: Vec<Vec<f64>> = grid.points().into_iter().zip(values).map(|(x, v)| vec![x, *v]).collect();
    csv_table(&["x", "value"], &rows)
}

pub fn pairs_csv(header: [&str; 2], pairs: &[(f64, f64)]) -> String {
    let rows: Vec<Vec<f64>> = pairs.iter().map(|&(a, b)| vec![a, b]).collect();
    csv_table(&header, &rows)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// Little-endian binary snapshot: magic, period, grid, samples, residual, data.
pub fn write_snapshot<W: Write>(field: &PeriodicField, mut w: W) -> Result<()> {
    let g = field.grid();
    w.write_all(SNAPSHOT_MAGIC)?;
    for v in [field.period(), g.x_min(), g.x_max(), field.residual] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(g.len() as u64).to_le_bytes())?;
    w.write_all(&(field.steps_per_period() as u64).to_le_bytes())?;
    for s in field.samples() {
        for v in s {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<PeriodicField> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::input("not a periodic-field snapshot"));
    }
    let mut buf = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8]> {
        r.read_exact(&mut buf)?;
        Ok(buf)
    };
    let period = f64::from_le_bytes(next(&mut r)?);
    let x_min = f64::from_le_bytes(next(&mut r)?);
    let x_max = f64::from_le_bytes(next(&mut r)?);
    let residual = f64::from_le_bytes(next(&mut r)?);
    let n = u64::from_le_bytes(next(&mut r)?) as usize;
    let steps = u64::from_le_bytes(next(&mut r)?) as usize;
    let grid = Grid::new(x_min, x_max, n)?;
    let mut samples = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut s = Vec::with_capacity(n);
        for _ in 0..n {
            s.push(f64::from_le_bytes(next(&mut r)?));
        }
        samples.push(s);
    }
    PeriodicField::new(period, grid, samples, residual)
}

/// One polyline per series on shared axes.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[(&str, &[(f64, f64)])]) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let pts = series.iter().flat_map(|(_, s)| s.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        out,
        r#"<path d="M{pad} {pad} V{} H{}" stroke="black" fill="none"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, w / 2.0, h - 10.0);
    let _ = writeln!(out, r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">{y_label}</text>"#, h / 2.0, h / 2.0);
    let _ = writeln!(out, r#"<text x="{pad}" y="{}" font-size="10">{x0:.3}</text>"#, h - pad + 14.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{x1:.3}</text>"#, w - pad, h - pad + 14.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{y0:.3}</text>"#, pad - 4.0, h - pad);
    let _ = writeln!(out, r#"<text x="{}" y="{pad}" font-size="10" text-anchor="end">{y1:.3}</text>"#, pad - 4.0);
    for (i, (name, s)) in series.iter().enumerate() {
        let color = colors[i % colors.len()];
        let mut d = String::new();
        for (k, &(x, y)) in s.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).enumerate() {
            let _ = write!(d, "{}{:.2} {:.2} ", if k == 0 { "M" } else { "L" }, sx(x), sy(y));
        }
        let _ = writeln!(out, r#"<path d="{}" stroke="{color}" fill="none"/>"#, d.trim_end());
        let _ = writeln!(out, r#"<text x="{}" y="{}" fill="{color}" font-size="12">{name}</text>"#, w - pad - 100.0, pad + 14.0 * i as f64);
    }
    out.push_str("</svg>\n");
    out
}
