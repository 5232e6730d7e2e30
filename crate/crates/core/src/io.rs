//! Field files and number formatting.
//!
//! Field CSVs carry one row per cell in storage order with header
//! `theta_index,r_index,ux,uy` on the disk and `i,j,ux,uy` on the torus.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{Grid, Trace, VectorField};

/// 17 significant digits; parsing the output recovers the value bit for bit.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(grid: &Grid) -> &'static str {
    if grid.is_disk() {
        "theta_index,r_index,ux,uy"
    } else {
        "i,j,ux,uy"
    }
}

pub fn write_field(u: &VectorField, mut w: impl Write) -> Result<()> {
    let g = u.grid();
    let na = g.n_angular();
    writeln!(w, "{}", header(g))?;
    for (idx, (x, y)) in u.x().iter().zip(u.y()).enumerate() {
        writeln!(w, "{},{},{},{}", idx % na, idx / na, fmt17(*x), fmt17(*y))?;
    }
    Ok(())
}

pub fn write_field_file(u: &VectorField, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_field(u, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Reads a field written for exactly this grid. No interpolation is done:
/// a file from another resolution is rejected.
pub fn read_field(grid: &Arc<Grid>, r: impl Read, trace: Trace) -> Result<VectorField> {
    let na = grid.n_angular();
    let n = grid.cell_count();
    let mut lines = BufReader::new(r).lines();
    let head = lines.next().transpose()?.unwrap_or_default();
    if head.trim() != header(grid) {
        return Err(Error::FieldFile(format!("expected header `{}`, found `{}`", header(grid), head.trim())));
    }
    let (mut x, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if row >= n {
            return Err(Error::FieldFile(format!("more than {n} data rows; grid mismatch")));
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(Error::FieldFile(format!("row {}: expected 4 columns, found {}", row + 1, cols.len())));
        }
        let parse_i = |s: &str| s.parse::<usize>().map_err(|e| Error::FieldFile(format!("row {}: {e}", row + 1)));
        let parse_f = |s: &str| s.parse::<f64>().map_err(|e| Error::FieldFile(format!("row {}: {e}", row + 1)));
        let (a, b) = (parse_i(cols[0])?, parse_i(cols[1])?);
        if a != row % na || b != row / na {
            return Err(Error::FieldFile(format!(
                "row {}: index ({a}, {b}) out of order or outside a {na}x{} grid",
                row + 1,
                n / na
            )));
        }
        x.push(parse_f(cols[2])?);
        y.push(parse_f(cols[3])?);
    }
    if x.len() != n {
        return Err(Error::FieldFile(format!("truncated field file: {} of {n} rows", x.len())));
    }
    let u = VectorField::from_components(grid, x, y, trace)?;
    if !u.is_finite() {
        return Err(Error::NonFinite("field file values".into()));
    }
    Ok(u)
}

pub fn read_field_file(grid: &Arc<Grid>, path: &Path, trace: Trace) -> Result<VectorField> {
    let f = std::fs::File::open(path).map_err(|e| Error::FieldFile(format!("{}: {e}", path.display())))?;
    read_field(grid, f, trace)
}
