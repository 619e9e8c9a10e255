//! Severity-weighted collision-intensity field.
//!
//! Each cell accumulates counts of safe (`s`) and hazardous (`h`)
//! observations and carries an intensity
//! `lambda = (1/e) * ln(1 + h/s) * p` in m^-2, where `e` is the error-region
//! area and `p` the severity weight derived from the local elevation step.
//! The probability of hitting at least one hazard along a run of cells is
//! `1 - exp(-da * sum(lambda))` with `da` the cell area.

use crate::dem::{Classification, ElevationMap};
use crate::error::{Error, Result};
use crate::grid::{CellIndex, GridSpec};
use std::io::{BufRead, Write};

/// Virtual safe-observation count used while a cell has only hazardous
/// evidence; keeps the intensity finite and growing in `h`.
const SATURATION_S: f64 = 0.5;

/// Per-cell evidence counts and derived intensity.
#[derive(Debug, Clone, Copy, Default)]
pub struct LambdaCell {
    /// Safe observation count.
    pub s: u32,
    /// Hazardous observation count.
    pub h: u32,
    /// Severity weight from the latest observation, in [0, 1].
    pub p: f64,
    /// Collision intensity in m^-2.
    pub lambda: f64,
}

/// Severity of an elevation step `h` for a wheel of radius `r`:
/// `min(|h|/r, 1)`. A step at or above the wheel radius is a full stop.
pub fn severity(h: f64, wheel_radius: f64) -> Result<f64> {
    if wheel_radius <= 0.0 {
        return Err(Error::NonPositiveRadius(wheel_radius));
    }
    Ok((h.abs() / wheel_radius).min(1.0))
}

/// Intensity formula. Zero whenever there is no hazardous evidence or no
/// severity; the saturation count stands in for `s` when `s = 0`.
fn intensity(s: u32, h: u32, p: f64, e: f64) -> f64 {
    if h == 0 || p == 0.0 {
        return 0.0;
    }
    let s_eff = if s == 0 { SATURATION_S } else { s as f64 };
    (1.0 + h as f64 / s_eff).ln() * p / e
}

/// Grid of [`LambdaCell`]s.
#[derive(Debug, Clone)]
pub struct LambdaField {
    spec: GridSpec,
    e: f64,
    cells: Vec<LambdaCell>,
}

impl LambdaField {
    /// `e` is the error-region area in m^2 and must be positive.
    pub fn new(spec: GridSpec, e: f64) -> Self {
        assert!(e > 0.0, "error-region area must be > 0");
        let cells = vec![LambdaCell::default(); spec.width * spec.height];
        Self { spec, e, cells }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn error_region_area(&self) -> f64 {
        self.e
    }

    pub fn cell(&self, c: CellIndex) -> Result<&LambdaCell> {
        if !self.spec.contains(c.col as i64, c.row as i64) {
            return Err(Error::CellOutOfGrid { col: c.col as i64, row: c.row as i64 });
        }
        Ok(&self.cells[self.spec.storage_index(c)])
    }

    /// Iterates cells in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (CellIndex, &LambdaCell)> {
        let width = self.spec.width;
        self.cells
            .iter()
            .enumerate()
            .map(move |(i, cell)| (CellIndex::new(i % width, i / width), cell))
    }

    /// Records one observation of cell `c`: bumps the matching count, stores
    /// the severity of the latest measured step `h`, and recomputes lambda.
    pub fn observe(
        &mut self,
        c: CellIndex,
        outcome: Classification,
        h: f64,
        wheel_radius: f64,
    ) -> Result<()> {
        let p = severity(h, wheel_radius)?;
        if !self.spec.contains(c.col as i64, c.row as i64) {
            return Err(Error::CellOutOfGrid { col: c.col as i64, row: c.row as i64 });
        }
        let idx = self.spec.storage_index(c);
        let cell = &mut self.cells[idx];
        match outcome {
            Classification::Safe => cell.s = cell.s.saturating_add(1),
            Classification::Hazardous => cell.h = cell.h.saturating_add(1),
        }
        cell.p = p;
        cell.lambda = intensity(cell.s, cell.h, cell.p, self.e);
        Ok(())
    }

    /// Probability of at least one collision when traversing `cells` in any
    /// order: `1 - exp(-da * sum(lambda))`.
    pub fn collision_probability(&self, cells: &[CellIndex]) -> Result<f64> {
        let mut sum = 0.0;
        for &c in cells {
            sum += self.cell(c)?.lambda;
        }
        Ok(1.0 - (-self.spec.cell_area() * sum).exp())
    }

    /// Classifies and observes every cell touched by one scan. Touched cells
    /// must already carry elevation data from the same scan's integration.
    pub fn ingest_scan(
        &mut self,
        dem: &ElevationMap,
        touched: &[CellIndex],
        h_safe: f64,
        wheel_radius: f64,
    ) -> Result<()> {
        for &c in touched {
            let outcome = dem.classify(c, h_safe)?;
            let h = dem.elevation_diff(c)?;
            self.observe(c, outcome, h, wheel_radius)?;
        }
        Ok(())
    }

    /// Writes `col,row,s,h,p,lambda` rows for every cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "col,row,s,h,p,lambda")?;
        for row in 0..self.spec.height {
            for col in 0..self.spec.width {
                let cell = self.cells[row * self.spec.width + col];
                writeln!(w, "{},{},{},{},{},{}", col, row, cell.s, cell.h, cell.p, cell.lambda)?;
            }
        }
        Ok(())
    }

    /// Reads a dump produced by [`write_csv`](Self::write_csv). Counts load
    /// exactly; lambda is recomputed from the counts and severity and must
    /// agree with the stored value to 1e-9 relative.
    pub fn load_csv<R: BufRead>(spec: GridSpec, e: f64, r: R) -> Result<Self> {
        let mut field = Self::new(spec, e);
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Dump("empty lambda-field file".into()))??;
        if header.trim() != "col,row,s,h,p,lambda" {
            return Err(Error::Dump(format!("unexpected header {header:?}")));
        }
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::Dump(format!("line {}: expected 6 columns", n + 2)));
            }
            let parse = |what: &str, s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Dump(format!("line {}: bad {what} {s:?}", n + 2)))
            };
            let col = parse("col", fields[0])? as usize;
            let row = parse("row", fields[1])? as usize;
            if !spec.contains(col as i64, row as i64) {
                return Err(Error::Dump(format!("line {}: cell ({col}, {row}) out of grid", n + 2)));
            }
            let s_count = parse("s", fields[2])? as u32;
            let h_count = parse("h", fields[3])? as u32;
            let p = parse("p", fields[4])?;
            let lambda = parse("lambda", fields[5])?;
            let want = intensity(s_count, h_count, p, e);
            let tol = 1e-9 * want.abs().max(1.0);
            if (lambda - want).abs() > tol {
                return Err(Error::Dump(format!(
                    "line {}: lambda {lambda} disagrees with recomputed {want}",
                    n + 2
                )));
            }
            let idx = spec.storage_index(CellIndex::new(col, row));
            field.cells[idx] = LambdaCell { s: s_count, h: h_count, p, lambda: want };
        }
        Ok(field)
    }
}
