//! Digital elevation map built from range-sensor returns.
//!
//! Each cell keeps the highest z seen so far: for ground-risk purposes the
//! tallest structure in a cell is what a wheel would hit, and the running max
//! is insensitive to point density. Hazard classification thresholds the
//! largest elevation step to any observed 8-neighbor.

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::grid::{CellIndex, GridSpec};
use std::io::Write;

/// Per-cell elevation state. `z` is meaningless until `n_points > 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ElevationCell {
    pub z: f64,
    pub n_points: u32,
}

impl ElevationCell {
    pub fn observed(&self) -> bool {
        self.n_points > 0
    }
}

/// Hazard classification of a cell relative to the safe step height.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Safe,
    Hazardous,
}

/// Grid of [`ElevationCell`]s with max-aggregation updates.
#[derive(Debug, Clone)]
pub struct ElevationMap {
    spec: GridSpec,
    cells: Vec<ElevationCell>,
}

impl ElevationMap {
    pub fn new(spec: GridSpec) -> Self {
        let cells = vec![ElevationCell::default(); spec.width * spec.height];
        Self { spec, cells }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn cell(&self, c: CellIndex) -> Result<&ElevationCell> {
        if !self.spec.contains(c.col as i64, c.row as i64) {
            return Err(Error::CellOutOfGrid { col: c.col as i64, row: c.row as i64 });
        }
        Ok(&self.cells[self.spec.storage_index(c)])
    }

    /// Folds a point cloud into the map. Points outside the grid extent are
    /// skipped silently; in-bounds points raise the cell's max and its count.
    pub fn integrate_cloud(&mut self, points: &[Point3]) {
        for p in points {
            let Ok(c) = self.spec.world_to_cell(p.x, p.y) else {
                continue;
            };
            let cell = &mut self.cells[self.spec.storage_index(c)];
            cell.z = if cell.observed() { cell.z.max(p.z) } else { p.z };
            cell.n_points = cell.n_points.saturating_add(1);
        }
    }

    /// Largest elevation step from `c` to any observed 8-neighbor, 0 if no
    /// neighbor has data yet. Errors if `c` itself is unobserved.
    pub fn elevation_diff(&self, c: CellIndex) -> Result<f64> {
        let center = self.cell(c)?;
        if !center.observed() {
            return Err(Error::UnobservedCell { col: c.col, row: c.row });
        }
        let mut diff = 0.0f64;
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (col, row) = (c.col as i64 + dc, c.row as i64 + dr);
                if !self.spec.contains(col, row) {
                    continue;
                }
                let n = &self.cells[row as usize * self.spec.width + col as usize];
                if n.observed() {
                    diff = diff.max((center.z - n.z).abs());
                }
            }
        }
        Ok(diff)
    }

    /// A cell is hazardous when its elevation step reaches `h_safe`; the tie
    /// goes to hazardous.
    pub fn classify(&self, c: CellIndex, h_safe: f64) -> Result<Classification> {
        if self.elevation_diff(c)? >= h_safe {
            Ok(Classification::Hazardous)
        } else {
            Ok(Classification::Safe)
        }
    }

    /// Writes `col,row,z,n_points,observed` rows for every cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "col,row,z,n_points,observed")?;
        for row in 0..self.spec.height {
            for col in 0..self.spec.width {
                let cell = self.cells[row * self.spec.width + col];
                writeln!(w, "{},{},{},{},{}", col, row, cell.z, cell.n_points, cell.observed())?;
            }
        }
        Ok(())
    }
}
