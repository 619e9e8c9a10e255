//! Occupancy-grid geometry: world/cell transforms and conservative
//! path rasterization.
//!
//! Cells own the half-open square `[lo, hi)` on both axes, so a point on a
//! shared boundary belongs to exactly one cell. Rasterization is a supercover
//! traversal: every cell the polyline touches is returned, including cells
//! clipped at an exact corner crossing. The risk integral along a path must
//! not skip corner-clipped hazardous cells, so the conservative cover is used
//! instead of a thin Bresenham line.

use crate::error::{Error, Result};
use crate::geometry::Point2;
use serde::{Deserialize, Serialize};

/// Geometry of a regular grid: world origin of cell (0, 0), cell edge length,
/// and cell counts per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Point2,
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    /// Panics if `cell_size <= 0` or either dimension is zero; configuration
    /// loading validates these with friendly errors before construction.
    pub fn new(origin: Point2, cell_size: f64, width: usize, height: usize) -> Self {
        assert!(cell_size > 0.0, "cell_size must be > 0");
        assert!(width >= 1 && height >= 1, "grid must have at least one cell");
        Self { origin, cell_size, width, height }
    }

    /// Area of one cell in m^2. This is the `delta a` of the collision
    /// probability integral.
    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn contains(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height
    }

    /// Row-major storage index.
    pub fn storage_index(&self, c: CellIndex) -> usize {
        c.row * self.width + c.col
    }

    /// Maps a world point to the cell owning it under the half-open
    /// convention.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Result<CellIndex> {
        let col = ((x - self.origin.x) / self.cell_size).floor();
        let row = ((y - self.origin.y) / self.cell_size).floor();
        if !col.is_finite() || !row.is_finite() || !self.contains(col as i64, row as i64) {
            return Err(Error::OutOfGrid { x, y });
        }
        Ok(CellIndex::new(col as usize, row as usize))
    }

    /// World coordinates of a cell's center.
    pub fn cell_center(&self, c: CellIndex) -> Result<Point2> {
        if !self.contains(c.col as i64, c.row as i64) {
            return Err(Error::CellOutOfGrid { col: c.col as i64, row: c.row as i64 });
        }
        Ok(Point2::new(
            self.origin.x + (c.col as f64 + 0.5) * self.cell_size,
            self.origin.y + (c.row as f64 + 0.5) * self.cell_size,
        ))
    }
}

/// Column/row address of a cell. Columns advance with world x, rows with y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub col: usize,
    pub row: usize,
}

impl CellIndex {
    pub fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

/// Supercover traversal of one segment. Returns cells in entry order paired
/// with the world point where the segment first touches each cell; the start
/// cell's entry point is `a` itself. At an exact corner crossing the two cells
/// sharing the corner laterally are emitted (x-neighbor first) before the
/// diagonal move.
pub(crate) fn traverse_segment(
    spec: &GridSpec,
    a: Point2,
    b: Point2,
) -> Result<Vec<(CellIndex, Point2)>> {
    let start = spec.world_to_cell(a.x, a.y)?;
    let end = spec.world_to_cell(b.x, b.y)?;
    let mut out = vec![(start, a)];
    if start == end {
        return Ok(out);
    }

    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let cs = spec.cell_size;
    let point_at = |t: f64| {
        let t = t.clamp(0.0, 1.0);
        Point2::new(a.x + t * dx, a.y + t * dy)
    };

    let mut col = start.col as i64;
    let mut row = start.row as i64;
    let step_c: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_r: i64 = if dy > 0.0 { 1 } else { -1 };

    // Parameter values at which the segment crosses the next cell boundary on
    // each axis, and the per-cell parameter increment.
    let mut t_max_x = if dx != 0.0 {
        let next = spec.origin.x + (col + i64::max(step_c, 0)) as f64 * cs;
        (next - a.x) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy != 0.0 {
        let next = spec.origin.y + (row + i64::max(step_r, 0)) as f64 * cs;
        (next - a.y) / dy
    } else {
        f64::INFINITY
    };
    let t_delta_x = if dx != 0.0 { cs / dx.abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { cs / dy.abs() } else { f64::INFINITY };

    // Both endpoints are in bounds, so the walk stays inside their bounding
    // box; the guard only protects against pathological float behavior.
    let mut guard = 2 * (spec.width + spec.height) + 8;
    while (col, row) != (end.col as i64, end.row as i64) {
        if guard == 0 {
            break;
        }
        guard -= 1;
        if t_max_x < t_max_y {
            let t = t_max_x;
            col += step_c;
            t_max_x += t_delta_x;
            out.push((CellIndex::new(col as usize, row as usize), point_at(t)));
        } else if t_max_y < t_max_x {
            let t = t_max_y;
            row += step_r;
            t_max_y += t_delta_y;
            out.push((CellIndex::new(col as usize, row as usize), point_at(t)));
        } else {
            // Exact corner crossing: the segment touches the two cells that
            // share the corner laterally as well as the diagonal cell.
            let t = t_max_x;
            let p = point_at(t);
            let side_x = (col + step_c, row);
            let side_y = (col, row + step_r);
            if spec.contains(side_x.0, side_x.1) {
                out.push((CellIndex::new(side_x.0 as usize, side_x.1 as usize), p));
            }
            if spec.contains(side_y.0, side_y.1) {
                out.push((CellIndex::new(side_y.0 as usize, side_y.1 as usize), p));
            }
            col += step_c;
            row += step_r;
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
            out.push((CellIndex::new(col as usize, row as usize), p));
        }
    }
    Ok(out)
}

/// Rasterizes a polyline into the ordered list of cells it touches.
///
/// Consecutive duplicates are removed; a cell revisited later in the path
/// appears again. Errors with [`Error::OutOfGrid`] if any vertex leaves the
/// grid extent.
pub fn raster_path(spec: &GridSpec, polyline: &[Point2]) -> Result<Vec<CellIndex>> {
    let mut out: Vec<CellIndex> = Vec::new();
    if polyline.is_empty() {
        return Ok(out);
    }
    if polyline.len() == 1 {
        out.push(spec.world_to_cell(polyline[0].x, polyline[0].y)?);
        return Ok(out);
    }
    for pair in polyline.windows(2) {
        for (c, _) in traverse_segment(spec, pair[0], pair[1])? {
            if out.last() != Some(&c) {
                out.push(c);
            }
        }
    }
    Ok(out)
}

/// Cells under the axle line: the segment of length `track_width` centred on
/// `(x, y)`, perpendicular to `heading`. Used to look up the worst elevation
/// step the wheels straddle at a pose.
pub fn transverse_cells(
    spec: &GridSpec,
    x: f64,
    y: f64,
    heading: f64,
    track_width: f64,
) -> Result<Vec<CellIndex>> {
    let half = 0.5 * track_width;
    let nx = -heading.sin();
    let ny = heading.cos();
    let a = Point2::new(x - half * nx, y - half * ny);
    let b = Point2::new(x + half * nx, y + half * ny);
    raster_path(spec, &[a, b])
}
