//! Expected wheel-compression energy along a path.
//!
//! The wheel is a linear spring: hitting a step at speed `v` with attack
//! angle `psi` stores `r = 0.5 * k_r * l_m^2` with maximum compression
//! `l_m = v * cos(psi) / omega`, `omega = sqrt(k_r / m)`. Algebraically
//! `r = 0.5 * m * v^2 * cos(psi)^2`, the kinetic energy projected onto the
//! impact direction. The expectation over a path weights the energy at each
//! cell by the probability that the first collision happens there.

use crate::dem::ElevationMap;
use crate::error::Result;
use crate::geometry::Point2;
use crate::grid::{self, CellIndex};
use crate::lambda_field::LambdaField;
use crate::planner::Trajectory;
use std::io::Write;

/// Wheel spring parameters. All three are strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelModel {
    /// Wheel radius R in m.
    pub radius: f64,
    /// Spring stiffness k_r in N/m.
    pub stiffness: f64,
    /// Robot mass m in kg.
    pub mass: f64,
}

impl WheelModel {
    pub fn new(radius: f64, stiffness: f64, mass: f64) -> Self {
        assert!(radius > 0.0, "wheel radius must be > 0");
        assert!(stiffness > 0.0, "spring stiffness must be > 0");
        assert!(mass > 0.0, "mass must be > 0");
        Self { radius, stiffness, mass }
    }

    /// Natural pulsation of the spring-mass system, rad/s.
    pub fn omega(&self) -> f64 {
        (self.stiffness / self.mass).sqrt()
    }
}

/// Attack angle of a step of height `h` against a wheel of radius `r`:
/// `psi = arcsin((r - min(h, r)) / r)`. Flat ground gives pi/2 (the wheel
/// rolls over, nothing is hit head-on); a step at or above the radius gives 0
/// (full frontal impact).
pub fn attack_angle(h: f64, wheel_radius: f64) -> Result<f64> {
    if wheel_radius <= 0.0 {
        return Err(crate::error::Error::NonPositiveRadius(wheel_radius));
    }
    let h = h.abs().min(wheel_radius);
    Ok(((wheel_radius - h) / wheel_radius).asin())
}

/// Maximum spring compression when hitting at speed `v` and attack angle
/// `psi`: the impact velocity `v * cos(psi)` swings the spring to amplitude
/// `v * cos(psi) / omega`.
pub fn max_compression(v: f64, psi: f64, wheel: &WheelModel) -> f64 {
    v * psi.cos() / wheel.omega()
}

/// Energy stored at maximum compression for a hit on a step of height `h`.
/// With u = min(|h|, R) / R, cos^2(psi) = 1 - (1 - u)^2 = u * (2 - u); the
/// product form is exactly zero on flat ground and keeps full precision for
/// shallow steps, where squaring sin(psi) ~ 1 first would cancel.
pub fn collision_energy(v: f64, h: f64, wheel: &WheelModel) -> f64 {
    let u = h.abs().min(wheel.radius) / wheel.radius;
    let cos_sq = u * (2.0 - u);
    let l_sq = v * v * cos_sq / (wheel.stiffness / wheel.mass);
    0.5 * wheel.stiffness * l_sq
}

/// First-collision probabilities along an ordered cell sequence:
/// `K_i = exp(-da * sum_{j<i} lambda_j) * (1 - exp(-da * lambda_i))`.
/// The sum over i telescopes to the collision probability of the whole run.
pub fn event_probabilities(field: &LambdaField, cells: &[CellIndex]) -> Result<Vec<f64>> {
    let da = field.spec().cell_area();
    let mut cumulative = 0.0;
    let mut out = Vec::with_capacity(cells.len());
    for &c in cells {
        let lambda = field.cell(c)?.lambda;
        let k = (-da * cumulative).exp() * (1.0 - (-da * lambda).exp());
        cumulative += lambda;
        out.push(k);
    }
    Ok(out)
}

/// Per-cell breakdown of the expected risk of one trajectory.
#[derive(Debug, Clone, Copy)]
pub struct RiskStep {
    pub cell: CellIndex,
    /// Commanded speed on the segment that entered the cell.
    pub v: f64,
    /// Worst elevation step under the transverse axle line at entry.
    pub h: f64,
    pub psi: f64,
    /// Probability that the first collision of the run happens here.
    pub event_probability: f64,
    /// Energy of a collision here, J.
    pub energy: f64,
}

/// Expected compression energy along a trajectory, with the per-cell terms.
#[derive(Debug, Clone)]
pub struct RiskProfile {
    pub steps: Vec<RiskStep>,
    /// `sum(K_i * r_i)` in J.
    pub expected_risk: f64,
}

impl RiskProfile {
    /// Writes `step,col,row,v,H,psi,K,r` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,col,row,v,H,psi,K,r")?;
        for (i, s) in self.steps.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                i, s.cell.col, s.cell.row, s.v, s.h, s.psi, s.event_probability, s.energy
            )?;
        }
        Ok(())
    }
}

/// Expected compression energy of driving `traj`.
///
/// The trajectory's (x, y) polyline is rasterized with the supercover rule;
/// each cell takes the commanded speed of the segment that entered it and the
/// worst elevation step under the axle line at the entry point. Risk comes
/// only from mapped evidence: unobserved elevation cells contribute H = 0,
/// and the part of the path beyond the map edge contributes nothing at all.
/// Integration stops at the first exit from the grid; a path that re-enters
/// later crossed unknown ground to get there, so its tail is not scored
/// either.
pub fn expected_path_risk(
    field: &LambdaField,
    dem: &ElevationMap,
    traj: &Trajectory,
    wheel: &WheelModel,
    track_width: f64,
) -> Result<RiskProfile> {
    let spec = field.spec();
    let states: Vec<_> = traj.states().collect();

    // Ordered on-map path cells, each with its entry point and producing
    // segment.
    let mut cells: Vec<(CellIndex, Point2, usize)> = Vec::new();
    for seg in 0..traj.steps.len() {
        let a = Point2::new(states[seg].x, states[seg].y);
        let b = Point2::new(states[seg + 1].x, states[seg + 1].y);
        if spec.world_to_cell(a.x, a.y).is_err() {
            break;
        }
        let (end, leaves) = match spec.world_to_cell(b.x, b.y) {
            Ok(_) => (Some(b), false),
            Err(_) => (clip_to_grid(spec, a, b), true),
        };
        if let Some(end) = end {
            for (c, entry) in grid::traverse_segment(spec, a, end)? {
                if cells.last().map(|(prev, _, _)| *prev) == Some(c) {
                    continue;
                }
                cells.push((c, entry, seg));
            }
        }
        if leaves {
            break;
        }
    }
    if cells.is_empty() {
        return Ok(RiskProfile { steps: Vec::new(), expected_risk: 0.0 });
    }

    let order: Vec<CellIndex> = cells.iter().map(|(c, _, _)| *c).collect();
    let ks = event_probabilities(field, &order)?;

    let mut steps = Vec::with_capacity(cells.len());
    let mut expected = 0.0;
    for ((c, entry, seg), k) in cells.into_iter().zip(ks) {
        let v = traj.steps[seg].1.v;
        let heading = states[seg].theta;
        let h = footprint_elevation_step(spec, dem, entry, heading, track_width)?;
        let psi = attack_angle(h, wheel.radius)?;
        let energy = collision_energy(v, h, wheel);
        expected += k * energy;
        steps.push(RiskStep { cell: c, v, h, psi, event_probability: k, energy });
    }
    Ok(RiskProfile { steps, expected_risk: expected })
}

/// Endpoint of the longest on-grid prefix of `a -> b`, given that `a` is on
/// the grid and `b` is not. Bisection pins the boundary crossing to float
/// resolution; None means even the immediate neighborhood of `a` is off.
fn clip_to_grid(spec: &crate::grid::GridSpec, a: Point2, b: Point2) -> Option<Point2> {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let p = Point2::new(a.x + mid * (b.x - a.x), a.y + mid * (b.y - a.y));
        if spec.world_to_cell(p.x, p.y).is_ok() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo > 0.0).then(|| Point2::new(a.x + lo * (b.x - a.x), a.y + lo * (b.y - a.y)))
}

/// Worst observed elevation step under the axle line at a path point. When
/// the footprint hangs over the map edge only the on-map part is consulted;
/// off-map ground is unknown, and unknown contributes nothing, same as an
/// unobserved cell.
fn footprint_elevation_step(
    spec: &crate::grid::GridSpec,
    dem: &ElevationMap,
    at: Point2,
    heading: f64,
    track_width: f64,
) -> Result<f64> {
    let cells = match grid::transverse_cells(spec, at.x, at.y, heading, track_width) {
        Ok(cells) => cells,
        Err(_) => {
            let (nx, ny) = (-heading.sin(), heading.cos());
            let half = 0.5 * track_width;
            let samples = ((track_width / (0.5 * spec.cell_size)).ceil() as usize).max(1);
            let mut cells: Vec<CellIndex> = (0..=samples)
                .filter_map(|i| {
                    let d = -half + track_width * i as f64 / samples as f64;
                    spec.world_to_cell(at.x + d * nx, at.y + d * ny).ok()
                })
                .collect();
            cells.sort_unstable();
            cells.dedup();
            cells
        }
    };
    let mut h = 0.0f64;
    for c in cells {
        if dem.cell(c)?.observed() {
            h = h.max(dem.elevation_diff(c)?);
        }
    }
    Ok(h)
}
