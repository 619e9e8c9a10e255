//! Deterministic closed-loop simulator.
//!
//! The world is a 2.5D analytic heightfield. A spinning lidar samples it by
//! ray marching, the perception stack folds the returns into the elevation
//! map and the hazard intensity field, the planner picks a control, and the
//! bicycle model applies it. Everything downstream of the seed is
//! deterministic: same config, same trace, byte for byte.

use crate::config::ScenarioConfig;
use crate::dem::ElevationMap;
use crate::error::{Error, Result};
use crate::geometry::{Point2, Point3};
use crate::grid::{CellIndex, GridSpec};
use crate::lambda_field::LambdaField;
use crate::planner::{step_model, Planner, VehicleState};
use crate::risk::{collision_energy, WheelModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Commanded speed below which a tick counts as stationary.
pub const STALL_SPEED: f64 = 0.01;
/// Consecutive stationary ticks away from the goal that end the run.
pub const STALL_TICKS: usize = 50;

/// Analytic terrain pieces. Heights compose by maximum over a flat ground
/// plane at z = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    /// Axis-aligned box bump; `ramp` metres of linear flank on the x sides
    /// (0 means vertical faces).
    Bump { center: [f64; 2], length: f64, width: f64, height: f64, #[serde(default)] ramp: f64 },
    /// Smooth cosine profile along x, constant across y.
    CosineBump { center: [f64; 2], length: f64, width: f64, height: f64 },
    /// Half-plane step: raised on the left side of a -> b.
    Curb { a: [f64; 2], b: [f64; 2], height: f64 },
    /// Truncated cone, linear flank between the two radii.
    Cone { center: [f64; 2], base_radius: f64, top_radius: f64, height: f64 },
    /// Rotated box, `yaw` radians counter-clockwise.
    Wall { center: [f64; 2], length: f64, width: f64, height: f64, #[serde(default)] yaw: f64 },
    Pole { center: [f64; 2], radius: f64, height: f64 },
}

impl Primitive {
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        match *self {
            Primitive::Bump { center, length, width, height, ramp } => {
                let (dx, dy) = ((x - center[0]).abs(), (y - center[1]).abs());
                if dx > length / 2.0 || dy > width / 2.0 {
                    return 0.0;
                }
                if ramp <= 0.0 {
                    return height;
                }
                height * ((length / 2.0 - dx) / ramp).clamp(0.0, 1.0)
            }
            Primitive::CosineBump { center, length, width, height } => {
                let (dx, dy) = (x - center[0], (y - center[1]).abs());
                if dx.abs() > length / 2.0 || dy > width / 2.0 {
                    return 0.0;
                }
                0.5 * height * (1.0 + (std::f64::consts::TAU * dx / length).cos())
            }
            Primitive::Curb { a, b, height } => {
                let cross = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
                if cross >= 0.0 {
                    height
                } else {
                    0.0
                }
            }
            Primitive::Cone { center, base_radius, top_radius, height } => {
                let d = (x - center[0]).hypot(y - center[1]);
                if d <= top_radius {
                    height
                } else if d < base_radius {
                    height * (base_radius - d) / (base_radius - top_radius)
                } else {
                    0.0
                }
            }
            Primitive::Wall { center, length, width, height, yaw } => {
                let (dx, dy) = (x - center[0], y - center[1]);
                let (s, c) = yaw.sin_cos();
                let lx = c * dx + s * dy;
                let ly = -s * dx + c * dy;
                if lx.abs() <= length / 2.0 && ly.abs() <= width / 2.0 {
                    height
                } else {
                    0.0
                }
            }
            Primitive::Pole { center, radius, height } => {
                if (x - center[0]).hypot(y - center[1]) <= radius {
                    height
                } else {
                    0.0
                }
            }
        }
    }

    pub fn max_height(&self) -> f64 {
        match *self {
            Primitive::Bump { height, .. }
            | Primitive::CosineBump { height, .. }
            | Primitive::Curb { height, .. }
            | Primitive::Cone { height, .. }
            | Primitive::Wall { height, .. }
            | Primitive::Pole { height, .. } => height,
        }
    }
}

/// Max-composition of primitives over flat ground.
#[derive(Debug, Clone, Default)]
pub struct Heightfield {
    primitives: Vec<Primitive>,
}

impl Heightfield {
    pub fn new(primitives: Vec<Primitive>) -> Self {
        Self { primitives }
    }

    pub fn sample_height(&self, x: f64, y: f64) -> f64 {
        self.primitives.iter().map(|p| p.height_at(x, y)).fold(0.0, f64::max)
    }

    /// Upper bound on the surface anywhere, for ray-march skipping.
    pub fn max_height(&self) -> f64 {
        self.primitives.iter().map(Primitive::max_height).fold(0.0, f64::max)
    }
}

/// Spinning multi-ring lidar. Rings are elevation angles in radians; the
/// sensor sits `mount_height` above the local surface.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarModel {
    pub range: f64,
    pub azimuth_count: usize,
    pub ring_elevations: Vec<f64>,
    /// Std-dev of additive Gaussian noise on the reported z, m.
    pub z_noise_sigma: f64,
    pub mount_height: f64,
}

impl Default for LidarModel {
    fn default() -> Self {
        // 16 rings spread evenly from -15 to +1 degrees.
        let rings = (0..16)
            .map(|k| (-15.0 + 16.0 * k as f64 / 15.0).to_radians())
            .collect();
        Self {
            range: 10.0,
            azimuth_count: 360,
            ring_elevations: rings,
            z_noise_sigma: 0.005,
            mount_height: 0.5,
        }
    }
}

const MARCH_STEP: f64 = 0.02;

/// One full revolution: marches every beam against the heightfield and
/// returns the surface points it hits. The reported z is the true surface
/// height at the hit (x, y) plus sensor noise, so vertical faces read as the
/// top of the face rather than a point partway down it.
pub fn scan<R: Rng>(
    hf: &Heightfield,
    pose: &VehicleState,
    lidar: &LidarModel,
    rng: &mut R,
) -> Vec<Point3> {
    let cap = hf.max_height();
    let oz = hf.sample_height(pose.x, pose.y) + lidar.mount_height;
    let noise = (lidar.z_noise_sigma > 0.0)
        .then(|| Normal::new(0.0, lidar.z_noise_sigma).expect("sigma validated"));
    let azimuths: Vec<(f64, f64)> = (0..lidar.azimuth_count)
        .map(|a| (pose.theta + std::f64::consts::TAU * a as f64 / lidar.azimuth_count as f64).sin_cos())
        .collect();
    let mut out = Vec::new();
    for &el in &lidar.ring_elevations {
        let (sin_el, cos_el) = el.sin_cos();
        for &(sin_az, cos_az) in &azimuths {
            let (dx, dy, dz) = (cos_el * cos_az, cos_el * sin_az, sin_el);
            // Nothing to hit while the beam is above every surface: jump to
            // where it first dips below the global height cap.
            let mut t = MARCH_STEP;
            if oz > cap {
                if dz >= 0.0 {
                    continue;
                }
                t = (((cap - oz) / dz) / MARCH_STEP).floor().max(1.0) * MARCH_STEP;
            }
            while t <= lidar.range {
                let (px, py, pz) = (pose.x + t * dx, pose.y + t * dy, oz + t * dz);
                if pz <= hf.sample_height(px, py) {
                    // One bisection of the last step, then snap z to the
                    // surface under the refined point.
                    let tm = t - 0.5 * MARCH_STEP;
                    let (mx, my, mz) = (pose.x + tm * dx, pose.y + tm * dy, oz + tm * dz);
                    let (hx, hy) = if mz <= hf.sample_height(mx, my) { (mx, my) } else { (px, py) };
                    let mut z = hf.sample_height(hx, hy);
                    if let Some(n) = &noise {
                        z += n.sample(rng);
                    }
                    out.push(Point3::new(hx, hy, z));
                    break;
                }
                t += MARCH_STEP;
            }
        }
    }
    out
}

/// Grid cells containing at least one return, sorted and deduplicated so
/// downstream updates run in a reproducible order. Out-of-grid returns are
/// dropped.
pub fn touched_cells(spec: &GridSpec, cloud: &[Point3]) -> Vec<CellIndex> {
    let mut cells: Vec<CellIndex> = cloud
        .iter()
        .filter_map(|p| spec.world_to_cell(p.x, p.y).ok())
        .collect();
    cells.sort_unstable();
    cells.dedup();
    cells
}

/// Scans from each pose in turn and folds every scan into the map and the
/// field. This is the mapping-only pipeline, no driving involved.
pub fn perception_sweep<R: Rng>(
    hf: &Heightfield,
    lidar: &LidarModel,
    dem: &mut ElevationMap,
    field: &mut LambdaField,
    poses: &[VehicleState],
    h_safe: f64,
    wheel_radius: f64,
    rng: &mut R,
) -> Result<()> {
    for pose in poses {
        let cloud = scan(hf, pose, lidar, rng);
        let touched = touched_cells(dem.spec(), &cloud);
        dem.integrate_cloud(&cloud);
        field.ingest_scan(dem, &touched, h_safe, wheel_radius)?;
    }
    Ok(())
}

const NEIGHBORS: [(i64, i64); 8] =
    [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Compression energy the robot would actually take at this pose and speed,
/// judged against the true surface instead of the mapped one. Uses the same
/// cell discretization as the mapped risk so the two columns of the trace
/// are comparable.
pub fn ground_truth_risk(
    hf: &Heightfield,
    spec: &GridSpec,
    s: &VehicleState,
    v: f64,
    wheel: &WheelModel,
    track_width: f64,
) -> f64 {
    let (nx, ny) = (-s.theta.sin(), s.theta.cos());
    let half = track_width / 2.0;
    let samples = ((track_width / (0.5 * spec.cell_size)).ceil() as usize).max(1);
    let mut cells: Vec<CellIndex> = Vec::new();
    for i in 0..=samples {
        let d = -half + track_width * i as f64 / samples as f64;
        if let Ok(c) = spec.world_to_cell(s.x + d * nx, s.y + d * ny) {
            cells.push(c);
        }
    }
    cells.sort_unstable();
    cells.dedup();
    let mut h = 0.0f64;
    for c in cells {
        let center = spec.cell_center(c).expect("cell came from world_to_cell");
        let z = hf.sample_height(center.x, center.y);
        for (dc, dr) in NEIGHBORS {
            let (ncol, nrow) = (c.col as i64 + dc, c.row as i64 + dr);
            if !spec.contains(ncol, nrow) {
                continue;
            }
            let nc = spec
                .cell_center(CellIndex::new(ncol as usize, nrow as usize))
                .expect("neighbor bounds checked");
            h = h.max((z - hf.sample_height(nc.x, nc.y)).abs());
        }
    }
    collision_energy(v, h, wheel)
}

/// One trace row. `v` and `delta` are the commands issued at time `t`;
/// `expected_risk` and `cost` describe the winning plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub delta: f64,
    pub expected_risk: f64,
    pub ground_truth_risk: f64,
    pub cost: f64,
    pub feasible_count: usize,
    pub event: String,
}

impl TraceRecord {
    fn terminal(t: f64, s: &VehicleState, event: &str) -> Self {
        Self {
            t,
            x: s.x,
            y: s.y,
            theta: s.theta,
            v: 0.0,
            delta: 0.0,
            expected_risk: 0.0,
            ground_truth_risk: 0.0,
            cost: 0.0,
            feasible_count: 0,
            event: event.to_string(),
        }
    }
}

/// Writes the canonical trace CSV. Floats go through the shortest
/// round-tripping formatting, so equal runs produce equal bytes.
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], mut w: W) -> Result<()> {
    writeln!(w, "t,x,y,theta,v,delta,expected_risk,ground_truth_risk,cost,feasible_count,event")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.t, r.x, r.y, r.theta, r.v, r.delta, r.expected_risk, r.ground_truth_risk, r.cost,
            r.feasible_count, r.event
        )?;
    }
    Ok(())
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Reached the goal disc.
    Goal,
    /// Commanded (near) zero speed for `STALL_TICKS` consecutive ticks away
    /// from the goal.
    Stall,
    /// Ran out of simulated time.
    Timeout,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Goal => "goal",
            Outcome::Stall => "stall",
            Outcome::Timeout => "timeout",
        })
    }
}

/// Everything a closed-loop run produced, including the final maps so tests
/// and tools can audit what the robot believed.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub records: Vec<TraceRecord>,
    pub outcome: Outcome,
    pub final_state: VehicleState,
    /// Simulated seconds until the run ended.
    pub total_time: f64,
    /// Integrated distance actually driven, m.
    pub path_length: f64,
    /// Largest expected risk of any executed plan, J.
    pub max_expected_risk: f64,
    /// Slowest commanded speed while the robot stood on elevated terrain;
    /// None if it never did.
    pub min_crossing_speed: Option<f64>,
    pub field: LambdaField,
    pub dem: ElevationMap,
}

/// Tags sparse events on the trace: first hazard evidence, and transitions
/// of the true surface height under the robot.
struct EventTagger {
    hazard_reported: bool,
    prev_z: f64,
    mode: VerticalMode,
}

#[derive(Clone, Copy, PartialEq)]
enum VerticalMode {
    Flat,
    Up,
    Down,
}

impl EventTagger {
    const TOL: f64 = 1e-3;

    fn new(initial_z: f64) -> Self {
        Self { hazard_reported: false, prev_z: initial_z, mode: VerticalMode::Flat }
    }

    fn tag(&mut self, any_hazard: bool, z: f64) -> String {
        let mode = if z > self.prev_z + Self::TOL {
            VerticalMode::Up
        } else if z < self.prev_z - Self::TOL {
            VerticalMode::Down
        } else {
            VerticalMode::Flat
        };
        let event = if any_hazard && !self.hazard_reported {
            self.hazard_reported = true;
            "hazard_mapped"
        } else if z <= 0.01 && self.prev_z > 0.01 {
            // Back on the ground plane, wherever the descent stood before.
            "clear"
        } else {
            match (self.mode, mode) {
                (m, VerticalMode::Up) if m != VerticalMode::Up => "climb",
                (m, VerticalMode::Down) if m != VerticalMode::Down => "descend",
                (VerticalMode::Up, VerticalMode::Flat) if z > 0.01 => "crest",
                _ => "",
            }
        };
        self.mode = mode;
        self.prev_z = z;
        event.to_string()
    }
}

/// Runs the full perceive-plan-act loop until the goal disc is reached, the
/// robot stalls, or time runs out.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let spec = cfg.grid_spec();
    let mut dem = ElevationMap::new(spec);
    let mut field = LambdaField::new(spec, cfg.lambda.e);
    let hf = cfg.heightfield();
    let lidar = cfg.lidar_model();
    let wheel = cfg.wheel_model();
    let pcfg = cfg.planner_config();
    let refs = cfg.reference_states();
    if refs.is_empty() {
        return Err(Error::EmptyReference);
    }
    let goal = Point2::new(cfg.reference.goal[0], cfg.reference.goal[1]);
    let goal_radius = cfg.reference.goal_radius;
    let mut planner = Planner::new(pcfg.clone(), wheel);
    let mut state = cfg.start_state();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tagger = EventTagger::new(hf.sample_height(state.x, state.y));

    let mut records: Vec<TraceRecord> = Vec::new();
    let mut outcome = Outcome::Timeout;
    let mut total_time = cfg.max_time;
    let mut path_length = 0.0;
    let mut slow_ticks = 0usize;
    let max_ticks = (cfg.max_time / pcfg.dt).round() as usize;

    for tick in 0..=max_ticks {
        let t = tick as f64 * pcfg.dt;
        if state.position().distance(goal) <= goal_radius {
            outcome = Outcome::Goal;
            total_time = t;
            records.push(TraceRecord::terminal(t, &state, "goal"));
            break;
        }
        if tick == max_ticks {
            outcome = Outcome::Timeout;
            total_time = t;
            records.push(TraceRecord::terminal(t, &state, "timeout"));
            break;
        }

        let cloud = scan(&hf, &state, &lidar, &mut rng);
        let touched = touched_cells(&spec, &cloud);
        dem.integrate_cloud(&cloud);
        field.ingest_scan(&dem, &touched, cfg.dem.h_safe, wheel.radius)?;

        let (controls, diag) = planner.plan(&state, &refs, &field, &dem)?;
        let u = controls[0];

        let z_here = hf.sample_height(state.x, state.y);
        let any_hazard = field.iter().any(|(_, c)| c.lambda > 0.0);
        let event = tagger.tag(any_hazard, z_here);
        let gt = ground_truth_risk(&hf, &spec, &state, u.v, &wheel, pcfg.track_width);
        records.push(TraceRecord {
            t,
            x: state.x,
            y: state.y,
            theta: state.theta,
            v: u.v,
            delta: u.delta,
            expected_risk: diag.expected_risk,
            ground_truth_risk: gt,
            cost: diag.cost,
            feasible_count: diag.feasible_count,
            event,
        });

        if u.v < STALL_SPEED {
            slow_ticks += 1;
        } else {
            slow_ticks = 0;
        }
        if slow_ticks >= STALL_TICKS {
            outcome = Outcome::Stall;
            total_time = t;
            if let Some(last) = records.last_mut() {
                last.event = "stall".to_string();
            }
            break;
        }

        let next = step_model(&state, &u, pcfg.wheelbase, pcfg.dt)?;
        path_length += state.position().distance(next.position());
        state = next;
    }

    let max_expected_risk = records.iter().map(|r| r.expected_risk).fold(0.0, f64::max);
    let min_crossing_speed = records
        .iter()
        .filter(|r| hf.sample_height(r.x, r.y) > 0.01)
        .map(|r| r.v)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));

    Ok(ScenarioResult {
        records,
        outcome,
        final_state: state,
        total_time,
        path_length,
        max_expected_risk,
        min_crossing_speed,
        field,
        dem,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;

    #[test]
    fn primitive_heights_match_their_shapes() {
        let bump = Primitive::Bump { center: [0.0, 0.0], length: 1.0, width: 2.4, height: 0.15, ramp: 0.0 };
        assert_eq!(bump.height_at(0.0, 0.0), 0.15);
        assert_eq!(bump.height_at(0.5, 1.2), 0.15);
        assert_eq!(bump.height_at(0.51, 0.0), 0.0);
        assert_eq!(bump.height_at(0.0, 1.21), 0.0);

        let ramped = Primitive::Bump { center: [0.0, 0.0], length: 2.0, width: 1.0, height: 0.2, ramp: 0.5 };
        assert_eq!(ramped.height_at(0.0, 0.0), 0.2);
        assert!((ramped.height_at(0.75, 0.0) - 0.1).abs() < 1e-12);
        assert_eq!(ramped.height_at(1.0, 0.0), 0.0);

        let cb = Primitive::CosineBump { center: [0.0, 0.0], length: 2.0, width: 1.0, height: 0.1 };
        assert!((cb.height_at(0.0, 0.0) - 0.1).abs() < 1e-12);
        assert_eq!(cb.height_at(1.0, 0.0), 0.0);
        assert!((cb.height_at(0.5, 0.0) - 0.05).abs() < 1e-12);

        let curb = Primitive::Curb { a: [0.0, 0.0], b: [1.0, 0.0], height: 0.12 };
        assert_eq!(curb.height_at(0.5, 0.5), 0.12);
        assert_eq!(curb.height_at(0.5, -0.5), 0.0);

        let cone = Primitive::Cone { center: [0.0, 0.0], base_radius: 1.0, top_radius: 0.2, height: 0.4 };
        assert_eq!(cone.height_at(0.1, 0.0), 0.4);
        assert!((cone.height_at(0.6, 0.0) - 0.2).abs() < 1e-12);
        assert_eq!(cone.height_at(1.1, 0.0), 0.0);

        let wall = Primitive::Wall {
            center: [0.0, 0.0],
            length: 2.0,
            width: 0.2,
            height: 1.0,
            yaw: std::f64::consts::FRAC_PI_2,
        };
        // Rotated 90 degrees: long axis now along y.
        assert_eq!(wall.height_at(0.0, 0.9), 1.0);
        assert_eq!(wall.height_at(0.9, 0.0), 0.0);

        let pole = Primitive::Pole { center: [1.0, 1.0], radius: 0.1, height: 2.0 };
        assert_eq!(pole.height_at(1.05, 1.0), 2.0);
        assert_eq!(pole.height_at(1.2, 1.0), 0.0);
    }

    #[test]
    fn heightfield_composes_by_max() {
        let hf = Heightfield::new(vec![
            Primitive::Pole { center: [0.0, 0.0], radius: 0.5, height: 1.0 },
            Primitive::Pole { center: [0.0, 0.0], radius: 0.2, height: 2.0 },
        ]);
        assert_eq!(hf.sample_height(0.0, 0.0), 2.0);
        assert_eq!(hf.sample_height(0.3, 0.0), 1.0);
        assert_eq!(hf.sample_height(0.9, 0.0), 0.0);
        assert_eq!(hf.max_height(), 2.0);
    }

    #[test]
    fn flat_ground_rings_land_on_circles() {
        let hf = Heightfield::default();
        let mut lidar = LidarModel::default();
        lidar.z_noise_sigma = 0.0;
        let pose = VehicleState::new(0.0, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cloud = scan(&hf, &pose, &lidar, &mut rng);
        // Rings steeper than atan(0.5 / 10) downward reach the ground within
        // range; with the default pattern that is 12 of 16 rings.
        assert_eq!(cloud.len(), 12 * 360);
        for p in &cloud {
            assert_eq!(p.z, 0.0);
            let r = p.x.hypot(p.y);
            let el = (-(lidar.mount_height) / r).atan();
            // The hit radius matches some ring's geometric radius to within
            // the march resolution.
            let best = lidar
                .ring_elevations
                .iter()
                .map(|e| (e - el).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 0.01, "no ring explains a hit at radius {r}");
        }
        let nearest = cloud.iter().map(|p| p.x.hypot(p.y)).fold(f64::INFINITY, f64::min);
        let expected = lidar.mount_height / 15f64.to_radians().tan();
        assert!((nearest - expected).abs() < 0.03, "{nearest} vs {expected}");
    }

    #[test]
    fn scan_reports_the_bump_face_at_full_height() {
        let hf = Heightfield::new(vec![Primitive::Bump {
            center: [0.0, 0.0],
            length: 1.0,
            width: 2.4,
            height: 0.15,
            ramp: 0.0,
        }]);
        let mut lidar = LidarModel::default();
        lidar.z_noise_sigma = 0.0;
        let pose = VehicleState::new(-5.0, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cloud = scan(&hf, &pose, &lidar, &mut rng);
        let face_hits: Vec<&Point3> = cloud
            .iter()
            .filter(|p| p.z == 0.15 && (p.x + 0.5).abs() < 0.05 && p.y.abs() < 1.2)
            .collect();
        assert!(!face_hits.is_empty(), "no returns on the leading face");
    }

    #[test]
    fn scan_is_deterministic_in_the_seed() {
        let hf = Heightfield::new(vec![Primitive::Cone {
            center: [2.0, 1.0],
            base_radius: 1.0,
            top_radius: 0.3,
            height: 0.5,
        }]);
        let lidar = LidarModel::default();
        let pose = VehicleState::new(0.0, 0.0, 0.3);
        let a = scan(&hf, &pose, &lidar, &mut ChaCha8Rng::seed_from_u64(9));
        let b = scan(&hf, &pose, &lidar, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        let c = scan(&hf, &pose, &lidar, &mut ChaCha8Rng::seed_from_u64(10));
        assert_ne!(a, c);
    }

    #[test]
    fn scan_noise_has_the_configured_scale() {
        let hf = Heightfield::default();
        let lidar = LidarModel::default();
        let pose = VehicleState::new(0.0, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cloud = scan(&hf, &pose, &lidar, &mut rng);
        let n = cloud.len() as f64;
        let mean = cloud.iter().map(|p| p.z).sum::<f64>() / n;
        let var = cloud.iter().map(|p| (p.z - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 * lidar.z_noise_sigma / n.sqrt(), "mean {mean}");
        assert!((var.sqrt() - lidar.z_noise_sigma).abs() < 0.001, "sd {}", var.sqrt());
    }

    #[test]
    fn touched_cells_are_sorted_unique_and_in_grid() {
        let spec = GridSpec::new(Point2::new(0.0, 0.0), 0.1, 10, 10);
        let cloud = vec![
            Point3::new(0.55, 0.35, 0.0),
            Point3::new(0.51, 0.39, 0.1),
            Point3::new(0.05, 0.05, 0.0),
            Point3::new(-3.0, 0.0, 0.0),
            Point3::new(0.95, 0.95, 0.0),
        ];
        let cells = touched_cells(&spec, &cloud);
        assert_eq!(
            cells,
            vec![CellIndex::new(0, 0), CellIndex::new(5, 3), CellIndex::new(9, 9)]
        );
    }

    #[test]
    fn event_tagger_emits_sparse_transitions() {
        let mut tagger = EventTagger::new(0.0);
        assert_eq!(tagger.tag(false, 0.0), "");
        assert_eq!(tagger.tag(true, 0.0), "hazard_mapped");
        assert_eq!(tagger.tag(true, 0.0), "");
        assert_eq!(tagger.tag(true, 0.05), "climb");
        assert_eq!(tagger.tag(true, 0.10), "");
        assert_eq!(tagger.tag(true, 0.10), "crest");
        assert_eq!(tagger.tag(true, 0.05), "descend");
        assert_eq!(tagger.tag(true, 0.0), "clear");
        assert_eq!(tagger.tag(true, 0.0), "");
    }

    #[test]
    fn ground_truth_risk_is_zero_on_flat_ground_and_positive_at_a_step() {
        let hf = Heightfield::new(vec![Primitive::Bump {
            center: [0.0, 0.0],
            length: 1.0,
            width: 2.4,
            height: 0.15,
            ramp: 0.0,
        }]);
        let spec = GridSpec::new(Point2::new(-10.0, -10.0), 0.1, 200, 200);
        let wheel = WheelModel::new(0.25, 150_000.0, 50.0);
        let far = VehicleState::new(-5.0, 0.0, 0.0);
        assert_eq!(ground_truth_risk(&hf, &spec, &far, 1.5, &wheel, 0.8), 0.0);
        let at_face = VehicleState::new(-0.52, 0.0, 0.0);
        let r = ground_truth_risk(&hf, &spec, &at_face, 1.5, &wheel, 0.8);
        assert!(r > 0.0);
        // 0.15 m step at 1.5 m/s: 0.5 * 50 * 1.5^2 * (1 - 0.6^2) = 47.25 J.
        assert!((r - 47.25).abs() < 1e-9, "{r}");
    }

    #[test]
    fn empty_corridor_reaches_the_goal_at_speed() {
        let cfg = presets::empty_corridor(0.0);
        let result = run_scenario(&cfg).unwrap();
        assert_eq!(result.outcome, Outcome::Goal);
        // 15.5 m minus the goal radius at 1.5 m/s, plus a little slack.
        assert!(result.total_time > 9.0 && result.total_time < 12.0, "{}", result.total_time);
        assert!(result.max_expected_risk == 0.0);
        assert_eq!(result.min_crossing_speed, None);
        let cruising = result
            .records
            .iter()
            .filter(|r| r.event.is_empty() && r.v > 0.0)
            .filter(|r| (r.v - 1.5).abs() < 1e-9)
            .count();
        assert!(cruising > 80, "only {cruising} full-speed ticks");
        assert_eq!(result.records.last().unwrap().event, "goal");
    }
}
