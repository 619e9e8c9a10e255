//! Scenario configuration.
//!
//! A scenario file is TOML. Every field has a default matching the
//! canonical indoor setup, so a minimal file can set nothing but the risk
//! budget:
//!
//! ```toml
//! r_threshold = 3.0
//! ```
//!
//! Unknown keys are rejected rather than ignored; a typo in a tuning file
//! should fail loudly, not silently run the defaults.

use crate::geometry::Point2;
use crate::grid::GridSpec;
use crate::planner::{resample_polyline, PlannerConfig, VehicleState};
use crate::risk::WheelModel;
use crate::sim::{Heightfield, LidarModel, Primitive};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    /// Syntax or schema violation; the inner error carries line and column.
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for {field}: {reason}")]
    Validation { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation { field: field.to_string(), reason: reason.into() }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a positive number, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a non-negative number, got {v}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Seed for every stochastic part of the run (sensor noise).
    pub seed: u64,
    /// Simulated wall-clock budget, s.
    pub max_time: f64,
    /// Expected-risk budget handed to the planner, J.
    pub r_threshold: f64,
    pub grid: GridSection,
    pub dem: DemSection,
    pub lambda: LambdaSection,
    pub wheel: WheelSection,
    pub planner: PlannerSection,
    pub lidar: LidarSection,
    pub reference: ReferenceSection,
    /// Terrain on top of the flat ground plane.
    pub environment: Vec<Primitive>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            max_time: 60.0,
            r_threshold: 0.0,
            grid: GridSection::default(),
            dem: DemSection::default(),
            lambda: LambdaSection::default(),
            wheel: WheelSection::default(),
            planner: PlannerSection::default(),
            lidar: LidarSection::default(),
            reference: ReferenceSection::default(),
            environment: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { origin: [-10.0, -10.0], cell_size: 0.1, width: 200, height: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemSection {
    /// Elevation step that separates safe from hazardous, m. Ties count as
    /// hazardous.
    pub h_safe: f64,
}

impl Default for DemSection {
    fn default() -> Self {
        Self { h_safe: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaSection {
    /// Error-region area of the intensity model, m^2.
    pub e: f64,
}

impl Default for LambdaSection {
    fn default() -> Self {
        Self { e: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WheelSection {
    pub radius: f64,
    pub stiffness: f64,
    pub mass: f64,
    /// Lateral footprint used for terrain lookups, m.
    pub track_width: f64,
}

impl Default for WheelSection {
    fn default() -> Self {
        Self { radius: 0.25, stiffness: 150_000.0, mass: 50.0, track_width: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSection {
    pub wheelbase: f64,
    pub dt: f64,
    pub horizon: usize,
    pub q: [f64; 3],
    pub q_n: [f64; 3],
    pub w_v: f64,
    pub v_max: f64,
    /// Steering limit in degrees; degrees read better in tuning files.
    pub delta_max_deg: f64,
}

impl Default for PlannerSection {
    fn default() -> Self {
        Self {
            wheelbase: 1.0,
            dt: 0.1,
            horizon: 60,
            q: [0.05; 3],
            q_n: [1.0; 3],
            w_v: 0.1,
            v_max: 1.5,
            delta_max_deg: 11.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarSection {
    pub range: f64,
    pub azimuth_count: usize,
    pub ring_elevations_deg: Vec<f64>,
    pub z_noise_sigma: f64,
    pub mount_height: f64,
}

impl Default for LidarSection {
    fn default() -> Self {
        let rings = (0..16).map(|k| -15.0 + 16.0 * k as f64 / 15.0).collect();
        Self {
            range: 10.0,
            azimuth_count: 360,
            ring_elevations_deg: rings,
            z_noise_sigma: 0.005,
            mount_height: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    /// Start pose (x, y, theta).
    pub start: [f64; 3],
    /// Polyline the tracking cost pulls towards.
    pub waypoints: Vec<[f64; 2]>,
    pub goal: [f64; 2],
    pub goal_radius: f64,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        // The track runs well past the goal line: the planner's reference
        // window repeats the track's final pose, so a track ending at the
        // goal would brake the vehicle a full horizon early. The run still
        // terminates at the goal disc.
        Self {
            start: [-8.5, 0.0, 0.0],
            waypoints: vec![[-8.5, 0.0], [17.0, 0.0]],
            goal: [7.0, 0.0],
            goal_radius: 0.3,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("max_time", self.max_time)?;
        non_negative("r_threshold", self.r_threshold)?;

        positive("grid.cell_size", self.grid.cell_size)?;
        if self.grid.width == 0 || self.grid.height == 0 {
            return Err(invalid("grid.width/height", "grid must have at least one cell"));
        }
        if !(self.grid.origin[0].is_finite() && self.grid.origin[1].is_finite()) {
            return Err(invalid("grid.origin", "must be finite"));
        }

        positive("dem.h_safe", self.dem.h_safe)?;
        positive("lambda.e", self.lambda.e)?;

        positive("wheel.radius", self.wheel.radius)?;
        positive("wheel.stiffness", self.wheel.stiffness)?;
        positive("wheel.mass", self.wheel.mass)?;
        positive("wheel.track_width", self.wheel.track_width)?;

        positive("planner.wheelbase", self.planner.wheelbase)?;
        positive("planner.dt", self.planner.dt)?;
        if self.planner.horizon == 0 {
            return Err(invalid("planner.horizon", "must be at least 1"));
        }
        for (i, q) in self.planner.q.iter().enumerate() {
            non_negative(&format!("planner.q[{i}]"), *q)?;
        }
        for (i, q) in self.planner.q_n.iter().enumerate() {
            non_negative(&format!("planner.q_n[{i}]"), *q)?;
        }
        non_negative("planner.w_v", self.planner.w_v)?;
        positive("planner.v_max", self.planner.v_max)?;
        if !(self.planner.delta_max_deg > 0.0 && self.planner.delta_max_deg < 90.0) {
            return Err(invalid("planner.delta_max_deg", "must lie strictly between 0 and 90"));
        }

        positive("lidar.range", self.lidar.range)?;
        if self.lidar.azimuth_count == 0 {
            return Err(invalid("lidar.azimuth_count", "must be at least 1"));
        }
        if self.lidar.ring_elevations_deg.is_empty() {
            return Err(invalid("lidar.ring_elevations_deg", "need at least one ring"));
        }
        non_negative("lidar.z_noise_sigma", self.lidar.z_noise_sigma)?;
        positive("lidar.mount_height", self.lidar.mount_height)?;

        if self.reference.waypoints.len() < 2 {
            return Err(invalid("reference.waypoints", "need at least two waypoints"));
        }
        positive("reference.goal_radius", self.reference.goal_radius)?;
        for v in self.reference.start.iter().chain(self.reference.goal.iter()) {
            if !v.is_finite() {
                return Err(invalid("reference", "poses must be finite"));
            }
        }

        for (i, p) in self.environment.iter().enumerate() {
            validate_primitive(i, p)?;
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::new(
            Point2::new(self.grid.origin[0], self.grid.origin[1]),
            self.grid.cell_size,
            self.grid.width,
            self.grid.height,
        )
    }

    pub fn wheel_model(&self) -> WheelModel {
        WheelModel::new(self.wheel.radius, self.wheel.stiffness, self.wheel.mass)
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            wheelbase: self.planner.wheelbase,
            dt: self.planner.dt,
            horizon: self.planner.horizon,
            q: self.planner.q,
            q_n: self.planner.q_n,
            w_v: self.planner.w_v,
            v_max: self.planner.v_max,
            delta_max: self.planner.delta_max_deg.to_radians(),
            r_threshold: self.r_threshold,
            track_width: self.wheel.track_width,
        }
    }

    pub fn lidar_model(&self) -> LidarModel {
        LidarModel {
            range: self.lidar.range,
            azimuth_count: self.lidar.azimuth_count,
            ring_elevations: self.lidar.ring_elevations_deg.iter().map(|d| d.to_radians()).collect(),
            z_noise_sigma: self.lidar.z_noise_sigma,
            mount_height: self.lidar.mount_height,
        }
    }

    pub fn heightfield(&self) -> Heightfield {
        Heightfield::new(self.environment.clone())
    }

    pub fn start_state(&self) -> VehicleState {
        VehicleState::new(self.reference.start[0], self.reference.start[1], self.reference.start[2])
    }

    /// Reference poses resampled at one full-speed step per index.
    pub fn reference_states(&self) -> Vec<VehicleState> {
        let pts: Vec<Point2> =
            self.reference.waypoints.iter().map(|w| Point2::new(w[0], w[1])).collect();
        resample_polyline(&pts, self.planner.v_max * self.planner.dt)
    }
}

fn validate_primitive(i: usize, p: &Primitive) -> Result<(), ConfigError> {
    let field = |name: &str| format!("environment[{i}].{name}");
    match *p {
        Primitive::Bump { length, width, height, ramp, .. } => {
            positive(&field("length"), length)?;
            positive(&field("width"), width)?;
            positive(&field("height"), height)?;
            non_negative(&field("ramp"), ramp)?;
            if ramp > length / 2.0 {
                return Err(invalid(&field("ramp"), "ramp cannot exceed half the length"));
            }
        }
        Primitive::CosineBump { length, width, height, .. } => {
            positive(&field("length"), length)?;
            positive(&field("width"), width)?;
            positive(&field("height"), height)?;
        }
        Primitive::Curb { a, b, height } => {
            positive(&field("height"), height)?;
            if a == b {
                return Err(invalid(&field("a/b"), "endpoints must differ"));
            }
        }
        Primitive::Cone { base_radius, top_radius, height, .. } => {
            positive(&field("base_radius"), base_radius)?;
            non_negative(&field("top_radius"), top_radius)?;
            positive(&field("height"), height)?;
            if top_radius >= base_radius {
                return Err(invalid(&field("top_radius"), "must be smaller than base_radius"));
            }
        }
        Primitive::Wall { length, width, height, yaw, .. } => {
            positive(&field("length"), length)?;
            positive(&field("width"), width)?;
            positive(&field("height"), height)?;
            if !yaw.is_finite() {
                return Err(invalid(&field("yaw"), "must be finite"));
            }
        }
        Primitive::Pole { radius, height, .. } => {
            positive(&field("radius"), radius)?;
            positive(&field("height"), height)?;
        }
    }
    Ok(())
}

/// Reads and validates a scenario file.
pub fn load_config<P: AsRef<Path>>(path: P) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::from_toml_str(&text)
}

/// Canonical experiment setups: a 15 m corridor with the goal at the far
/// end, optionally blocked by a 0.15 m speed bump.
pub mod presets {
    use super::*;

    /// Flat ground, no obstacles.
    pub fn empty_corridor(r_threshold: f64) -> ScenarioConfig {
        ScenarioConfig { r_threshold, ..ScenarioConfig::default() }
    }

    /// A 1.0 x 2.4 m bump with vertical faces across the lane. Open ground
    /// on both sides leaves room to drive around it.
    pub fn open_bump(r_threshold: f64) -> ScenarioConfig {
        ScenarioConfig {
            r_threshold,
            environment: vec![Primitive::Bump {
                center: [0.0, 0.0],
                length: 1.0,
                width: 2.4,
                height: 0.15,
                ramp: 0.0,
            }],
            ..ScenarioConfig::default()
        }
    }

    /// The same bump widened to fill a walled corridor: the only way to the
    /// goal is over it.
    pub fn walled_bump(r_threshold: f64) -> ScenarioConfig {
        ScenarioConfig {
            r_threshold,
            environment: vec![
                Primitive::Bump {
                    center: [0.0, 0.0],
                    length: 1.0,
                    width: 3.0,
                    height: 0.15,
                    ramp: 0.0,
                },
                Primitive::Wall {
                    center: [-1.25, 1.65],
                    length: 14.5,
                    width: 0.3,
                    height: 1.0,
                    yaw: 0.0,
                },
                Primitive::Wall {
                    center: [-1.25, -1.65],
                    length: 14.5,
                    width: 0.3,
                    height: 1.0,
                    yaw: 0.0,
                },
            ],
            ..ScenarioConfig::default()
        }
    }
}
