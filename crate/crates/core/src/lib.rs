//! Risk-aware navigation for wheeled robots on uneven ground.
//!
//! The stack turns lidar returns into a per-cell elevation map, scores each
//! cell with a severity-weighted collision intensity, and plans receding
//! horizon controls whose expected wheel-compression energy stays under a
//! hard budget. A deterministic simulator closes the loop for experiments.
//!
//! Modules, bottom to top:
//!
//! - [`grid`]: shared cell geometry and supercover rasterization
//! - [`dem`]: elevation aggregation and hazard classification
//! - [`lambda_field`]: collision intensity over the grid
//! - [`risk`]: wheel compression energy and its expectation along a path
//! - [`planner`]: bicycle model, tracking cost, constrained sampling
//! - [`sim`]: heightfield world, lidar, closed-loop scenario runner
//! - [`config`]: TOML scenario schema with canonical defaults

pub mod config;
pub mod dem;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod lambda_field;
pub mod planner;
pub mod risk;
pub mod sim;

pub use config::{load_config, ConfigError, ScenarioConfig};
pub use dem::{Classification, ElevationMap};
pub use error::{Error, Result};
pub use geometry::{Point2, Point3};
pub use grid::{CellIndex, GridSpec};
pub use lambda_field::{LambdaCell, LambdaField};
pub use planner::{ControlInput, PlanDiagnostics, Planner, PlannerConfig, Trajectory, VehicleState};
pub use risk::{RiskProfile, WheelModel};
pub use sim::{run_scenario, Heightfield, LidarModel, Outcome, Primitive, ScenarioResult};
