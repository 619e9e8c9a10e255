//! Shared fixtures for the benchmarks: a mapped world around the canonical
//! speed-bump corridor, built once per benchmark process.

use lambda_nav_core::config::presets;
use lambda_nav_core::planner::resample_polyline;
use lambda_nav_core::sim::perception_sweep;
use lambda_nav_core::{
    ElevationMap, LambdaField, Point2, ScenarioConfig, VehicleState,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct BenchWorld {
    pub cfg: ScenarioConfig,
    pub dem: ElevationMap,
    pub field: LambdaField,
    pub refs: Vec<VehicleState>,
}

/// Walled speed-bump corridor mapped by one noise-free sweep.
pub fn mapped_bump_world(r_threshold: f64) -> BenchWorld {
    let mut cfg = presets::walled_bump(r_threshold);
    cfg.lidar.z_noise_sigma = 0.0;
    let spec = cfg.grid_spec();
    let mut dem = ElevationMap::new(spec);
    let mut field = LambdaField::new(spec, cfg.lambda.e);
    let hf = cfg.heightfield();
    let lidar = cfg.lidar_model();
    let pts: Vec<Point2> =
        cfg.reference.waypoints.iter().map(|w| Point2::new(w[0], w[1])).collect();
    let poses = resample_polyline(&pts, 0.25);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    perception_sweep(
        &hf,
        &lidar,
        &mut dem,
        &mut field,
        &poses,
        cfg.dem.h_safe,
        cfg.wheel.radius,
        &mut rng,
    )
    .expect("sweep stays on the map");
    let refs = cfg.reference_states();
    BenchWorld { cfg, dem, field, refs }
}
