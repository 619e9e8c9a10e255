//! Command-line front end for the navigation stack.
//!
//! Exit codes: 0 when a run reaches the goal, 1 on any configuration or I/O
//! error, 2 when the robot stalls or times out. Logging goes to stderr and
//! is controlled with the `LAMBDA_NAV_LOG` environment variable.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use lambda_nav_core::config::{load_config, ScenarioConfig};
use lambda_nav_core::planner::resample_polyline;
use lambda_nav_core::risk::expected_path_risk;
use lambda_nav_core::sim::{perception_sweep, run_scenario, write_trace_csv, Outcome};
use lambda_nav_core::{
    ControlInput, ElevationMap, LambdaField, Point2, Trajectory, VehicleState,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lambda-nav", version, about = "Risk-aware navigation scenarios and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop scenario; exits 0 on goal, 2 on stall or timeout.
    Run {
        /// Scenario TOML file.
        config: PathBuf,
        /// Directory for trace.csv, dem.csv, lambda_field.csv, summary.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the expected-risk budget, J.
        #[arg(long, allow_negative_numbers = true)]
        threshold: Option<f64>,
    },
    /// Print the expected-risk breakdown of a fixed path as CSV on stdout.
    RiskProfile {
        /// Scenario TOML file providing the world and the sensor.
        config: PathBuf,
        /// CSV with an `x,y,v` header; `v` is the commanded speed on the
        /// segment leaving that point.
        path: PathBuf,
        /// Mapping passes along the reference line before evaluating.
        #[arg(long, default_value_t = 1)]
        sweep_passes: u32,
    },
    /// Run a mapping sweep and dump dem.csv and lambda_field.csv.
    MapDump {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        sweep_passes: u32,
    },
}

fn main() -> ExitCode {
    // clap's own convention exits 2 on usage errors, which would collide
    // with the stall/timeout code; fold usage errors into the error exit.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::FAILURE,
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LAMBDA_NAV_LOG", "info"))
        .format_timestamp(None)
        .init();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, out, seed, threshold } => cmd_run(&config, &out, seed, threshold),
        Command::RiskProfile { config, path, sweep_passes } => {
            cmd_risk_profile(&config, &path, sweep_passes)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::MapDump { config, out, sweep_passes } => {
            cmd_map_dump(&config, &out, sweep_passes)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_run(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    threshold: Option<f64>,
) -> Result<ExitCode> {
    let mut cfg = load_config(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = threshold {
        cfg.r_threshold = t;
        cfg.validate().context("applying --threshold")?;
    }

    let result = run_scenario(&cfg)?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_trace_csv(&result.records, writer(&out.join("trace.csv"))?)?;
    result.dem.write_csv(writer(&out.join("dem.csv"))?)?;
    result.field.write_csv(writer(&out.join("lambda_field.csv"))?)?;
    let summary = serde_json::json!({
        "goal_reached": result.outcome == Outcome::Goal,
        "total_time": result.total_time,
        "max_expected_risk": result.max_expected_risk,
        "min_crossing_speed": result.min_crossing_speed,
        "path_length": result.path_length,
    });
    fs::write(out.join("summary.json"), format!("{summary:#}\n"))?;

    log::info!(
        "outcome {} after {:.1} s, {:.1} m driven, max expected risk {:.3} J; outputs in {}",
        result.outcome,
        result.total_time,
        result.path_length,
        result.max_expected_risk,
        out.display()
    );
    Ok(match result.outcome {
        Outcome::Goal => ExitCode::SUCCESS,
        Outcome::Stall | Outcome::Timeout => ExitCode::from(2),
    })
}

fn cmd_risk_profile(config: &Path, path: &Path, sweep_passes: u32) -> Result<()> {
    let cfg = load_config(config).with_context(|| format!("loading {}", config.display()))?;
    let rows = read_path_csv(path)?;
    let traj = trajectory_from_path(&rows);
    let (dem, field) = mapped_world(&cfg, sweep_passes)?;
    let wheel = cfg.wheel_model();
    let profile = expected_path_risk(&field, &dem, &traj, &wheel, cfg.wheel.track_width)?;
    let stdout = std::io::stdout();
    profile.write_csv(stdout.lock())?;
    log::info!(
        "expected risk over {} cells: {:.6} J",
        profile.steps.len(),
        profile.expected_risk
    );
    Ok(())
}

fn cmd_map_dump(config: &Path, out: &Path, sweep_passes: u32) -> Result<()> {
    let cfg = load_config(config).with_context(|| format!("loading {}", config.display()))?;
    let (dem, field) = mapped_world(&cfg, sweep_passes)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    dem.write_csv(writer(&out.join("dem.csv"))?)?;
    field.write_csv(writer(&out.join("lambda_field.csv"))?)?;
    log::info!("maps written to {}", out.display());
    Ok(())
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Builds the maps a robot would have after `passes` sweeps along the
/// reference line, one scan every 0.25 m.
fn mapped_world(cfg: &ScenarioConfig, passes: u32) -> Result<(ElevationMap, LambdaField)> {
    let spec = cfg.grid_spec();
    let mut dem = ElevationMap::new(spec);
    let mut field = LambdaField::new(spec, cfg.lambda.e);
    let hf = cfg.heightfield();
    let lidar = cfg.lidar_model();
    let pts: Vec<Point2> =
        cfg.reference.waypoints.iter().map(|w| Point2::new(w[0], w[1])).collect();
    let poses = resample_polyline(&pts, 0.25);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..passes {
        perception_sweep(
            &hf,
            &lidar,
            &mut dem,
            &mut field,
            &poses,
            cfg.dem.h_safe,
            cfg.wheel.radius,
            &mut rng,
        )?;
    }
    Ok((dem, field))
}

fn read_path_csv(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else { bail!("{} is empty", path.display()) };
    if header.trim() != "x,y,v" {
        bail!("path file must start with an `x,y,v` header, got `{header}`");
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            bail!("line {}: expected 3 fields, got {}", i + 1, fields.len());
        }
        let mut parsed = [0.0f64; 3];
        for (slot, raw) in parsed.iter_mut().zip(&fields) {
            *slot = raw
                .trim()
                .parse()
                .with_context(|| format!("line {}: bad number `{raw}`", i + 1))?;
        }
        rows.push((parsed[0], parsed[1], parsed[2]));
    }
    if rows.len() < 2 {
        bail!("path needs at least two points");
    }
    Ok(rows)
}

/// Turns path rows into a trajectory: headings follow the segments, each
/// step carries the speed of the segment that reaches it.
fn trajectory_from_path(rows: &[(f64, f64, f64)]) -> Trajectory {
    let heading = |i: usize| {
        let (a, b) = (rows[i], rows[i + 1]);
        (b.1 - a.1).atan2(b.0 - a.0)
    };
    let start = VehicleState::new(rows[0].0, rows[0].1, heading(0));
    let mut steps = Vec::with_capacity(rows.len() - 1);
    for i in 1..rows.len() {
        let theta = if i + 1 < rows.len() { heading(i) } else { heading(i - 1) };
        steps.push((
            VehicleState::new(rows[i].0, rows[i].1, theta),
            ControlInput { v: rows[i - 1].2, delta: 0.0 },
        ));
    }
    Trajectory { start, steps }
}
