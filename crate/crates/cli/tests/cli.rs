//! End-to-end tests of the `lambda-nav` binary: exit codes, artifacts on
//! disk, stdout CSV, and cross-process determinism. Scenario files here use
//! a shrunken corridor and a coarse sensor so each run stays around a
//! second.

use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use lambda_nav_core::config::ScenarioConfig;
use lambda_nav_core::LambdaField;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lambda-nav"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary spawns")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code; killed by signal?")
}

/// A 6 x 6 m corridor with the stock sensor shortened to 5 m. Thinning the
/// ring pattern or starting closer to the obstacle would be cheaper still,
/// but both starve the mapper: the ground strip in front of an obstacle is
/// only visible from a few narrow pose windows, and a hazard with no
/// observed ground next to it reads as a plateau. The reference track runs
/// a full planning horizon past the goal so the vehicle never brakes for
/// the end of the track.
fn corridor_toml(extra: &str) -> String {
    format!(
        r#"
r_threshold = 0.0
max_time = 20.0
seed = 7

[grid]
origin = [-4.0, -3.0]
cell_size = 0.1
width = 110
height = 60

[lidar]
range = 5.0

[reference]
start = [-3.5, 0.0, 0.0]
waypoints = [[-3.5, 0.0], [11.0, 0.0]]
goal = [1.5, 0.0]
goal_radius = 0.3
{extra}
"#
    )
}

fn write_corridor(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    fs::write(&path, corridor_toml(extra)).unwrap();
    path
}

#[test]
fn run_reaches_the_goal_and_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_corridor(dir.path(), "");
    let out_dir = dir.path().join("out");

    let out = run(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["goal_reached"], serde_json::json!(true));
    assert!(summary["total_time"].as_f64().unwrap() > 1.0);
    // Straight-line distance start to goal disc is 4.7 m.
    assert!(summary["path_length"].as_f64().unwrap() >= 4.6);
    assert_eq!(summary["max_expected_risk"].as_f64().unwrap(), 0.0);
    // Flat ground start to finish: the crossing-speed floor never triggers.
    assert!(summary["min_crossing_speed"].is_null());

    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,x,y,theta,v,delta,expected_risk,ground_truth_risk,cost,feasible_count,event"
    );
    assert!(trace.lines().count() > 10);
    assert!(trace.lines().last().unwrap().ends_with("goal"));

    let dem = fs::read_to_string(out_dir.join("dem.csv")).unwrap();
    assert!(dem.starts_with("col,row,z,n_points,observed"));
    let field = fs::read_to_string(out_dir.join("lambda_field.csv")).unwrap();
    assert!(field.starts_with("col,row,s,h,p,lambda"));
}

#[test]
fn run_exits_2_when_a_wall_blocks_the_lane() {
    let dir = tempfile::tempdir().unwrap();
    // Zero budget and a full-width wall: the vehicle creeps up to the
    // mapped hazard, runs out of feasible moves, and stalls.
    let cfg = write_corridor(
        dir.path(),
        r#"
[[environment]]
kind = "wall"
center = [0.5, 0.0]
length = 0.3
width = 5.8
height = 1.0
"#,
    );
    let out_dir = dir.path().join("out");

    let out = run(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "stderr: {}", stderr_of(&out));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["goal_reached"], serde_json::json!(false));

    // The vehicle must have stopped short of the wall face at x = 0.35.
    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let last = trace.lines().last().unwrap();
    let x: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!(x < 0.35, "final x = {x}");
}

#[test]
fn same_seed_reproduces_the_trace_and_different_seed_does_not() {
    let dir = tempfile::tempdir().unwrap();
    // The seed only feeds sensor noise, and noise only reaches the trace
    // through mapped risk, so this scenario needs terrain: a bump on the
    // lane crossed under a loose budget.
    let cfg = write_corridor(
        dir.path(),
        r#"
[[environment]]
kind = "bump"
center = [0.0, 0.0]
length = 1.0
width = 2.4
height = 0.15
"#,
    );
    let trace = |name: &str, seed: &str| {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "run",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--seed",
            seed,
            "--threshold",
            "40.0",
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
        fs::read(out_dir.join("trace.csv")).unwrap()
    };

    let a = trace("a", "123");
    let b = trace("b", "123");
    let c = trace("c", "124");
    assert_eq!(a, b, "same seed must give byte-identical traces");
    assert_ne!(a, c, "sensor noise must reach the recorded risk");
}

#[test]
fn threshold_override_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_corridor(dir.path(), "");
    let out = run(&["run", cfg.to_str().unwrap(), "--threshold", "-1.0"]);
    assert_eq!(code(&out), 1);
    assert!(stderr_of(&out).contains("r_threshold"), "stderr: {}", stderr_of(&out));
}

#[test]
fn unknown_config_key_fails_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.toml");
    fs::write(&cfg, "r_treshold = 3.0\n").unwrap();
    let out = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = stderr_of(&out);
    assert!(err.contains("r_treshold"), "stderr: {err}");
}

#[test]
fn invalid_config_value_fails_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[wheel]\nradius = -0.25\n").unwrap();
    let out = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = stderr_of(&out);
    assert!(err.contains("wheel.radius"), "stderr: {err}");
}

#[test]
fn missing_config_file_exits_1() {
    let out = run(&["run", "/nonexistent/scenario.toml"]);
    assert_eq!(code(&out), 1);
    assert!(stderr_of(&out).contains("/nonexistent/scenario.toml"));
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    let out = run(&["frobnicate"]);
    assert_eq!(code(&out), 1);

    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("run"), "help lists subcommands: {text}");
    assert!(text.contains("risk-profile"));
    assert!(text.contains("map-dump"));
}

#[test]
fn risk_profile_prints_per_cell_csv_on_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_corridor(
        dir.path(),
        r#"
[[environment]]
kind = "bump"
center = [0.0, 0.0]
length = 1.0
width = 2.4
height = 0.15
"#,
    );
    let path = dir.path().join("path.csv");
    fs::write(&path, "x,y,v\n-2.0,0.0,1.0\n-1.0,0.0,1.0\n0.0,0.0,1.0\n1.0,0.0,1.0\n").unwrap();

    let out = run(&["risk-profile", cfg.to_str().unwrap(), path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "step,col,row,v,H,psi,K,r");

    let mut max_k = 0.0f64;
    let mut rows = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 8, "row: {line}");
        let k: f64 = fields[6].parse().unwrap();
        assert!((0.0..=1.0).contains(&k), "collision share out of range: {line}");
        max_k = max_k.max(k);
        rows += 1;
    }
    // A 3 m path on 0.1 m cells crosses about 30 of them.
    assert!(rows >= 25, "only {rows} path cells");
    assert!(max_k > 0.0, "a mapped bump on the path must carry risk");
}

#[test]
fn risk_profile_rejects_a_path_without_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_corridor(dir.path(), "");
    let path = dir.path().join("path.csv");
    fs::write(&path, "a,b\n1,2\n").unwrap();
    let out = run(&["risk-profile", cfg.to_str().unwrap(), path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr_of(&out).contains("x,y,v"), "stderr: {}", stderr_of(&out));
}

#[test]
fn map_dump_round_trips_through_the_field_loader() {
    let dir = tempfile::tempdir().unwrap();
    let toml = corridor_toml(
        r#"
[[environment]]
kind = "bump"
center = [0.0, 0.0]
length = 1.0
width = 2.4
height = 0.15
"#,
    );
    let cfg_path = dir.path().join("scenario.toml");
    fs::write(&cfg_path, &toml).unwrap();
    let out_dir = dir.path().join("maps");

    let out = run(&[
        "map-dump",
        cfg_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--sweep-passes",
        "2",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    assert!(out_dir.join("dem.csv").exists());

    let cfg = ScenarioConfig::from_toml_str(&toml).unwrap();
    let dump = fs::read(out_dir.join("lambda_field.csv")).unwrap();
    let field =
        LambdaField::load_csv(cfg.grid_spec(), cfg.lambda.e, BufReader::new(dump.as_slice()))
            .expect("dump loads back");

    let mut rewritten = Vec::new();
    field.write_csv(&mut rewritten).unwrap();
    assert_eq!(dump, rewritten, "load then save must reproduce the dump");

    // The bump face must be on the map with nonzero intensity.
    let mapped = dump
        .split(|&b| b == b'\n')
        .skip(1)
        .filter(|line| !line.is_empty())
        .any(|line| {
            let text = std::str::from_utf8(line).unwrap();
            text.rsplit(',').next().unwrap().parse::<f64>().unwrap() > 0.0
        });
    assert!(mapped, "no cell carries intensity after two sweeps");
}
