//! Sampling-based receding-horizon controller with a hard risk constraint.
//!
//! Each tick the planner rolls out a fixed family of control candidates with
//! the discrete bicycle model, drops every candidate whose expected
//! compression energy exceeds the threshold, and picks the cheapest survivor
//! by tracking cost. Risk is a constraint, not a penalty: no trade-off
//! weight can buy risk back. A full-stop candidate is always in the family,
//! so the feasible set is never empty.

use crate::dem::ElevationMap;
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point2};
use crate::lambda_field::LambdaField;
use crate::risk::{expected_path_risk, WheelModel};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Planar pose. `theta` is kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// One control sample: forward speed and front steering angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub v: f64,
    pub delta: f64,
}

impl ControlInput {
    pub const STOP: ControlInput = ControlInput { v: 0.0, delta: 0.0 };
}

/// Horizon, model and cost parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Distance between axles, m.
    pub wheelbase: f64,
    /// Control period, s.
    pub dt: f64,
    /// Number of steps per rollout.
    pub horizon: usize,
    /// Stage weights on (x, y, theta) tracking error.
    pub q: [f64; 3],
    /// Terminal weights on (x, y, theta) tracking error.
    pub q_n: [f64; 3],
    /// Weight on (v - v_max)^2, rewards progress.
    pub w_v: f64,
    pub v_max: f64,
    /// Steering limit, rad. Must stay below pi/2.
    pub delta_max: f64,
    /// Expected-risk budget per candidate, J.
    pub r_threshold: f64,
    /// Lateral footprint used for terrain lookups, m.
    pub track_width: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            wheelbase: 1.0,
            dt: 0.1,
            horizon: 60,
            q: [0.05; 3],
            q_n: [1.0; 3],
            w_v: 0.1,
            v_max: 1.5,
            delta_max: 11f64.to_radians(),
            r_threshold: 0.0,
            track_width: 0.8,
        }
    }
}

/// One explicit Euler step of the bicycle model. Rejects `|delta| >= pi/2`
/// (tan blows up there and the model stops meaning anything).
pub fn step_model(s: &VehicleState, u: &ControlInput, wheelbase: f64, dt: f64) -> Result<VehicleState> {
    if !u.delta.is_finite() || u.delta.abs() >= FRAC_PI_2 {
        return Err(Error::InvalidSteering(u.delta));
    }
    Ok(VehicleState::new(
        s.x + dt * u.v * s.theta.cos(),
        s.y + dt * u.v * s.theta.sin(),
        s.theta + dt * u.v * u.delta.tan() / wheelbase,
    ))
}

/// A start pose plus the visited poses with the control that produced each.
/// `steps[k].0` is the pose after applying `steps[k].1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: VehicleState,
    pub steps: Vec<(VehicleState, ControlInput)>,
}

impl Trajectory {
    /// All poses in order, start first. Length is `steps.len() + 1`.
    pub fn states(&self) -> impl Iterator<Item = VehicleState> + '_ {
        std::iter::once(self.start).chain(self.steps.iter().map(|(s, _)| *s))
    }

    pub fn final_state(&self) -> VehicleState {
        self.steps.last().map_or(self.start, |(s, _)| *s)
    }
}

/// Integrates a control sequence from `start`.
pub fn rollout(start: &VehicleState, controls: &[ControlInput], cfg: &PlannerConfig) -> Result<Trajectory> {
    let mut steps = Vec::with_capacity(controls.len());
    let mut s = *start;
    for u in controls {
        s = step_model(&s, u, cfg.wheelbase, cfg.dt)?;
        steps.push((s, *u));
    }
    Ok(Trajectory { start: *start, steps })
}

/// Resamples a waypoint polyline at fixed arc-length spacing. Headings point
/// along the active segment; the final point keeps the last segment's
/// heading. Intended spacing is `v_max * dt` so one reference index roughly
/// matches one full-speed step.
pub fn resample_polyline(points: &[Point2], spacing: f64) -> Vec<VehicleState> {
    assert!(spacing > 0.0, "spacing must be > 0");
    match points {
        [] => return Vec::new(),
        [p] => return vec![VehicleState::new(p.x, p.y, 0.0)],
        _ => {}
    }
    let mut out = Vec::new();
    // Arc length of the next sample to emit.
    let mut next = 0.0;
    let mut walked = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = a.distance(b);
        if len == 0.0 {
            continue;
        }
        let theta = (b.y - a.y).atan2(b.x - a.x);
        while next <= walked + len {
            let t = (next - walked) / len;
            out.push(VehicleState::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), theta));
            next += spacing;
        }
        walked += len;
    }
    // Keep the exact endpoint unless a sample already landed on it.
    let last = *points.last().unwrap();
    if out.last().map_or(true, |s| s.position().distance(last) > 1e-9) {
        let prev = points[points.len() - 2];
        let theta = if prev.distance(last) > 0.0 {
            (last.y - prev.y).atan2(last.x - prev.x)
        } else {
            out.last().map_or(0.0, |s| s.theta)
        };
        out.push(VehicleState::new(last.x, last.y, theta));
    }
    out
}

/// Picks the reference window for one plan: the `horizon + 1` poses starting
/// at the reference point nearest to `s`, repeating the final pose once the
/// track runs out. The repeated tail pulls the terminal cost toward the far
/// end of the track, so a track that stops short of where driving should
/// stop will brake the vehicle; scenario tracks therefore extend past their
/// goal line.
pub fn reference_slice(refs: &[VehicleState], s: &VehicleState, cfg: &PlannerConfig) -> Result<Vec<VehicleState>> {
    if refs.is_empty() {
        return Err(Error::EmptyReference);
    }
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (i, r) in refs.iter().enumerate() {
        let d2 = (r.x - s.x).powi(2) + (r.y - s.y).powi(2);
        if d2 < best_d2 {
            best_d2 = d2;
            best = i;
        }
    }
    Ok((0..=cfg.horizon).map(|j| refs[(best + j).min(refs.len() - 1)]).collect())
}

/// Tracking cost of one rollout against a reference window of
/// `horizon + 1` poses: stage errors under `q` for steps 0..horizon-1 (the
/// start pose is not scored, it is not a decision), the final pose under
/// `q_n`, plus `w_v * (v - v_max)^2` per step. Heading errors are wrapped.
pub fn cost(traj: &Trajectory, window: &[VehicleState], cfg: &PlannerConfig) -> f64 {
    let n = traj.steps.len();
    assert!(window.len() >= n + 1, "reference window shorter than horizon");
    let mut z = 0.0;
    for (k, (s, u)) in traj.steps.iter().enumerate() {
        let r = &window[k + 1];
        let (ex, ey, et) = (s.x - r.x, s.y - r.y, wrap_angle(s.theta - r.theta));
        let w = if k + 1 == n { &cfg.q_n } else { &cfg.q };
        z += w[0] * ex * ex + w[1] * ey * ey + w[2] * et * et;
        let dv = u.v - cfg.v_max;
        z += cfg.w_v * dv * dv;
    }
    z
}

/// Why the planner chose what it chose, for traces and tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanDiagnostics {
    /// Tracking cost of the winner.
    pub cost: f64,
    /// Expected compression energy of the winner, J.
    pub expected_risk: f64,
    pub candidates_evaluated: usize,
    /// Candidates that passed the risk constraint.
    pub feasible_count: usize,
}

/// Receding-horizon planner. Stateful only through the warm start: keeping
/// the previous winner in the family stops the controller from flapping
/// between near-ties.
#[derive(Debug, Clone)]
pub struct Planner {
    cfg: PlannerConfig,
    wheel: WheelModel,
    previous: Option<Vec<ControlInput>>,
}

impl Planner {
    pub fn new(cfg: PlannerConfig, wheel: WheelModel) -> Self {
        assert!(cfg.wheelbase > 0.0, "wheelbase must be > 0");
        assert!(cfg.dt > 0.0, "dt must be > 0");
        assert!(cfg.horizon >= 1, "horizon must be >= 1");
        assert!(cfg.v_max > 0.0, "v_max must be > 0");
        assert!(cfg.delta_max > 0.0 && cfg.delta_max < FRAC_PI_2, "delta_max must lie in (0, pi/2)");
        assert!(cfg.r_threshold >= 0.0, "risk threshold must be >= 0");
        assert!(cfg.track_width > 0.0, "track width must be > 0");
        Self { cfg, wheel, previous: None }
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    /// Forgets the warm start, e.g. after teleporting the robot in tests.
    pub fn reset(&mut self) {
        self.previous = None;
    }

    /// Plans one tick. Returns the winning control sequence (apply the first
    /// element) and diagnostics. The stop candidate keeps this total: it
    /// never moves, so its expected risk is exactly zero and it survives any
    /// threshold.
    pub fn plan(
        &mut self,
        s: &VehicleState,
        refs: &[VehicleState],
        field: &LambdaField,
        dem: &ElevationMap,
    ) -> Result<(Vec<ControlInput>, PlanDiagnostics)> {
        let window = reference_slice(refs, s, &self.cfg)?;
        let candidates = self.candidates();
        let mut evaluated = 0;
        let mut feasible = 0;
        let mut best: Option<(f64, f64, usize)> = None;
        for (i, cand) in candidates.iter().enumerate() {
            evaluated += 1;
            let Ok(traj) = rollout(s, cand, &self.cfg) else { continue };
            // Off-map stretches of a rollout carry no mapped evidence and
            // score zero risk, so map edges never starve the feasible set.
            let Ok(profile) =
                expected_path_risk(field, dem, &traj, &self.wheel, self.cfg.track_width)
            else {
                continue;
            };
            let e = profile.expected_risk;
            if !(e <= self.cfg.r_threshold) {
                continue;
            }
            feasible += 1;
            let z = cost(&traj, &window, &self.cfg);
            let wins = match best {
                None => true,
                Some((bz, be, _)) => z < bz || (z == bz && e < be),
            };
            if wins {
                best = Some((z, e, i));
            }
        }
        let (z, e, idx) = best.expect("stop candidate is always feasible");
        let chosen = candidates[idx].clone();
        self.previous = Some(chosen.clone());
        Ok((
            chosen,
            PlanDiagnostics {
                cost: z,
                expected_risk: e,
                candidates_evaluated: evaluated,
                feasible_count: feasible,
            },
        ))
    }

    fn clamp(&self, u: ControlInput) -> ControlInput {
        ControlInput {
            v: u.v.clamp(0.0, self.cfg.v_max),
            delta: u.delta.clamp(-self.cfg.delta_max, self.cfg.delta_max),
        }
    }

    /// The candidate family, in fixed order. Ordering matters: ties in
    /// (cost, risk) resolve to the lowest index, and index 0 is the stop.
    fn candidates(&self) -> Vec<Vec<ControlInput>> {
        let n = self.cfg.horizon;
        let dmax = self.cfg.delta_max;
        let mut out: Vec<Vec<ControlInput>> = Vec::new();
        out.push(vec![ControlInput::STOP; n]);

        // Constant-control lattice: 15 speeds x 7 steering angles.
        for i in 1..=15 {
            let v = self.cfg.v_max * i as f64 / 15.0;
            for j in -3i32..=3 {
                let delta = dmax * j as f64 / 3.0;
                out.push(vec![self.clamp(ControlInput { v, delta }); n]);
            }
        }

        // Steer for a prefix, then run straight.
        let prefixes = [n / 6, n / 3, n / 2];
        for &vf in &[1.0, 0.75, 0.5] {
            let v = self.cfg.v_max * vf;
            for &df in &[1.0, 0.5, -0.5, -1.0] {
                for &j in &prefixes {
                    let j = j.clamp(1, n);
                    let mut cand = vec![self.clamp(ControlInput { v, delta: 0.0 }); n];
                    for c in cand.iter_mut().take(j) {
                        *c = self.clamp(ControlInput { v, delta: dmax * df });
                    }
                    out.push(cand);
                }
            }
        }

        // Lane change: steer out, mirror back, go straight. Ends roughly
        // parallel to the original heading but laterally offset.
        let half_lengths = [n / 6, n / 4, n / 3, (5 * n) / 12, n / 2];
        for &vf in &[1.0, 2.0 / 3.0, 1.0 / 3.0] {
            let v = self.cfg.v_max * vf;
            for &df in &[1.0, -1.0, 0.5, -0.5] {
                for &j in &half_lengths {
                    let j = j.clamp(1, n / 2);
                    let mut cand = vec![self.clamp(ControlInput { v, delta: 0.0 }); n];
                    for c in cand.iter_mut().take(j) {
                        *c = self.clamp(ControlInput { v, delta: dmax * df });
                    }
                    for c in cand.iter_mut().skip(j).take(j) {
                        *c = self.clamp(ControlInput { v, delta: -dmax * df });
                    }
                    out.push(cand);
                }
            }
        }

        // Warm start: last winner shifted one step, plus small perturbations.
        if let Some(prev) = &self.previous {
            let mut shifted: Vec<ControlInput> = prev.iter().skip(1).copied().collect();
            shifted.resize(n, *prev.last().unwrap_or(&ControlInput::STOP));
            out.push(shifted.clone());
            for &dd in &[dmax / 6.0, -dmax / 6.0] {
                out.push(
                    shifted
                        .iter()
                        .map(|u| self.clamp(ControlInput { v: u.v, delta: u.delta + dd }))
                        .collect(),
                );
            }
            for &vs in &[0.8, 1.2] {
                out.push(
                    shifted
                        .iter()
                        .map(|u| self.clamp(ControlInput { v: u.v * vs, delta: u.delta }))
                        .collect(),
                );
            }
        }
        out
    }
}
