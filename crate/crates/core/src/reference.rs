//! Tracking baseline: a rest-to-rest minimum-jerk reference along the
//! straight line to the goal, and the cost stack that tracks it.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::costs::{action_cost, collision_cost, terminal_cost, wrap_angle, CostBreakdown, CostParams, CostStack};
use crate::dynamics::{ControlCommand, QuadState};
use crate::error::{Error, Result};
use crate::mapping::OccupancyGrid;

fn d_q_pos() -> f64 {
    2.5
}
fn d_q_yaw() -> f64 {
    1.0
}
fn d_duration() -> f64 {
    4.0
}
fn d_waypoints() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingParams {
    #[serde(default = "d_q_pos")]
    pub q_pos: f64,
    #[serde(default = "d_q_yaw")]
    pub q_yaw: f64,
    #[serde(default = "d_duration")]
    pub duration: f64,
    #[serde(default = "d_waypoints")]
    pub waypoints: usize,
}

impl Default for TrackingParams {
    fn default() -> Self {
        Self { q_pos: d_q_pos(), q_yaw: d_q_yaw(), duration: d_duration(), waypoints: d_waypoints() }
    }
}

impl TrackingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || self.waypoints < 2 || !(self.q_pos >= 0.0) || !(self.q_yaw >= 0.0) {
            return Err(Error::InvalidParameter("tracking: duration > 0, waypoints >= 2, weights >= 0".into()));
        }
        Ok(())
    }
}

/// `n` points evenly spaced from `start` to `goal`, both included.
pub fn straight_line_waypoints(start: &Vector3<f64>, goal: &Vector3<f64>, n: usize) -> Vec<Vector3<f64>> {
    assert!(n >= 2, "at least two waypoints are required");
    (0..n).map(|i| start + (goal - start) * (i as f64 / (n - 1) as f64)).collect()
}

/// Normalized quintic `10τ³ - 15τ⁴ + 6τ⁵` and its first two derivatives.
pub fn min_jerk_profile(tau: f64) -> (f64, f64, f64) {
    let t = tau.clamp(0.0, 1.0);
    let t2 = t * t;
    let t3 = t2 * t;
    (
        t3 * (10.0 - 15.0 * t + 6.0 * t2),
        30.0 * t2 * (1.0 - t) * (1.0 - t),
        60.0 * t * (1.0 - 3.0 * t + 2.0 * t2),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSample {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub yaw: f64,
}

/// Path parameterized by arc length and timed by the minimum-jerk profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrajectory {
    waypoints: Vec<Vector3<f64>>,
    cumulative: Vec<f64>,
    duration: f64,
    final_yaw: f64,
}

const REST_SPEED: f64 = 1e-3;

pub fn min_jerk_trajectory(waypoints: &[Vector3<f64>], duration: f64, final_yaw: f64) -> Result<ReferenceTrajectory> {
    if !(duration > 0.0) || waypoints.is_empty() {
        return Err(Error::InvalidParameter("reference needs a positive duration and waypoints".into()));
    }
    let mut cumulative = vec![0.0];
    for w in waypoints.windows(2) {
        cumulative.push(cumulative.last().unwrap() + (w[1] - w[0]).norm());
    }
    Ok(ReferenceTrajectory { waypoints: waypoints.to_vec(), cumulative, duration, final_yaw })
}

impl ReferenceTrajectory {
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn along(&self, arc: f64) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.waypoints.len();
        if n == 1 || self.length() == 0.0 {
            return (self.waypoints[n - 1], Vector3::zeros());
        }
        let seg = self.cumulative[1..].iter().position(|&c| c >= arc).unwrap_or(n - 2);
        let a = self.waypoints[seg];
        let b = self.waypoints[seg + 1];
        let len = self.cumulative[seg + 1] - self.cumulative[seg];
        if len == 0.0 {
            return (a, Vector3::zeros());
        }
        let dir = (b - a) / len;
        (a + dir * (arc - self.cumulative[seg]), dir)
    }

    /// Reference at time `t`, clamped to `[0, duration]`.
    pub fn sample(&self, t: f64) -> ReferenceSample {
        let (s, ds, _) = min_jerk_profile(t / self.duration);
        let (position, dir) = self.along(s * self.length());
        let velocity = dir * (ds * self.length() / self.duration);
        let yaw = if velocity.norm() > REST_SPEED { velocity.y.atan2(velocity.x) } else { self.final_yaw };
        ReferenceSample { position, velocity, yaw }
    }

    /// Positions at `n` evenly spaced times, for plotting.
    pub fn polyline(&self, n: usize) -> Vec<Vector3<f64>> {
        (0..n).map(|i| self.sample(self.duration * i as f64 / (n.max(2) - 1) as f64).position).collect()
    }
}

pub fn tracking_stage_cost(s: &QuadState, t: f64, reference: &ReferenceTrajectory, prm: &TrackingParams) -> f64 {
    let r = reference.sample(t);
    prm.q_pos * (s.position - r.position).norm_squared() + prm.q_yaw * wrap_angle(s.yaw() - r.yaw).abs()
}

/// Baseline objective: the tracking term replaces the goal term and the
/// perception term is dropped. Rollout step `i` is evaluated against the
/// reference at `t0 + i · dt_pred`.
#[derive(Clone, Copy, Debug)]
pub struct TrackingCost<'a> {
    pub grid: &'a OccupancyGrid,
    pub reference: &'a ReferenceTrajectory,
    pub params: &'a CostParams,
    pub tracking: &'a TrackingParams,
    pub t0: f64,
    pub dt_pred: f64,
}

impl CostStack for TrackingCost<'_> {
    fn stage(&self, s: &QuadState, u: &ControlCommand, u_prev: &ControlCommand, step_index: usize) -> CostBreakdown {
        let t = self.t0 + step_index as f64 * self.dt_pred;
        CostBreakdown {
            goal: tracking_stage_cost(s, t, self.reference, self.tracking),
            action: action_cost(u, u_prev, self.params),
            collision: collision_cost(&s.position, self.grid, self.params),
            perception: 0.0,
        }
    }

    fn terminal(&self, s: &QuadState) -> f64 {
        terminal_cost(s, self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::{GoalPose, PerceptionAwareCost};
    use crate::mapping::{GridGeometry, FREE};
    use proptest::prelude::*;

    fn line() -> ReferenceTrajectory {
        let w = straight_line_waypoints(&Vector3::new(0.5, 2.0, 1.0), &Vector3::new(3.5, 2.0, 1.0), 10);
        min_jerk_trajectory(&w, 4.0, 0.0).unwrap()
    }

    #[test]
    fn waypoint_examples() {
        let a = Vector3::new(0.0, 0.0, 1.0);
        let b = Vector3::new(3.0, 0.0, 1.0);
        assert_eq!(straight_line_waypoints(&a, &b, 2), vec![a, b]);
        assert_eq!(straight_line_waypoints(&a, &b, 3)[1], Vector3::new(1.5, 0.0, 1.0));
        let c = Vector3::new(1.0, -2.0, 0.5);
        for p in straight_line_waypoints(&a, &c, 17) {
            let cross = (p - a).cross(&(c - a)).norm();
            assert!(cross < 1e-12);
        }
    }

    #[test]
    fn boundary_conditions() {
        let r = line();
        let s0 = r.sample(0.0);
        assert_eq!(s0.position, Vector3::new(0.5, 2.0, 1.0));
        assert_eq!(s0.velocity, Vector3::zeros());
        let s1 = r.sample(4.0);
        assert!((s1.position - Vector3::new(3.5, 2.0, 1.0)).norm() < 1e-12);
        assert_eq!(s1.velocity.norm(), 0.0);
        assert_eq!(r.sample(10.0), s1);
        assert!((r.sample(2.0).position - Vector3::new(2.0, 2.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn peak_speed() {
        let r = line();
        let peak = (0..=4000).map(|i| r.sample(i as f64 * 1e-3).velocity.norm()).fold(0.0, f64::max);
        assert!((peak - 15.0 / 8.0 * 3.0 / 4.0).abs() < 1e-9);
        assert!((r.sample(2.0).velocity.norm() - 1.40625).abs() < 1e-12);
    }

    #[test]
    fn velocity_matches_finite_difference() {
        let r = line();
        let h = 1e-6;
        for i in 1..40 {
            let t = i as f64 * 0.1;
            let fd = (r.sample(t + h).position - r.sample(t - h).position) / (2.0 * h);
            assert!((fd - r.sample(t).velocity).norm() < 1e-6);
        }
        let (_, _, acc0) = min_jerk_profile(0.0);
        let (_, _, acc1) = min_jerk_profile(1.0);
        assert_eq!((acc0, acc1), (0.0, 0.0));
    }

    #[test]
    fn tracking_cost_examples() {
        let r = line();
        let prm = TrackingParams::default();
        let on = QuadState::at_rest(r.sample(1.3).position, r.sample(1.3).yaw);
        assert_eq!(tracking_stage_cost(&on, 1.3, &r, &prm), 0.0);
        let off = QuadState::at_rest(r.sample(1.3).position + Vector3::new(0.0, 1.0, 0.0), 0.0);
        assert!((tracking_stage_cost(&off, 1.3, &r, &prm) - 2.5).abs() < 1e-12);
        let goal_hold = QuadState::at_rest(Vector3::new(3.5, 2.0, 1.0), 0.0);
        assert!(tracking_stage_cost(&goal_hold, 9.0, &r, &prm) < 1e-20);
    }

    #[test]
    fn swapping_goal_term_switches_controller() {
        let g = GridGeometry { origin: Vector3::zeros(), dims: [40, 40, 20], resolution: 0.1 };
        let grid = OccupancyGrid::from_values(g, vec![FREE; g.len()]);
        let prm = CostParams::default();
        let tp = TrackingParams::default();
        let r = line();
        let goal = GoalPose { position: Vector3::new(3.5, 2.0, 1.0), yaw: 0.0 };
        let pa = PerceptionAwareCost { grid: &grid, goal, params: &prm };
        let tr = TrackingCost { grid: &grid, reference: &r, params: &prm, tracking: &tp, t0: 0.5, dt_pred: 0.1 };
        let s = QuadState::at_rest(Vector3::new(1.23, 2.2, 0.9), 0.4);
        let u = ControlCommand::new(2.5, Vector3::new(0.1, 0.2, -0.3));
        let up = ControlCommand::new(2.0, Vector3::zeros());
        for k in 0..15 {
            let a = pa.stage(&s, &u, &up, k);
            let b = tr.stage(&s, &u, &up, k);
            assert_eq!(a.action, b.action);
            assert_eq!(a.collision, b.collision);
            assert_eq!(b.perception, 0.0);
            assert_eq!(b.goal, tracking_stage_cost(&s, 0.5 + k as f64 * 0.1, &r, &tp));
        }
        assert_eq!(pa.terminal(&s), tr.terminal(&s));
    }

    proptest! {
        #[test]
        fn tracking_cost_non_negative(p in prop::array::uniform3(-1.0..5.0f64), yaw in -4.0..4.0f64, t in 0.0..6.0f64) {
            let r = line();
            let c = tracking_stage_cost(&QuadState::at_rest(Vector3::from(p), yaw), t, &r, &TrackingParams::default());
            prop_assert!(c >= 0.0);
            let on_ref = r.sample(t);
            let zero = tracking_stage_cost(&QuadState::at_rest(on_ref.position, on_ref.yaw), t, &r, &TrackingParams::default());
            prop_assert!(zero < 1e-20);
            if (Vector3::from(p) - on_ref.position).norm() > 1e-6 {
                prop_assert!(c > 0.0);
            }
        }

        #[test]
        fn waypoint_count_does_not_matter(n in 2usize..40, t in 0.0..4.0f64) {
            let a = Vector3::new(0.5, 2.0, 1.0);
            let b = Vector3::new(3.5, 1.0, 1.5);
            let r1 = min_jerk_trajectory(&straight_line_waypoints(&a, &b, n), 4.0, 0.0).unwrap();
            let r2 = min_jerk_trajectory(&[a, b], 4.0, 0.0).unwrap();
            prop_assert!((r1.sample(t).position - r2.sample(t).position).norm() < 1e-9);
            prop_assert!((r1.sample(t).velocity - r2.sample(t).velocity).norm() < 1e-9);
        }
    }
}
