//! Stage and terminal costs of the perception-aware navigation objective.
//!
//! The stage cost is the sum of four independent terms:
//!
//! * goal: `(-c_pos + c_psi |Δψ|) · exp(-‖p - p_goal‖²)`
//! * action: `‖u‖²_R + ‖u - u_prev‖²_RΔ`
//! * collision: `c_collision` whenever the vehicle's voxel is not known free
//! * perception: a point-of-interest term `c_PoI (1 - ⟨x̂, ĝ⟩)²`, active
//!   farther than `c_thresh` from the goal, plus a ray term from casting a
//!   ray toward the goal through the occupancy grid. The ray term is
//!   `c_free`, `c_unknown` or `c_occupied` depending on where the ray stops,
//!   and is only evaluated every `raytrace_stride`-th rollout step.
//!
//! The terminal value is `c_safe` outside a near-hover safe set.

use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlCommand, QuadState};
use crate::error::{Error, Result};
use crate::mapping::{OccupancyGrid, RayOutcome, FREE};

fn d_c_pos() -> f64 {
    2.5
}
fn d_c_psi() -> f64 {
    1.0
}
fn d_c_collision() -> f64 {
    15.0
}
fn d_c_poi() -> f64 {
    5.0
}
fn d_c_thresh() -> f64 {
    0.5
}
fn d_c_free() -> f64 {
    -5.0
}
fn d_c_unknown() -> f64 {
    -1.0
}
fn d_c_occupied() -> f64 {
    2.0
}
fn d_r() -> [f64; 4] {
    [0.01, 0.1, 0.1, 0.2]
}
fn d_r_delta() -> [f64; 4] {
    [0.02, 0.02, 0.02, 0.05]
}
fn d_v_bound() -> f64 {
    0.1
}
fn d_omega_bound() -> f64 {
    0.5
}
fn d_stride() -> usize {
    10
}

/// Cost weights. Defaults are the published constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    #[serde(default = "d_c_pos")]
    pub c_pos: f64,
    #[serde(default = "d_c_psi")]
    pub c_psi: f64,
    #[serde(default = "d_c_collision")]
    pub c_collision: f64,
    #[serde(default = "d_c_poi")]
    pub c_poi: f64,
    #[serde(default = "d_c_thresh")]
    pub c_thresh: f64,
    #[serde(default = "d_c_free")]
    pub c_free: f64,
    #[serde(default = "d_c_unknown")]
    pub c_unknown: f64,
    #[serde(default = "d_c_occupied")]
    pub c_occupied: f64,
    /// Diagonal of R over (c, ωx, ωy, ωz).
    #[serde(default = "d_r")]
    pub r: [f64; 4],
    /// Diagonal of R_Δ over (c, ωx, ωy, ωz).
    #[serde(default = "d_r_delta")]
    pub r_delta: [f64; 4],
    #[serde(default)]
    pub c_safe: f64,
    #[serde(default = "d_v_bound")]
    pub v_bound: f64,
    #[serde(default = "d_omega_bound")]
    pub omega_bound: f64,
    #[serde(default = "d_stride")]
    pub raytrace_stride: usize,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            c_pos: d_c_pos(),
            c_psi: d_c_psi(),
            c_collision: d_c_collision(),
            c_poi: d_c_poi(),
            c_thresh: d_c_thresh(),
            c_free: d_c_free(),
            c_unknown: d_c_unknown(),
            c_occupied: d_c_occupied(),
            r: d_r(),
            r_delta: d_r_delta(),
            c_safe: 0.0,
            v_bound: d_v_bound(),
            omega_bound: d_omega_bound(),
            raytrace_stride: d_stride(),
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if self.r.iter().chain(&self.r_delta).any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidParameter("R and R_delta entries must be non-negative".into()));
        }
        if !(self.c_collision > 0.0) {
            return Err(Error::InvalidParameter("c_collision must be positive".into()));
        }
        if !(self.c_free < self.c_unknown && self.c_unknown < 0.0 && 0.0 < self.c_occupied) {
            return Err(Error::InvalidParameter("ray costs must satisfy c_free < c_unknown < 0 < c_occupied".into()));
        }
        if self.raytrace_stride == 0 {
            return Err(Error::InvalidParameter("raytrace_stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Goal position and heading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalPose {
    pub position: Vector3<f64>,
    pub yaw: f64,
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    a.sin().atan2(a.cos())
}

pub fn goal_cost(s: &QuadState, goal: &GoalPose, prm: &CostParams) -> f64 {
    let d = s.position - goal.position;
    let dpsi = wrap_angle(s.yaw() - goal.yaw);
    (-prm.c_pos + prm.c_psi * dpsi.abs()) * (-d.norm_squared()).exp()
}

fn weighted_sq(v: &Vector4<f64>, diag: &[f64; 4]) -> f64 {
    (0..4).map(|i| diag[i] * v[i] * v[i]).sum()
}

pub fn action_cost(u: &ControlCommand, u_prev: &ControlCommand, prm: &CostParams) -> f64 {
    let v = u.as_vector();
    weighted_sq(&v, &prm.r) + weighted_sq(&(v - u_prev.as_vector()), &prm.r_delta)
}

pub fn collision_cost(p: &Vector3<f64>, grid: &OccupancyGrid, prm: &CostParams) -> f64 {
    if grid.lookup(p) == FREE {
        0.0
    } else {
        prm.c_collision
    }
}

/// Camera-to-goal alignment term; zero within `c_thresh` of the goal.
pub fn point_of_interest_cost(s: &QuadState, goal: &GoalPose, prm: &CostParams) -> f64 {
    let to_goal = goal.position - s.position;
    let dist = to_goal.norm();
    if dist <= prm.c_thresh {
        return 0.0;
    }
    let misalign = 1.0 - s.forward().dot(&(to_goal / dist));
    prm.c_poi * misalign * misalign
}

pub fn ray_outcome_cost(outcome: RayOutcome, prm: &CostParams) -> f64 {
    match outcome {
        RayOutcome::ReachedGoal => prm.c_free,
        RayOutcome::HitOccupied => prm.c_occupied,
        RayOutcome::HitUnknown | RayOutcome::LeftBounds => prm.c_unknown,
    }
}

/// Ray term: casts from the vehicle toward the goal.
pub fn ray_cost(p: &Vector3<f64>, grid: &OccupancyGrid, goal: &GoalPose, prm: &CostParams) -> f64 {
    ray_outcome_cost(grid.raycast(p, &goal.position).outcome, prm)
}

pub fn perception_cost(
    s: &QuadState,
    grid: &OccupancyGrid,
    goal: &GoalPose,
    prm: &CostParams,
    do_raytrace: bool,
) -> f64 {
    let poi = point_of_interest_cost(s, goal, prm);
    if do_raytrace {
        poi + ray_cost(&s.position, grid, goal, prm)
    } else {
        poi
    }
}

pub fn terminal_cost(s: &QuadState, prm: &CostParams) -> f64 {
    if s.velocity.norm() > prm.v_bound || s.body_rate.norm() > prm.omega_bound {
        prm.c_safe
    } else {
        0.0
    }
}

/// Per-term stage cost. For the tracking controller `goal` holds the
/// tracking term and `perception` is zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub goal: f64,
    pub action: f64,
    pub collision: f64,
    pub perception: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.goal + self.action + self.collision + self.perception
    }
}

/// Whether rollout step `step_index` casts the goal ray.
pub fn raytrace_at(step_index: usize, prm: &CostParams) -> bool {
    step_index % prm.raytrace_stride == 0
}

pub fn stage_cost(
    s: &QuadState,
    u: &ControlCommand,
    u_prev: &ControlCommand,
    grid: &OccupancyGrid,
    goal: &GoalPose,
    prm: &CostParams,
    step_index: usize,
) -> CostBreakdown {
    CostBreakdown {
        goal: goal_cost(s, goal, prm),
        action: action_cost(u, u_prev, prm),
        collision: collision_cost(&s.position, grid, prm),
        perception: perception_cost(s, grid, goal, prm, raytrace_at(step_index, prm)),
    }
}

/// Objective evaluated along MPPI rollouts.
///
/// `step_index` is the rollout step, counted from the state the
/// optimization starts at.
pub trait CostStack: Sync {
    fn stage(&self, s: &QuadState, u: &ControlCommand, u_prev: &ControlCommand, step_index: usize) -> CostBreakdown;
    fn terminal(&self, s: &QuadState) -> f64;
}

/// Goal-reaching objective with the perception terms.
#[derive(Clone, Copy, Debug)]
pub struct PerceptionAwareCost<'a> {
    pub grid: &'a OccupancyGrid,
    pub goal: GoalPose,
    pub params: &'a CostParams,
}

impl CostStack for PerceptionAwareCost<'_> {
    fn stage(&self, s: &QuadState, u: &ControlCommand, u_prev: &ControlCommand, step_index: usize) -> CostBreakdown {
        stage_cost(s, u, u_prev, self.grid, &self.goal, self.params, step_index)
    }

    fn terminal(&self, s: &QuadState) -> f64 {
        terminal_cost(s, self.params)
    }
}
