//! Closed-loop episodes on a virtual clock.
//!
//! Control runs every tick at `control_rate`. Depth frames and map
//! snapshots are scheduled at `render_rate` and `snapshot_rate` and are
//! processed on the first control tick at or after their due time. Each tick
//! renders any due frame from the current pose, publishes any due snapshot,
//! runs the optimizer against the latest published snapshot, advances the
//! plant by one control period and then classifies the new state.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use nalgebra::{UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::{wrap_angle, CostBreakdown, CostParams, GoalPose, PerceptionAwareCost};
use crate::dynamics::{ControlCommand, QuadModel, QuadParams, QuadState};
use crate::error::{Error, Result};
use crate::mapping::{OccupancyGrid, SnapshotSlot, VoxelMap};
use crate::mppi::{control_step, ControlSequence, Diagnostics, MppiConfig};
use crate::reference::{min_jerk_trajectory, straight_line_waypoints, TrackingCost, TrackingParams};
use crate::world::{build_scene, CameraIntrinsics, CameraPose, DepthImage, Scene, SceneFamily, SceneSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Controller {
    PaMppi,
    TrackingMppi,
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::PaMppi => "pa-mppi",
            Controller::TrackingMppi => "tracking-mppi",
        }
    }
}

impl std::str::FromStr for Controller {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pa-mppi" => Ok(Controller::PaMppi),
            "tracking-mppi" => Ok(Controller::TrackingMppi),
            other => Err(Error::Config(format!("unknown controller `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitObservation {
    /// One forward frame.
    None,
    /// Frames over a -90° to +90° yaw sweep at the start position.
    YawSweep,
}

fn d_timeout() -> f64 {
    30.0
}
fn d_pos_tol() -> f64 {
    0.2
}
fn d_yaw_tol() -> f64 {
    0.26
}
fn d_speed_tol() -> f64 {
    0.1
}
fn d_stuck_window() -> f64 {
    5.0
}
fn d_stuck_distance() -> f64 {
    0.1
}
fn d_init() -> InitObservation {
    InitObservation::YawSweep
}
fn d_sweep_duration() -> f64 {
    1.0
}
fn d_control_rate() -> f64 {
    50.0
}
fn d_render_rate() -> f64 {
    30.0
}
fn d_snapshot_rate() -> f64 {
    10.0
}
fn d_map_resolution() -> f64 {
    0.1
}
fn d_controller() -> Controller {
    Controller::PaMppi
}
fn d_true() -> bool {
    true
}

/// Episode-level settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    #[serde(default)]
    pub scene: SceneSpec,
    #[serde(default = "d_controller")]
    pub controller: Controller,
    /// Seeds the optimizer noise.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_timeout")]
    pub timeout: f64,
    #[serde(default = "d_pos_tol")]
    pub goal_pos_tol: f64,
    #[serde(default = "d_yaw_tol")]
    pub goal_yaw_tol: f64,
    #[serde(default = "d_speed_tol")]
    pub goal_speed_tol: f64,
    /// The episode is stuck once the vehicle ends up within `stuck_distance`
    /// of where it was `stuck_window` seconds earlier.
    #[serde(default = "d_stuck_window")]
    pub stuck_window: f64,
    #[serde(default = "d_stuck_distance")]
    pub stuck_distance: f64,
    #[serde(default = "d_init")]
    pub init_observation: InitObservation,
    #[serde(default = "d_sweep_duration")]
    pub sweep_duration: f64,
    #[serde(default = "d_control_rate")]
    pub control_rate: f64,
    #[serde(default = "d_render_rate")]
    pub render_rate: f64,
    #[serde(default = "d_snapshot_rate")]
    pub snapshot_rate: f64,
    #[serde(default = "d_map_resolution")]
    pub map_resolution: f64,
    /// Keep the per-tick log in the result.
    #[serde(default = "d_true")]
    pub record_trajectory: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            scene: SceneSpec::default(),
            controller: d_controller(),
            seed: 0,
            timeout: d_timeout(),
            goal_pos_tol: d_pos_tol(),
            goal_yaw_tol: d_yaw_tol(),
            goal_speed_tol: d_speed_tol(),
            stuck_window: d_stuck_window(),
            stuck_distance: d_stuck_distance(),
            init_observation: d_init(),
            sweep_duration: d_sweep_duration(),
            control_rate: d_control_rate(),
            render_rate: d_render_rate(),
            snapshot_rate: d_snapshot_rate(),
            map_resolution: d_map_resolution(),
            record_trajectory: true,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("timeout", self.timeout),
            ("goal_pos_tol", self.goal_pos_tol),
            ("goal_yaw_tol", self.goal_yaw_tol),
            ("goal_speed_tol", self.goal_speed_tol),
            ("stuck_window", self.stuck_window),
            ("control_rate", self.control_rate),
            ("render_rate", self.render_rate),
            ("snapshot_rate", self.snapshot_rate),
            ("map_resolution", self.map_resolution),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.stuck_distance >= 0.0) || !(self.sweep_duration >= 0.0) {
            return Err(Error::InvalidParameter("stuck_distance and sweep_duration must be non-negative".into()));
        }
        Ok(())
    }
}

/// Every parameter block needed to run an episode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeSetup {
    pub quad: QuadParams,
    pub mppi: MppiConfig,
    pub costs: CostParams,
    pub camera: CameraIntrinsics,
    pub tracking: TrackingParams,
    pub episode: EpisodeConfig,
}

impl EpisodeSetup {
    pub fn validate(&self) -> Result<()> {
        self.quad.validate()?;
        self.mppi.validate()?;
        self.costs.validate()?;
        self.camera.validate()?;
        self.tracking.validate()?;
        self.episode.validate()?;
        let dt = 1.0 / self.episode.control_rate;
        if (dt - self.mppi.dt_ctrl).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "control_rate {} Hz does not match dt_ctrl {} s",
                self.episode.control_rate, self.mppi.dt_ctrl
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    Success,
    Stuck,
    Collision,
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::Success => "Success",
            Termination::Stuck => "Stuck",
            Termination::Collision => "Collision",
        }
    }
}

/// One control tick: the state before the command, the command and the
/// optimizer diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub t: f64,
    pub p: [f64; 3],
    /// Orientation as (w, x, y, z).
    pub q: [f64; 4],
    pub v: [f64; 3],
    pub omega: [f64; 3],
    /// (c, ωx, ωy, ωz).
    pub command: [f64; 4],
    pub costs: CostBreakdown,
    #[serde(rename = "L_min")]
    pub l_min: f64,
    #[serde(rename = "ESS")]
    pub ess: f64,
    pub snapshot_version: u64,
}

impl LogEntry {
    fn new(t: f64, s: &QuadState, u: &ControlCommand, d: &Diagnostics, version: u64) -> Self {
        let q = s.orientation.quaternion();
        Self {
            t,
            p: s.position.into(),
            q: [q.w, q.i, q.j, q.k],
            v: s.velocity.into(),
            omega: s.body_rate.into(),
            command: u.as_vector().into(),
            costs: d.executed,
            l_min: d.l_min,
            ess: d.ess,
            snapshot_version: version,
        }
    }
}

/// Scalar outcome of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub controller: Controller,
    pub family: SceneFamily,
    pub size: f64,
    pub scene_seed: u64,
    pub seed: u64,
    pub termination: Termination,
    /// Virtual time at termination.
    pub duration_s: f64,
    pub time_to_goal_s: Option<f64>,
    pub max_penetration_m: f64,
    /// The optimizer discarded every rollout at some tick.
    pub starved: bool,
    pub final_coverage: f64,
    pub final_position: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub summary: EpisodeSummary,
    pub trajectory: Vec<LogEntry>,
    /// Known-voxel fraction at each published snapshot.
    pub coverage: Vec<(f64, f64)>,
    pub final_grid: OccupancyGrid,
    pub scene: Scene,
    /// Counts of control ticks, rendered frames and published snapshots
    /// after the initial observation.
    pub events: EventCounts,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub ticks: u64,
    pub renders: u64,
    pub snapshots: u64,
}

fn camera_pose(s: &QuadState) -> CameraPose {
    CameraPose { position: s.position, orientation: s.orientation }
}

/// Integrates the initial observation into `map`.
///
/// The sweep spans `sweep_duration` at the render rate, at least two frames.
pub fn init_observation(
    mode: InitObservation,
    scene: &Scene,
    map: &mut VoxelMap,
    image: &mut DepthImage,
    render_rate: f64,
    sweep_duration: f64,
) {
    let start = scene.start;
    let yaws: Vec<f64> = match mode {
        InitObservation::None => vec![start.yaw],
        InitObservation::YawSweep => {
            let frames = ((sweep_duration * render_rate).round() as usize).max(1) + 1;
            (0..frames)
                .map(|i| start.yaw - FRAC_PI_2 + std::f64::consts::PI * i as f64 / (frames - 1) as f64)
                .collect()
        }
    };
    for yaw in yaws {
        let pose = CameraPose {
            position: start.position,
            orientation: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
        };
        scene.render_depth_into(&pose, image);
        map.insert_depth(image, &pose);
    }
}

/// Number of events of a `rate` schedule that are due by time `t`.
fn due(t: f64, rate: f64) -> u64 {
    (t * rate + 1e-9).floor() as u64 + 1
}

fn mix_seed(a: u64, b: u64) -> u64 {
    a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17)
}

pub fn run_episode(setup: &EpisodeSetup) -> Result<EpisodeResult> {
    setup.validate()?;
    let ep = &setup.episode;
    let scene = build_scene(&ep.scene)?;
    let model = QuadModel::new(setup.quad.clone())?;
    let dt = setup.mppi.dt_ctrl;

    let mut map = VoxelMap::new(&scene.bounds, ep.map_resolution);
    let mut image = DepthImage::empty(setup.camera.clone());
    init_observation(ep.init_observation, &scene, &mut map, &mut image, ep.render_rate, ep.sweep_duration);
    let slot = SnapshotSlot::new(map.snapshot());

    let goal = GoalPose { position: scene.goal.position, yaw: scene.goal.yaw };
    let reference = {
        let w = straight_line_waypoints(&scene.start.position, &scene.goal.position, setup.tracking.waypoints);
        min_jerk_trajectory(&w, setup.tracking.duration, scene.goal.yaw)?
    };

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(setup.mppi.seed, ep.seed));
    let hover = setup.quad.hover_command();
    let mut nominal = ControlSequence::constant(hover, setup.mppi.horizon);
    let mut u_last = hover;
    let mut state = QuadState::at_rest(scene.start.position, scene.start.yaw);

    let max_ticks = (ep.timeout * ep.control_rate).round() as u64;
    let window_ticks = (ep.stuck_window * ep.control_rate).round() as usize;
    let mut history = vec![state.position];
    let mut trajectory = Vec::new();
    let mut coverage = Vec::new();
    let mut events = EventCounts::default();
    let mut max_penetration: f64 = 0.0;
    let mut starved = false;
    let mut termination = Termination::Stuck;
    let mut time_to_goal = None;

    let mut tick: u64 = 0;
    loop {
        let t = tick as f64 * dt;
        if due(t, ep.render_rate) > events.renders {
            events.renders += 1;
            let pose = camera_pose(&state);
            scene.render_depth_into(&pose, &mut image);
            map.insert_depth(&image, &pose);
        }
        if due(t, ep.snapshot_rate) > events.snapshots {
            events.snapshots += 1;
            let snap = map.snapshot();
            coverage.push((t, snap.coverage()));
            slot.publish(snap);
        }
        let grid = slot.latest();

        let step = match ep.controller {
            Controller::PaMppi => {
                let costs = PerceptionAwareCost { grid: &grid, goal, params: &setup.costs };
                control_step(&model, &state, &nominal, &u_last, &costs, &setup.mppi, &mut rng)
            }
            Controller::TrackingMppi => {
                let costs = TrackingCost {
                    grid: &grid,
                    reference: &reference,
                    params: &setup.costs,
                    tracking: &setup.tracking,
                    t0: t,
                    dt_pred: setup.mppi.dt_pred,
                };
                control_step(&model, &state, &nominal, &u_last, &costs, &setup.mppi, &mut rng)
            }
        };
        let step = match step {
            Ok(s) => s,
            Err(Error::Starvation(_)) => {
                starved = true;
                break;
            }
            Err(e) => return Err(e),
        };
        if ep.record_trajectory {
            trajectory.push(LogEntry::new(t, &state, &step.command, &step.diagnostics, grid.version()));
        }
        state = model.step(&state, &step.command, dt)?;
        u_last = step.command;
        nominal = step.next_nominal;
        tick += 1;
        events.ticks += 1;
        let t_next = tick as f64 * dt;
        history.push(state.position);

        let contact = scene.true_collision(&state.position, setup.quad.collision_radius);
        max_penetration = max_penetration.max(contact.penetration);
        if contact.colliding {
            termination = Termination::Collision;
            break;
        }
        let at_goal = (state.position - goal.position).norm() < ep.goal_pos_tol
            && wrap_angle(state.yaw() - goal.yaw).abs() < ep.goal_yaw_tol
            && state.velocity.norm() < ep.goal_speed_tol;
        if at_goal {
            termination = Termination::Success;
            time_to_goal = Some(t_next);
            break;
        }
        if tick >= max_ticks {
            break;
        }
        if history.len() > window_ticks {
            let past = history[history.len() - 1 - window_ticks];
            if (state.position - past).norm() < ep.stuck_distance {
                break;
            }
        }
    }

    let final_grid = (*slot.latest()).clone();
    let summary = EpisodeSummary {
        controller: ep.controller,
        family: ep.scene.family,
        size: ep.scene.size,
        scene_seed: ep.scene.seed,
        seed: ep.seed,
        termination,
        duration_s: tick as f64 * dt,
        time_to_goal_s: time_to_goal,
        max_penetration_m: max_penetration,
        starved,
        final_coverage: final_grid.coverage(),
        final_position: state.position.into(),
    };
    Ok(EpisodeResult { summary, trajectory, coverage, final_grid, scene, events })
}

/// Scenes of one family for a batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchScenes {
    pub family: SceneFamily,
    pub sizes: Vec<f64>,
}

fn d_repeats() -> usize {
    5
}
fn d_controllers() -> Vec<Controller> {
    vec![Controller::PaMppi, Controller::TrackingMppi]
}

/// The cross product of controllers, scenes and repeats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    #[serde(default = "d_controllers")]
    pub controllers: Vec<Controller>,
    #[serde(default)]
    pub scenes: Vec<BatchScenes>,
    #[serde(default = "d_repeats")]
    pub repeats: usize,
    /// Repeat `r` uses seed `seed + r` for both the optimizer and the scene.
    #[serde(default)]
    pub seed: u64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self { controllers: d_controllers(), scenes: Vec::new(), repeats: d_repeats(), seed: 0 }
    }
}

impl BatchConfig {
    pub fn is_empty(&self) -> bool {
        self.controllers.is_empty() || self.repeats == 0 || self.scenes.iter().all(|s| s.sizes.is_empty())
    }

    /// One setup per episode, in table order.
    pub fn expand(&self, base: &EpisodeSetup) -> Vec<EpisodeSetup> {
        let mut out = Vec::new();
        for &controller in &self.controllers {
            for scenes in &self.scenes {
                for &size in &scenes.sizes {
                    for r in 0..self.repeats {
                        let seed = self.seed + r as u64;
                        let mut setup = base.clone();
                        setup.episode.controller = controller;
                        setup.episode.scene = SceneSpec { family: scenes.family, size, seed };
                        setup.episode.seed = seed;
                        out.push(setup);
                    }
                }
            }
        }
        out
    }
}

/// One table cell: a controller on one scene family and size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub controller: Controller,
    pub family: SceneFamily,
    pub size: f64,
    pub repeats: usize,
    pub success_pct: f64,
    pub stuck_pct: f64,
    pub collision_pct: f64,
    /// Mean over successful episodes; `None` without any.
    pub mean_time_to_goal_s: Option<f64>,
    pub mean_penetration_m: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    /// Aggregates per (controller, family, size) in sorted order.
    pub fn from_summaries(summaries: &[EpisodeSummary]) -> Self {
        let mut cells: BTreeMap<(Controller, SceneFamily, u64), Vec<&EpisodeSummary>> = BTreeMap::new();
        for s in summaries {
            cells.entry((s.controller, s.family, s.size.to_bits())).or_default().push(s);
        }
        let mut rows: Vec<SummaryRow> = cells
            .into_values()
            .map(|eps| {
                let n = eps.len() as f64;
                let pct = |k: Termination| 100.0 * eps.iter().filter(|e| e.termination == k).count() as f64 / n;
                let times: Vec<f64> = eps.iter().filter_map(|e| e.time_to_goal_s).collect();
                SummaryRow {
                    controller: eps[0].controller,
                    family: eps[0].family,
                    size: eps[0].size,
                    repeats: eps.len(),
                    success_pct: pct(Termination::Success),
                    stuck_pct: pct(Termination::Stuck),
                    collision_pct: pct(Termination::Collision),
                    mean_time_to_goal_s: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
                    mean_penetration_m: eps.iter().map(|e| e.max_penetration_m).sum::<f64>() / n,
                }
            })
            .collect();
        rows.sort_by(|a, b| {
            (a.controller, a.family).cmp(&(b.controller, b.family)).then(a.size.total_cmp(&b.size))
        });
        Self { rows }
    }

    pub fn row(&self, controller: Controller, family: SceneFamily, size: f64) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.controller == controller && r.family == family && r.size == size)
    }

    /// Plain-text table with one column per (family, size) and three rows
    /// per controller.
    pub fn render_text(&self) -> String {
        let mut columns: Vec<(SceneFamily, u64)> = self.rows.iter().map(|r| (r.family, r.size.to_bits())).collect();
        columns.sort_by(|a, b| a.0.cmp(&b.0).then(f64::from_bits(a.1).total_cmp(&f64::from_bits(b.1))));
        columns.dedup();
        let mut controllers: Vec<Controller> = self.rows.iter().map(|r| r.controller).collect();
        controllers.sort();
        controllers.dedup();

        let mut out = format!("{:<24}", "");
        for (family, size) in &columns {
            out.push_str(&format!("{:>14}", format!("{} {}", family.name(), f64::from_bits(*size))));
        }
        out.push('\n');
        for c in controllers {
            for (label, pick) in [
                ("Success", (|r: &SummaryRow| r.success_pct) as fn(&SummaryRow) -> f64),
                ("Stuck", |r: &SummaryRow| r.stuck_pct),
                ("Collision", |r: &SummaryRow| r.collision_pct),
            ] {
                out.push_str(&format!("{:<24}", format!("{} {}", c.name(), label)));
                for (family, size) in &columns {
                    let cell = match self.row(c, *family, f64::from_bits(*size)) {
                        Some(r) => format!("{:.0}%", pick(r)),
                        None => "-".to_string(),
                    };
                    out.push_str(&format!("{cell:>14}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Outcome of one batch entry; a failed episode keeps its error message.
#[derive(Clone, Debug)]
pub struct BatchEpisode {
    pub setup: EpisodeSetup,
    pub result: std::result::Result<EpisodeResult, Error>,
}

/// Runs every setup, in parallel across episodes. Results are returned in
/// input order and failures never abort the batch.
pub fn run_batch(setups: Vec<EpisodeSetup>) -> (Vec<BatchEpisode>, SummaryTable) {
    let episodes: Vec<BatchEpisode> = setups
        .into_par_iter()
        .map(|setup| {
            let result = run_episode(&setup);
            BatchEpisode { setup, result }
        })
        .collect();
    let summaries: Vec<EpisodeSummary> =
        episodes.iter().filter_map(|e| e.result.as_ref().ok().map(|r| r.summary.clone())).collect();
    let table = SummaryTable::from_summaries(&summaries);
    (episodes, table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast_setup(family: SceneFamily, size: f64, controller: Controller) -> EpisodeSetup {
        let mut s = EpisodeSetup::default();
        s.mppi.samples = 256;
        s.episode.scene = SceneSpec { family, size, seed: 0 };
        s.episode.controller = controller;
        s
    }

    fn summary(controller: Controller, termination: Termination, t: Option<f64>) -> EpisodeSummary {
        EpisodeSummary {
            controller,
            family: SceneFamily::Cwall,
            size: 2.0,
            scene_seed: 0,
            seed: 0,
            termination,
            duration_s: 10.0,
            time_to_goal_s: t,
            max_penetration_m: 0.0,
            starved: false,
            final_coverage: 0.5,
            final_position: [0.0; 3],
        }
    }

    #[test]
    fn due_counts_follow_rates() {
        let mut renders = 0;
        let mut snaps = 0;
        for k in 0..50 {
            let t = k as f64 * 0.02;
            if due(t, 30.0) > renders {
                renders += 1;
            }
            if due(t, 10.0) > snaps {
                snaps += 1;
            }
        }
        assert_eq!(renders, 30);
        assert_eq!(snaps, 10);
    }

    #[test]
    fn sweep_observes_more_than_single_frame() {
        let scene = build_scene(&SceneSpec::default()).unwrap();
        let cam = CameraIntrinsics { width: 64, height: 48, fx: 32.0, fy: 32.0, cx: 32.0, cy: 24.0, max_range: 5.0 };
        let mut image = DepthImage::empty(cam);
        let mut a = VoxelMap::new(&scene.bounds, 0.1);
        init_observation(InitObservation::None, &scene, &mut a, &mut image, 30.0, 1.0);
        let mut b = VoxelMap::new(&scene.bounds, 0.1);
        init_observation(InitObservation::YawSweep, &scene, &mut b, &mut image, 30.0, 1.0);
        let (a, b) = (a.snapshot(), b.snapshot());
        assert_eq!(a.count(crate::mapping::OCCUPIED), 0);
        assert!(b.count(crate::mapping::FREE) > a.count(crate::mapping::FREE));
        // Behind the start only the sweep reaches.
        assert_eq!(a.lookup(&Vector3::new(0.5, 0.3, 1.0)), crate::mapping::UNKNOWN);
        assert_eq!(b.lookup(&Vector3::new(0.5, 0.3, 1.0)), crate::mapping::FREE);
    }

    #[test]
    fn summary_table_aggregates() {
        let eps = vec![
            summary(Controller::PaMppi, Termination::Success, Some(8.0)),
            summary(Controller::PaMppi, Termination::Success, Some(10.0)),
            summary(Controller::PaMppi, Termination::Collision, None),
            summary(Controller::PaMppi, Termination::Stuck, None),
            summary(Controller::TrackingMppi, Termination::Stuck, None),
        ];
        let t = SummaryTable::from_summaries(&eps);
        assert_eq!(t.rows.len(), 2);
        let pa = t.row(Controller::PaMppi, SceneFamily::Cwall, 2.0).unwrap();
        assert_eq!((pa.success_pct, pa.stuck_pct, pa.collision_pct), (50.0, 25.0, 25.0));
        assert_eq!(pa.mean_time_to_goal_s, Some(9.0));
        let tr = t.row(Controller::TrackingMppi, SceneFamily::Cwall, 2.0).unwrap();
        assert_eq!((tr.success_pct, tr.stuck_pct, tr.collision_pct), (0.0, 100.0, 0.0));
        assert_eq!(tr.mean_time_to_goal_s, None);
        assert!(t.render_text().contains("tracking-mppi Stuck"));
        assert!(SummaryTable::from_summaries(&[]).rows.is_empty());
    }

    #[test]
    fn all_success_row() {
        let eps: Vec<_> = (0..5).map(|_| summary(Controller::PaMppi, Termination::Success, Some(5.0))).collect();
        let row = &SummaryTable::from_summaries(&eps).rows[0];
        assert_eq!((row.success_pct, row.stuck_pct, row.collision_pct), (100.0, 0.0, 0.0));
    }

    #[test]
    fn batch_expansion() {
        let b = BatchConfig {
            controllers: vec![Controller::PaMppi, Controller::TrackingMppi],
            scenes: vec![BatchScenes { family: SceneFamily::Cwall, sizes: vec![0.5, 1.0] }],
            repeats: 3,
            seed: 10,
        };
        let setups = b.expand(&EpisodeSetup::default());
        assert_eq!(setups.len(), 12);
        assert_eq!(setups[2].episode.seed, 12);
        assert_eq!(setups[2].episode.scene.seed, 12);
        assert_eq!(setups[11].episode.controller, Controller::TrackingMppi);
        assert!(BatchConfig::default().is_empty());
        let (eps, table) = run_batch(Vec::new());
        assert!(eps.is_empty() && table.rows.is_empty());
    }

    #[test]
    fn mismatched_rates_rejected() {
        let mut s = EpisodeSetup::default();
        s.episode.control_rate = 40.0;
        assert!(run_episode(&s).is_err());
    }

    #[test]
    fn stuck_when_hovering_is_forced() {
        let mut s = fast_setup(SceneFamily::Empty, 1.0, Controller::PaMppi);
        s.mppi.sigma = [0.0; 4];
        s.episode.stuck_window = 1.0;
        s.episode.record_trajectory = true;
        let r = run_episode(&s).unwrap();
        assert_eq!(r.summary.termination, Termination::Stuck);
        assert_eq!(r.events.ticks, 50);
        assert!((r.summary.duration_s - 1.0).abs() < 1e-12);
        let last = r.trajectory.last().unwrap();
        assert!((last.p[2] - 1.0).abs() < 1e-9);
    }
}
