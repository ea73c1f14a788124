//! Synthetic obstacle scenes, pinhole depth rendering and ground-truth
//! collision queries.

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box given by its corners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Smallest distance from `p` to a face, negative outside.
    pub fn inner_margin(&self, p: &Vector3<f64>) -> f64 {
        (0..3)
            .map(|i| (p[i] - self.min[i]).min(self.max[i] - p[i]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Position plus heading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub yaw: f64,
}

/// Camera position and body-to-world rotation. The principal axis is the
/// body x axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

/// A solid obstacle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Obstacle {
    /// Axis-aligned box.
    Box {
        center: Vector3<f64>,
        half_extents: Vector3<f64>,
    },
    /// Slab with a circular aperture through it. In the wall's local frame
    /// the normal is the x axis and the hole is a cylinder along x.
    HoledWall {
        center: Vector3<f64>,
        orientation: UnitQuaternion<f64>,
        half_extents: Vector3<f64>,
        /// Hole axis position on the wall plane, local (y, z).
        hole_center: Vector2<f64>,
        hole_diameter: f64,
    },
}

fn box_sdf(p: &Vector3<f64>, half: &Vector3<f64>) -> f64 {
    let q = p.abs() - half;
    let outside = q.map(|x| x.max(0.0)).norm();
    outside + q.max().min(0.0)
}

/// Entry and exit parameters of a ray against a centered box.
fn slab(origin: &Vector3<f64>, dir: &Vector3<f64>, half: &Vector3<f64>) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for i in 0..3 {
        if dir[i] == 0.0 {
            if origin[i].abs() > half[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[i];
        let mut a = (-half[i] - origin[i]) * inv;
        let mut b = (half[i] - origin[i]) * inv;
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        t0 = t0.max(a);
        t1 = t1.min(b);
    }
    (t0 <= t1).then_some((t0, t1))
}

impl Obstacle {
    pub fn validate(&self) -> Result<()> {
        match self {
            Obstacle::Box { half_extents, .. } => {
                if half_extents.iter().any(|&h| !(h > 0.0)) {
                    return Err(Error::InvalidScene("box half-extents must be positive".into()));
                }
            }
            Obstacle::HoledWall { half_extents, hole_diameter, .. } => {
                if half_extents.iter().any(|&h| !(h > 0.0)) {
                    return Err(Error::InvalidScene("wall half-extents must be positive".into()));
                }
                let min_extent = 2.0 * half_extents.y.min(half_extents.z);
                if !(*hole_diameter > 0.0) || *hole_diameter >= min_extent {
                    return Err(Error::InvalidScene(format!(
                        "hole diameter {hole_diameter} must be positive and below the wall extent {min_extent}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Signed distance from `p` to the solid (negative inside).
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        match self {
            Obstacle::Box { center, half_extents } => box_sdf(&(p - center), half_extents),
            Obstacle::HoledWall {
                center,
                orientation,
                half_extents,
                hole_center,
                hole_diameter,
            } => {
                let local = orientation.inverse_transform_vector(&(p - center));
                let outer = box_sdf(&local, half_extents);
                // Around the aperture the solid is {|x| <= h, r >= R}; in the
                // (x, r) half-plane that is a quadrant whose SDF is exact.
                let r = (Vector2::new(local.y, local.z) - hole_center).norm();
                let qx = local.x.abs() - half_extents.x;
                let qr = 0.5 * hole_diameter - r;
                let ring = if qx > 0.0 && qr > 0.0 { qx.hypot(qr) } else { qx.max(qr) };
                outer.max(ring)
            }
        }
    }

    /// Smallest positive ray parameter at which the ray enters the solid.
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        match self {
            Obstacle::Box { center, half_extents } => {
                let (t0, _) = slab(&(origin - center), dir, half_extents)?;
                (t0 > 0.0).then_some(t0)
            }
            Obstacle::HoledWall {
                center,
                orientation,
                half_extents,
                hole_center,
                hole_diameter,
            } => {
                let o = orientation.inverse_transform_vector(&(origin - center));
                let d = orientation.inverse_transform_vector(dir);
                let (t0, t1) = slab(&o, &d, half_extents)?;
                let radius = 0.5 * hole_diameter;
                let oy = o.y - hole_center.x;
                let oz = o.z - hole_center.y;
                let a = d.y * d.y + d.z * d.z;
                let c = oy * oy + oz * oz - radius * radius;
                // Parameter interval during which the ray is inside the hole tube.
                let tube = if a == 0.0 {
                    (c < 0.0).then_some((f64::NEG_INFINITY, f64::INFINITY))
                } else {
                    let b = 2.0 * (oy * d.y + oz * d.z);
                    let disc = b * b - 4.0 * a * c;
                    (disc > 0.0).then(|| {
                        let s = disc.sqrt();
                        ((-b - s) / (2.0 * a), (-b + s) / (2.0 * a))
                    })
                };
                let first = match tube {
                    Some((c0, c1)) if t0 > c0 && t0 < c1 => (c1 < t1).then_some(c1),
                    _ => Some(t0),
                }?;
                (first > 0.0).then_some(first)
            }
        }
    }
}

/// Family of synthetic navigation scenes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneFamily {
    Empty,
    /// C-shaped wall opening toward the start; size is the back panel width.
    Cwall,
    /// Full wall with a circular aperture; size is the hole diameter.
    Hole,
    /// Four staggered walls; size is the width of each wall.
    Fourwall,
}

impl SceneFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SceneFamily::Empty => "empty",
            SceneFamily::Cwall => "cwall",
            SceneFamily::Hole => "hole",
            SceneFamily::Fourwall => "fourwall",
        }
    }
}

impl std::str::FromStr for SceneFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empty" => Ok(SceneFamily::Empty),
            "cwall" => Ok(SceneFamily::Cwall),
            "hole" => Ok(SceneFamily::Hole),
            "fourwall" => Ok(SceneFamily::Fourwall),
            other => Err(Error::InvalidScene(format!("unknown scene family `{other}`"))),
        }
    }
}

fn default_size() -> f64 {
    1.0
}

/// Parameters from which [`build_scene`] constructs a [`Scene`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub family: SceneFamily,
    #[serde(default = "default_size")]
    pub size: f64,
    /// Seeds the hole location.
    #[serde(default)]
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self { family: SceneFamily::Empty, size: default_size(), seed: 0 }
    }
}

/// Obstacles, mapped volume, start and goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub obstacles: Vec<Obstacle>,
    pub bounds: Aabb,
    pub start: Pose,
    pub goal: Pose,
}

/// Wall thickness used by every synthetic scene, meters.
pub const WALL_THICKNESS: f64 = 0.1;
/// Clearance that start and goal must keep from all geometry.
pub const SCENE_CLEARANCE: f64 = 0.15;

const ARENA: [f64; 3] = [4.0, 4.0, 2.0];
const WALL_X: f64 = 2.0;
const CWALL_DEPTH: f64 = 0.5;
const FOURWALL_X: [f64; 4] = [1.1, 1.7, 2.3, 2.9];
/// How far each four-wall panel reaches across the start-goal line, meters.
const FOURWALL_OVERLAP: f64 = 0.25;

fn slab_box(center: Vector3<f64>, half: Vector3<f64>) -> Obstacle {
    Obstacle::Box { center, half_extents: half }
}

/// Builds one of the synthetic scenes inside a 4 × 4 × 2 m arena. The start
/// is at (0.5, 2, 1) facing +x and the goal 3 m ahead.
pub fn build_scene(spec: &SceneSpec) -> Result<Scene> {
    let w = spec.size;
    if spec.family != SceneFamily::Empty && !(w > 0.0 && w.is_finite()) {
        return Err(Error::InvalidScene(format!("size must be positive, got {w}")));
    }
    let bounds = Aabb::new(Vector3::zeros(), Vector3::from(ARENA));
    let mid_y = 0.5 * ARENA[1];
    let mid_z = 0.5 * ARENA[2];
    let half_t = 0.5 * WALL_THICKNESS;
    let start = Pose { position: Vector3::new(0.5, mid_y, 1.0), yaw: 0.0 };
    let goal = Pose { position: Vector3::new(3.5, mid_y, 1.0), yaw: 0.0 };

    let obstacles = match spec.family {
        SceneFamily::Empty => Vec::new(),
        SceneFamily::Cwall => {
            let back = slab_box(Vector3::new(WALL_X, mid_y, mid_z), Vector3::new(half_t, 0.5 * w, mid_z));
            let side_x = WALL_X - 0.5 * CWALL_DEPTH;
            let side_half = Vector3::new(0.5 * CWALL_DEPTH, half_t, mid_z);
            vec![
                back,
                slab_box(Vector3::new(side_x, mid_y - 0.5 * w, mid_z), side_half),
                slab_box(Vector3::new(side_x, mid_y + 0.5 * w, mid_z), side_half),
            ]
        }
        SceneFamily::Hole => {
            let (width, height) = (ARENA[1], ARENA[2]);
            if w >= width.min(height) {
                return Err(Error::InvalidScene(format!(
                    "hole diameter {w} must be below the wall extent {}",
                    width.min(height)
                )));
            }
            // Hole center keeps one diameter from each wall edge where the
            // wall is large enough, otherwise it is centered on that axis.
            let range = |extent: f64| {
                let lo = w.min(0.5 * extent);
                let hi = (extent - w).max(0.5 * extent);
                (lo, hi)
            };
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let (ylo, yhi) = range(width);
            let (zlo, zhi) = range(height);
            let hy = if yhi > ylo { rng.gen_range(ylo..yhi) } else { ylo };
            let hz = if zhi > zlo { rng.gen_range(zlo..zhi) } else { zlo };
            vec![Obstacle::HoledWall {
                center: Vector3::new(WALL_X, mid_y, mid_z),
                orientation: UnitQuaternion::identity(),
                half_extents: Vector3::new(half_t, 0.5 * width, 0.5 * height),
                hole_center: Vector2::new(hy - mid_y, hz - mid_z),
                hole_diameter: w,
            }]
        }
        SceneFamily::Fourwall => FOURWALL_X
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let shift = (0.5 * w - FOURWALL_OVERLAP).max(0.0);
                let offset = if i % 2 == 0 { shift } else { -shift };
                slab_box(Vector3::new(x, mid_y + offset, mid_z), Vector3::new(half_t, 0.5 * w, mid_z))
            })
            .collect(),
    };

    let scene = Scene { obstacles, bounds, start, goal };
    scene.validate()?;
    Ok(scene)
}

/// Result of a ground-truth collision query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub colliding: bool,
    /// How deep the sphere reaches into geometry or past the bounds, meters.
    pub penetration: f64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        for o in &self.obstacles {
            o.validate()?;
        }
        for (name, pose) in [("start", &self.start), ("goal", &self.goal)] {
            if self.bounds.inner_margin(&pose.position) < SCENE_CLEARANCE
                || self.signed_distance(&pose.position) < SCENE_CLEARANCE
            {
                return Err(Error::InvalidScene(format!("{name} pose lacks clearance from geometry")));
            }
        }
        Ok(())
    }

    /// Distance to the nearest obstacle surface (negative inside, +∞ for an
    /// empty scene). Bounds are not obstacles.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.signed_distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether a sphere at `p` touches any obstacle or leaves the bounds.
    pub fn true_collision(&self, p: &Vector3<f64>, radius: f64) -> Contact {
        let penetration = (radius - self.signed_distance(p)).max(radius - self.bounds.inner_margin(p));
        Contact { colliding: penetration > 0.0, penetration: penetration.max(0.0) }
    }

    /// Nearest hit along a ray, in units of `dir`.
    pub fn raycast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        self.obstacles
            .iter()
            .filter_map(|o| o.intersect(origin, dir))
            .min_by(f64::total_cmp)
    }

    /// Renders a depth image from `pose`.
    pub fn render_depth(&self, pose: &CameraPose, intrinsics: &CameraIntrinsics) -> DepthImage {
        let mut image = DepthImage::empty(intrinsics.clone());
        self.render_depth_into(pose, &mut image);
        image
    }

    /// Renders into an existing image, reusing its buffer.
    pub fn render_depth_into(&self, pose: &CameraPose, image: &mut DepthImage) {
        let intr = &image.intrinsics;
        let rot = pose.orientation.to_rotation_matrix();
        let (w, h) = (intr.width, intr.height);
        image.depths.resize(w * h, NO_RETURN);
        for v in 0..h {
            for u in 0..w {
                let ray = rot * intr.pixel_ray(u, v);
                // The body-frame ray has unit x component, so the parameter is
                // the depth along the principal axis.
                let depth = match self.raycast(&pose.position, &ray) {
                    Some(t) if t <= intr.max_range => t,
                    _ => NO_RETURN,
                };
                image.depths[v * w + u] = depth;
            }
        }
    }
}

/// Depth value for pixels without a return within range.
pub const NO_RETURN: f64 = f64::INFINITY;

fn default_width() -> usize {
    320
}
fn default_height() -> usize {
    240
}
fn default_focal() -> f64 {
    160.0
}
fn default_cx() -> f64 {
    160.0
}
fn default_cy() -> f64 {
    120.0
}
fn default_max_range() -> f64 {
    5.0
}

/// Pinhole camera model. Pixel `(u, v)` looks along the body-frame ray
/// `(1, (u - cx)/fx, (v - cy)/fy)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_height")]
    pub height: usize,
    #[serde(default = "default_focal")]
    pub fx: f64,
    #[serde(default = "default_focal")]
    pub fy: f64,
    #[serde(default = "default_cx")]
    pub cx: f64,
    #[serde(default = "default_cy")]
    pub cy: f64,
    #[serde(default = "default_max_range")]
    pub max_range: f64,
}

impl Default for CameraIntrinsics {
    /// 320 × 240 with a 90° horizontal field of view and 5 m range.
    fn default() -> Self {
        Self {
            width: default_width(),
            height: default_height(),
            fx: default_focal(),
            fy: default_focal(),
            cx: default_cx(),
            cy: default_cy(),
            max_range: default_max_range(),
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("image dimensions must be non-zero".into()));
        }
        if !(self.fx > 0.0 && self.fy > 0.0 && self.max_range > 0.0) {
            return Err(Error::InvalidParameter("fx, fy and max_range must be positive".into()));
        }
        Ok(())
    }

    /// Body-frame ray through pixel `(u, v)`, scaled to unit depth.
    pub fn pixel_ray(&self, u: usize, v: usize) -> Vector3<f64> {
        Vector3::new(1.0, (u as f64 - self.cx) / self.fx, (v as f64 - self.cy) / self.fy)
    }
}

/// Z-depth image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub intrinsics: CameraIntrinsics,
    pub depths: Vec<f64>,
}

impl DepthImage {
    pub fn empty(intrinsics: CameraIntrinsics) -> Self {
        let n = intrinsics.width * intrinsics.height;
        Self { intrinsics, depths: vec![NO_RETURN; n] }
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.depths[v * self.intrinsics.width + u]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn facing_x(p: Vector3<f64>) -> CameraPose {
        CameraPose { position: p, orientation: UnitQuaternion::identity() }
    }

    fn wall_at(x: f64) -> Scene {
        Scene {
            obstacles: vec![slab_box(Vector3::new(x + 0.05, 2.0, 1.0), Vector3::new(0.05, 10.0, 10.0))],
            bounds: Aabb::new(Vector3::zeros(), Vector3::new(4.0, 4.0, 2.0)),
            start: Pose { position: Vector3::new(0.5, 2.0, 1.0), yaw: 0.0 },
            goal: Pose { position: Vector3::new(0.5, 3.0, 1.0), yaw: 0.0 },
        }
    }

    #[test]
    fn cwall_layout() {
        let s = build_scene(&SceneSpec { family: SceneFamily::Cwall, size: 0.5, seed: 0 }).unwrap();
        assert_eq!(s.obstacles.len(), 3);
        assert_eq!((s.goal.position - s.start.position).norm(), 3.0);
        match &s.obstacles[0] {
            Obstacle::Box { center, half_extents } => {
                assert_eq!(center.x, 2.0);
                assert_eq!(half_extents.y, 0.25);
            }
            _ => panic!("back panel is a box"),
        }
        // Straight line to the goal is blocked, and the side panels sit
        // between start and back panel.
        assert!(s.signed_distance(&Vector3::new(2.0, 2.0, 1.0)) < 0.0);
        assert!(s.signed_distance(&Vector3::new(1.75, 1.75, 1.0)) < 0.0);
    }

    #[test]
    fn hole_layout_is_seeded() {
        let spec = SceneSpec { family: SceneFamily::Hole, size: 1.0, seed: 7 };
        let a = build_scene(&spec).unwrap();
        assert_eq!(a, build_scene(&spec).unwrap());
        let other = build_scene(&SceneSpec { seed: 8, ..spec.clone() }).unwrap();
        assert_ne!(a, other);
        let Obstacle::HoledWall { hole_center, hole_diameter, .. } = &a.obstacles[0] else {
            panic!("hole scene has a holed wall");
        };
        assert_eq!(*hole_diameter, 1.0);
        // d = 1 on a 2 m tall wall leaves only the middle height.
        assert_eq!(hole_center.y, 0.0);
        assert!(hole_center.x.abs() <= 1.0);
        let through = Vector3::new(2.0, 2.0 + hole_center.x, 1.0);
        assert!(a.signed_distance(&through) > 0.45);
    }

    #[test]
    fn oversized_hole_is_rejected() {
        let spec = SceneSpec { family: SceneFamily::Hole, size: 2.0, seed: 0 };
        assert!(matches!(build_scene(&spec), Err(Error::InvalidScene(_))));
    }

    #[test]
    fn fourwall_layout() {
        let s = build_scene(&SceneSpec { family: SceneFamily::Fourwall, size: 1.5, seed: 0 }).unwrap();
        assert_eq!(s.obstacles.len(), 4);
        // Alternating sides of the start-goal line.
        assert!(s.signed_distance(&Vector3::new(1.1, 2.5, 1.0)) < 0.0);
        assert!(s.signed_distance(&Vector3::new(1.7, 1.5, 1.0)) < 0.0);
        assert!(s.signed_distance(&Vector3::new(1.1, 1.5, 1.0)) > 0.0);
        // Every panel blocks the straight line.
        for x in [1.1, 1.7, 2.3, 2.9] {
            assert!(s.signed_distance(&Vector3::new(x, 2.0, 1.0)) < 0.0);
        }
    }

    #[test]
    fn wall_ahead_depth() {
        let s = wall_at(2.5);
        let img = s.render_depth(&facing_x(Vector3::new(0.5, 2.0, 1.0)), &CameraIntrinsics::default());
        assert!((img.get(160, 120) - 2.0).abs() < 1e-12);
        assert!(img.depths.iter().all(|d| d.is_finite()));
    }

    #[test]
    fn ray_through_hole_has_no_return() {
        let s = build_scene(&SceneSpec { family: SceneFamily::Hole, size: 1.0, seed: 3 }).unwrap();
        let Obstacle::HoledWall { hole_center, .. } = &s.obstacles[0] else { unreachable!() };
        let eye = Vector3::new(0.5, 2.0 + hole_center.x, 1.0 + hole_center.y);
        let img = s.render_depth(&facing_x(eye), &CameraIntrinsics::default());
        assert_eq!(img.get(160, 120), NO_RETURN);
        // 60 px left of center: the wall face 0.54 m from the hole axis.
        assert!((img.get(100, 120) - 1.45).abs() < 1e-12);
    }

    #[test]
    fn empty_scene_renders_nothing() {
        let s = build_scene(&SceneSpec::default()).unwrap();
        let img = s.render_depth(&facing_x(s.start.position), &CameraIntrinsics::default());
        assert!(img.depths.iter().all(|&d| d == NO_RETURN));
    }

    #[test]
    fn collision_queries() {
        let s = wall_at(2.0);
        assert!(!s.true_collision(&s.start.position, 0.15).colliding);
        let c = s.true_collision(&Vector3::new(2.0, 2.0, 1.0), 0.15);
        assert!(c.colliding);
        assert!((c.penetration - 0.15).abs() < 1e-12);
        let outside = s.true_collision(&Vector3::new(0.05, 2.0, 1.0), 0.1);
        assert!(outside.colliding && (outside.penetration - 0.05).abs() < 1e-12);
    }

    #[test]
    fn centered_in_hole_is_clear() {
        let s = build_scene(&SceneSpec { family: SceneFamily::Hole, size: 1.0, seed: 1 }).unwrap();
        let Obstacle::HoledWall { hole_center, .. } = &s.obstacles[0] else { unreachable!() };
        let p = Vector3::new(2.0, 2.0 + hole_center.x, 1.0 + hole_center.y);
        let c = s.true_collision(&p, 0.15);
        assert!(!c.colliding);
        assert!((s.signed_distance(&p) - 0.5).abs() < 1e-12);
        // Offset toward the rim until the sphere grazes the hole edge.
        let near_rim = p + Vector3::new(0.0, 0.4, 0.0);
        assert!(s.true_collision(&near_rim, 0.15).colliding);
    }

    #[test]
    fn holed_wall_ray_hits_inner_surface() {
        let wall = Obstacle::HoledWall {
            center: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
            half_extents: Vector3::new(0.5, 2.0, 2.0),
            hole_center: Vector2::zeros(),
            hole_diameter: 1.0,
        };
        // Enters the aperture, then the slanted ray meets the tube wall.
        let t = wall.intersect(&Vector3::new(-1.0, 0.0, 0.0), &Vector3::new(1.0, 0.5, 0.0)).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        // Straight down the axis passes.
        assert!(wall.intersect(&Vector3::new(-1.0, 0.0, 0.0), &Vector3::new(1.0, 0.0, 0.0)).is_none());
        // Off-hole hits the front face.
        let t = wall.intersect(&Vector3::new(-1.0, 1.5, 0.0), &Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn removing_obstacles_never_reduces_depth() {
        let full = build_scene(&SceneSpec { family: SceneFamily::Cwall, size: 1.0, seed: 0 }).unwrap();
        let intr = CameraIntrinsics { width: 64, height: 48, fx: 32.0, fy: 32.0, cx: 32.0, cy: 24.0, max_range: 5.0 };
        let pose = CameraPose {
            position: full.start.position,
            orientation: UnitQuaternion::from_euler_angles(0.0, 0.1, 0.3),
        };
        let before = full.render_depth(&pose, &intr);
        for k in 0..full.obstacles.len() {
            let mut fewer = full.clone();
            fewer.obstacles.remove(k);
            let after = fewer.render_depth(&pose, &intr);
            for (a, b) in after.depths.iter().zip(&before.depths) {
                assert!(a >= b);
            }
        }
    }

    #[test]
    fn rendered_points_lie_on_surfaces() {
        for (family, size) in [(SceneFamily::Cwall, 2.0), (SceneFamily::Hole, 1.0), (SceneFamily::Fourwall, 1.0)] {
            let s = build_scene(&SceneSpec { family, size, seed: 5 }).unwrap();
            let intr = CameraIntrinsics { width: 80, height: 60, fx: 40.0, fy: 40.0, cx: 40.0, cy: 30.0, max_range: 5.0 };
            let pose = CameraPose {
                position: s.start.position + Vector3::new(0.2, -0.3, 0.1),
                orientation: UnitQuaternion::from_euler_angles(0.05, -0.1, 0.4),
            };
            let img = s.render_depth(&pose, &intr);
            let rot = pose.orientation.to_rotation_matrix();
            let mut hits = 0;
            for v in 0..intr.height {
                for u in 0..intr.width {
                    let d = img.get(u, v);
                    if d.is_finite() {
                        hits += 1;
                        assert!(d > 0.0 && d <= intr.max_range);
                        let p = pose.position + rot * intr.pixel_ray(u, v) * d;
                        assert!(s.signed_distance(&p).abs() < 1e-6, "{family:?} pixel ({u},{v})");
                    }
                }
            }
            assert!(hits > 0);
        }
    }
}
