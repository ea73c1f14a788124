//! Depth frames to a three-state occupancy grid.
//!
//! Depth pixels are back-projected to world points and inserted into a
//! [`VoxelMap`]: every voxel a sensor ray passes through gets one unit of free
//! evidence, the voxel containing the return gets one unit of occupied
//! evidence. Within a frame each voxel is updated at most once and an
//! occupied mark wins over a free mark. [`VoxelMap::snapshot`] freezes the
//! evidence into an [`OccupancyGrid`] with values in `{-1, 0, 1}`:
//!
//! | evidence                 | value         |
//! |--------------------------|---------------|
//! | never observed           | `-1` unknown  |
//! | net free                 | `0` free      |
//! | net occupied, or a tie   | `1` occupied  |
//!
//! Voxel traversal is the incremental Amanatides–Woo walk, shared by map
//! insertion and by [`OccupancyGrid::raycast`].

use std::io::{self, Read, Write};
use std::sync::{Arc, RwLock};

use nalgebra::Vector3;

use crate::world::{Aabb, CameraPose, DepthImage};

pub const UNKNOWN: i8 = -1;
pub const FREE: i8 = 0;
pub const OCCUPIED: i8 = 1;

/// Voxel lattice shared by the map and its snapshots. Linear index is
/// x-major: `(x * ny + y) * nz + z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridGeometry {
    pub origin: Vector3<f64>,
    pub dims: [usize; 3],
    pub resolution: f64,
}

pub type VoxelIndex = [i64; 3];

impl GridGeometry {
    /// Lattice covering `bounds` with `⌈extent / resolution⌉` voxels per axis.
    pub fn covering(bounds: &Aabb, resolution: f64) -> Self {
        let extent = bounds.extent();
        let dims = [0, 1, 2].map(|i| ((extent[i] / resolution) - 1e-9).ceil().max(1.0) as usize);
        Self { origin: bounds.min, dims, resolution }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Voxel containing `p` (floor convention), possibly outside the grid.
    #[inline]
    pub fn voxel_of(&self, p: &Vector3<f64>) -> VoxelIndex {
        [0, 1, 2].map(|i| ((p[i] - self.origin[i]) / self.resolution).floor() as i64)
    }

    #[inline]
    pub fn linear_index(&self, v: VoxelIndex) -> Option<usize> {
        let [nx, ny, nz] = self.dims;
        if v[0] < 0 || v[1] < 0 || v[2] < 0 {
            return None;
        }
        let (x, y, z) = (v[0] as usize, v[1] as usize, v[2] as usize);
        (x < nx && y < ny && z < nz).then(|| (x * ny + y) * nz + z)
    }

    pub fn voxel_center(&self, v: VoxelIndex) -> Vector3<f64> {
        Vector3::new(
            self.origin.x + (v[0] as f64 + 0.5) * self.resolution,
            self.origin.y + (v[1] as f64 + 0.5) * self.resolution,
            self.origin.z + (v[2] as f64 + 0.5) * self.resolution,
        )
    }

    pub fn bounds(&self) -> Aabb {
        let size = Vector3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.resolution;
        Aabb::new(self.origin, self.origin + size)
    }
}

/// Incremental voxel walk along the segment `from → to`.
///
/// Yields each voxel the segment passes through together with the segment
/// parameter `t ∈ [0, 1]` at which it is entered. Voxels are not limited to
/// the grid.
pub struct VoxelTraversal {
    cell: VoxelIndex,
    step: [i64; 3],
    t_max: [f64; 3],
    t_delta: [f64; 3],
    next_entry: Option<f64>,
}

impl VoxelTraversal {
    pub fn new(geometry: &GridGeometry, from: &Vector3<f64>, to: &Vector3<f64>) -> Self {
        let cell = geometry.voxel_of(from);
        let d = to - from;
        let mut step = [0; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for i in 0..3 {
            if d[i] > 0.0 {
                step[i] = 1;
                let boundary = geometry.origin[i] + (cell[i] + 1) as f64 * geometry.resolution;
                t_max[i] = (boundary - from[i]) / d[i];
                t_delta[i] = geometry.resolution / d[i];
            } else if d[i] < 0.0 {
                step[i] = -1;
                let boundary = geometry.origin[i] + cell[i] as f64 * geometry.resolution;
                t_max[i] = (boundary - from[i]) / d[i];
                t_delta[i] = -geometry.resolution / d[i];
            }
        }
        Self { cell, step, t_max, t_delta, next_entry: Some(0.0) }
    }
}

impl Iterator for VoxelTraversal {
    type Item = (VoxelIndex, f64);

    #[inline]
    fn next(&mut self) -> Option<Self::Item> {
        let entry = self.next_entry?;
        let current = self.cell;
        let axis = if self.t_max[0] < self.t_max[1] {
            if self.t_max[0] < self.t_max[2] { 0 } else { 2 }
        } else if self.t_max[1] < self.t_max[2] {
            1
        } else {
            2
        };
        let t = self.t_max[axis];
        if t <= 1.0 {
            self.cell[axis] += self.step[axis];
            self.t_max[axis] += self.t_delta[axis];
            self.next_entry = Some(t);
        } else {
            self.next_entry = None;
        }
        Some((current, entry))
    }
}

/// World-frame returns of one depth frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    /// Surface returns.
    pub points: Vec<Vector3<f64>>,
    /// Ends of no-return rays at maximum range; they only carve free space.
    pub free_endpoints: Vec<Vector3<f64>>,
}

/// Back-projects every pixel through the pinhole model into the world frame.
pub fn depth_to_pointcloud(image: &DepthImage, pose: &CameraPose) -> PointCloud {
    let intr = &image.intrinsics;
    let rot = pose.orientation.to_rotation_matrix();
    let mut cloud = PointCloud::default();
    for v in 0..intr.height {
        for u in 0..intr.width {
            let ray = rot * intr.pixel_ray(u, v);
            let d = image.get(u, v);
            if d.is_finite() {
                cloud.points.push(pose.position + ray * d);
            } else {
                cloud.free_endpoints.push(pose.position + ray * intr.max_range);
            }
        }
    }
    cloud
}

const MARK_NONE: u8 = 0;
const MARK_FREE: u8 = 1;
const MARK_OCCUPIED: u8 = 2;

/// Aggregated occupancy evidence. Single writer.
#[derive(Clone, Debug)]
pub struct VoxelMap {
    geometry: GridGeometry,
    evidence: Vec<i8>,
    observed: Vec<bool>,
    marks: Vec<u8>,
    touched: Vec<usize>,
    version: u64,
}

impl VoxelMap {
    pub fn new(bounds: &Aabb, resolution: f64) -> Self {
        let geometry = GridGeometry::covering(bounds, resolution);
        let n = geometry.len();
        Self {
            geometry,
            evidence: vec![0; n],
            observed: vec![false; n],
            marks: vec![MARK_NONE; n],
            touched: Vec::new(),
            version: 0,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    /// Net evidence of a voxel, positive for occupied.
    pub fn evidence(&self, v: VoxelIndex) -> Option<i8> {
        self.geometry.linear_index(v).map(|i| self.evidence[i])
    }

    #[inline]
    fn mark_free(&mut self, i: usize) {
        if self.marks[i] == MARK_NONE {
            self.marks[i] = MARK_FREE;
            self.touched.push(i);
        }
    }

    #[inline]
    fn mark_occupied(&mut self, i: usize) {
        if self.marks[i] == MARK_NONE {
            self.touched.push(i);
        }
        self.marks[i] = MARK_OCCUPIED;
    }

    /// Marks the in-grid voxels from `origin` toward `end` as free.
    fn carve(&mut self, origin: &Vector3<f64>, end: &Vector3<f64>, include_end: bool) {
        let geometry = self.geometry;
        let end_voxel = geometry.voxel_of(end);
        let mut entered = false;
        for (voxel, _) in VoxelTraversal::new(&geometry, origin, end) {
            if !include_end && voxel == end_voxel {
                break;
            }
            match geometry.linear_index(voxel) {
                Some(i) => {
                    entered = true;
                    self.mark_free(i);
                }
                // The grid is convex: once left, never re-entered.
                None if entered => break,
                None => {}
            }
        }
    }

    /// Integrates one frame taken from `sensor_origin`.
    pub fn insert_pointcloud(&mut self, sensor_origin: &Vector3<f64>, cloud: &PointCloud) {
        for p in &cloud.points {
            self.carve(sensor_origin, p, false);
            if let Some(i) = self.geometry.linear_index(self.geometry.voxel_of(p)) {
                self.mark_occupied(i);
            }
        }
        for p in &cloud.free_endpoints {
            self.carve(sensor_origin, p, true);
        }
        for &i in &self.touched {
            let delta: i8 = if self.marks[i] == MARK_OCCUPIED { 1 } else { -1 };
            self.evidence[i] = self.evidence[i].saturating_add(delta).clamp(-127, 127);
            self.observed[i] = true;
            self.marks[i] = MARK_NONE;
        }
        self.touched.clear();
    }

    /// Renders-and-inserts convenience for a depth image.
    pub fn insert_depth(&mut self, image: &DepthImage, pose: &CameraPose) {
        let cloud = depth_to_pointcloud(image, pose);
        self.insert_pointcloud(&pose.position, &cloud);
    }

    /// Freezes the evidence into a new immutable grid.
    pub fn snapshot(&mut self) -> OccupancyGrid {
        self.version += 1;
        let values: Vec<i8> = self
            .evidence
            .iter()
            .zip(&self.observed)
            .map(|(&e, &seen)| match (seen, e) {
                (false, _) => UNKNOWN,
                (true, e) if e < 0 => FREE,
                _ => OCCUPIED,
            })
            .collect();
        OccupancyGrid { geometry: self.geometry, values: values.into(), version: self.version }
    }
}

/// How a ray cast through an [`OccupancyGrid`] ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RayOutcome {
    ReachedGoal,
    HitOccupied,
    HitUnknown,
    LeftBounds,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayResult {
    pub outcome: RayOutcome,
    /// Segment fraction at which the terminating voxel is entered (1 when
    /// the end point is reached).
    pub t_star: f64,
    pub voxel: VoxelIndex,
}

/// Dense three-state snapshot. Cheap to clone; the values are shared.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    geometry: GridGeometry,
    values: Arc<[i8]>,
    version: u64,
}

impl OccupancyGrid {
    pub fn from_values(geometry: GridGeometry, values: Vec<i8>) -> Self {
        assert_eq!(values.len(), geometry.len(), "value count must match grid dimensions");
        assert!(values.iter().all(|v| (-1..=1).contains(v)), "values must be -1, 0 or 1");
        Self { geometry, values: values.into(), version: 0 }
    }

    /// All voxels unknown.
    pub fn unknown(geometry: GridGeometry) -> Self {
        Self::from_values(geometry, vec![UNKNOWN; geometry.len()])
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    /// Publication counter of the map that produced this snapshot.
    pub fn version(&self) -> u64 {
        self.version
    }

    #[inline]
    pub fn voxel(&self, v: VoxelIndex) -> i8 {
        match self.geometry.linear_index(v) {
            Some(i) => self.values[i],
            None => UNKNOWN,
        }
    }

    /// State of the voxel containing `p`; unknown outside the grid.
    #[inline]
    pub fn lookup(&self, p: &Vector3<f64>) -> i8 {
        self.voxel(self.geometry.voxel_of(p))
    }

    /// Walks from `from` to `to` and stops at the first voxel that is not
    /// free.
    pub fn raycast(&self, from: &Vector3<f64>, to: &Vector3<f64>) -> RayResult {
        let mut last = self.geometry.voxel_of(from);
        for (voxel, t) in VoxelTraversal::new(&self.geometry, from, to) {
            last = voxel;
            let outcome = match self.geometry.linear_index(voxel) {
                None => Some(RayOutcome::LeftBounds),
                Some(i) => match self.values[i] {
                    FREE => None,
                    OCCUPIED => Some(RayOutcome::HitOccupied),
                    _ => Some(RayOutcome::HitUnknown),
                },
            };
            if let Some(outcome) = outcome {
                return RayResult { outcome, t_star: t, voxel };
            }
        }
        RayResult { outcome: RayOutcome::ReachedGoal, t_star: 1.0, voxel: last }
    }

    /// Fraction of voxels that are not unknown.
    pub fn coverage(&self) -> f64 {
        let known = self.values.iter().filter(|&&v| v != UNKNOWN).count();
        known as f64 / self.values.len().max(1) as f64
    }

    pub fn count(&self, state: i8) -> usize {
        self.values.iter().filter(|&&v| v == state).count()
    }

    /// Little-endian binary layout: origin as three f64, dims as three u32,
    /// resolution as f64, then one signed byte per voxel in x-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        for i in 0..3 {
            w.write_all(&self.geometry.origin[i].to_le_bytes())?;
        }
        for d in self.geometry.dims {
            let d = u32::try_from(d).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "grid too large"))?;
            w.write_all(&d.to_le_bytes())?;
        }
        w.write_all(&self.geometry.resolution.to_le_bytes())?;
        let bytes: Vec<u8> = self.values.iter().map(|&v| v as u8).collect();
        w.write_all(&bytes)
    }

    pub fn read_binary<R: Read>(mut r: R) -> io::Result<Self> {
        let mut f64buf = [0u8; 8];
        let mut u32buf = [0u8; 4];
        let mut origin = Vector3::zeros();
        for i in 0..3 {
            r.read_exact(&mut f64buf)?;
            origin[i] = f64::from_le_bytes(f64buf);
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            r.read_exact(&mut u32buf)?;
            *d = u32::from_le_bytes(u32buf) as usize;
        }
        r.read_exact(&mut f64buf)?;
        let resolution = f64::from_le_bytes(f64buf);
        let invalid = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
        if !(resolution > 0.0) || !origin.iter().all(|x| x.is_finite()) {
            return Err(invalid("bad grid header"));
        }
        let geometry = GridGeometry { origin, dims, resolution };
        let mut bytes = vec![0u8; geometry.len()];
        r.read_exact(&mut bytes)?;
        let values: Vec<i8> = bytes.into_iter().map(|b| b as i8).collect();
        if values.iter().any(|v| !(-1..=1).contains(v)) {
            return Err(invalid("voxel value outside {-1, 0, 1}"));
        }
        Ok(Self { geometry, values: values.into(), version: 0 })
    }

    /// Text rendering of the horizontal slice `z`: one row per y (highest
    /// first), `#` occupied, `.` free, `?` unknown.
    pub fn slice_dump(&self, z: usize) -> String {
        let [nx, ny, _] = self.geometry.dims;
        let mut out = String::with_capacity((nx + 1) * ny);
        for y in (0..ny).rev() {
            for x in 0..nx {
                out.push(match self.voxel([x as i64, y as i64, z as i64]) {
                    OCCUPIED => '#',
                    FREE => '.',
                    _ => '?',
                });
            }
            out.push('\n');
        }
        out
    }
}

/// Latest published snapshot. Readers always see a complete grid.
#[derive(Debug)]
pub struct SnapshotSlot {
    current: RwLock<Arc<OccupancyGrid>>,
}

impl SnapshotSlot {
    pub fn new(initial: OccupancyGrid) -> Self {
        Self { current: RwLock::new(Arc::new(initial)) }
    }

    pub fn publish(&self, grid: OccupancyGrid) {
        let grid = Arc::new(grid);
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = grid;
    }

    pub fn latest(&self) -> Arc<OccupancyGrid> {
        Arc::clone(&self.current.read().unwrap_or_else(|e| e.into_inner()))
    }
}
