//! Top-down SVG of a trajectory over one horizontal slice of the grid.
//!
//! Occupied voxels are red, free voxels green and unknown voxels blue.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{Context, Result};
use pa_mppi::mapping::{OccupancyGrid, FREE, OCCUPIED};
use pa_mppi::simulation::LogEntry;

use crate::output::RunRecord;

const PX_PER_M: f64 = 100.0;
const MARGIN: f64 = 20.0;

/// Start and goal positions in the x-y plane.
#[derive(Clone, Copy, Debug, Default)]
pub struct Markers {
    pub start: Option<[f64; 2]>,
    pub goal: Option<[f64; 2]>,
}

pub fn read_trajectory(path: &Path) -> Result<Vec<LogEntry>> {
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

pub fn render_files(trajectory: &Path, grid: &Path, z: Option<f64>) -> Result<String> {
    let log = read_trajectory(trajectory)?;
    let grid = OccupancyGrid::read_binary(BufReader::new(
        File::open(grid).with_context(|| format!("reading {}", grid.display()))?,
    ))
    .with_context(|| format!("reading {}", grid.display()))?;

    let mut markers = Markers { start: log.first().map(|e| [e.p[0], e.p[1]]), goal: None };
    if let Some(dir) = trajectory.parent() {
        if let Ok(text) = std::fs::read_to_string(dir.join("summary.json")) {
            if let Ok(record) = serde_json::from_str::<RunRecord>(&text) {
                let (s, g) = (record.scene.start.position, record.scene.goal.position);
                markers = Markers { start: Some([s.x, s.y]), goal: Some([g.x, g.y]) };
            }
        }
    }
    let z = z.unwrap_or_else(|| {
        if log.is_empty() {
            grid.geometry().bounds().min.z + 0.5 * grid.geometry().bounds().extent().z
        } else {
            log.iter().map(|e| e.p[2]).sum::<f64>() / log.len() as f64
        }
    });
    let outside = log.iter().filter(|e| !grid.geometry().bounds().contains(&e.p.into())).count();
    if outside > 0 {
        eprintln!("warning: {outside} trajectory points lie outside the grid bounds");
    }
    Ok(render(&log, &grid, z, markers))
}

/// The slice at height `z` with the trajectory polyline on top.
pub fn render(log: &[LogEntry], grid: &OccupancyGrid, z: f64, markers: Markers) -> String {
    let g = grid.geometry();
    let bounds = g.bounds();
    let [nx, ny, _] = g.dims;
    let width = bounds.extent().x * PX_PER_M + 2.0 * MARGIN;
    let height = bounds.extent().y * PX_PER_M + 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - bounds.min.x) * PX_PER_M;
    let sy = |y: f64| height - MARGIN - (y - bounds.min.y) * PX_PER_M;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.1} {height:.1}">"#
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let cell = g.resolution * PX_PER_M;
    let kz = ((z - g.origin.z) / g.resolution).floor() as i64;
    let _ = writeln!(svg, r#"<g id="grid" data-z="{z:.3}">"#);
    for ix in 0..nx as i64 {
        for iy in 0..ny as i64 {
            let color = match grid.voxel([ix, iy, kz]) {
                OCCUPIED => "#d62728",
                FREE => "#2ca02c",
                _ => "#1f77b4",
            };
            let x = sx(g.origin.x + ix as f64 * g.resolution);
            let y = sy(g.origin.y + (iy + 1) as f64 * g.resolution);
            let _ = writeln!(
                svg,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="{color}" fill-opacity="0.55"/>"#
            );
        }
    }
    let _ = writeln!(svg, "</g>");
    if !log.is_empty() {
        let points: Vec<String> = log.iter().map(|e| format!("{:.2},{:.2}", sx(e.p[0]), sy(e.p[1]))).collect();
        let _ = writeln!(
            svg,
            r##"<polyline id="trajectory" points="{}" fill="none" stroke="#000000" stroke-width="2"/>"##,
            points.join(" ")
        );
    }
    if let Some([x, y]) = markers.start {
        let _ = writeln!(svg, r##"<circle id="start" cx="{:.2}" cy="{:.2}" r="6" fill="#ffffff" stroke="#000000" stroke-width="2"/>"##, sx(x), sy(y));
    }
    if let Some([x, y]) = markers.goal {
        let (cx, cy) = (sx(x), sy(y));
        let _ = writeln!(
            svg,
            r##"<rect id="goal" x="{:.2}" y="{:.2}" width="12" height="12" fill="#ffd700" stroke="#000000" stroke-width="2"/>"##,
            cx - 6.0,
            cy - 6.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use pa_mppi::mapping::GridGeometry;

    fn entry(x: f64, y: f64) -> LogEntry {
        serde_json::from_value(serde_json::json!({
            "t": 0.0, "p": [x, y, 1.0], "q": [1.0, 0.0, 0.0, 0.0], "v": [0.0, 0.0, 0.0],
            "omega": [0.0, 0.0, 0.0], "command": [2.0, 0.0, 0.0, 0.0],
            "costs": {"goal": 0.0, "action": 0.0, "collision": 0.0, "perception": 0.0},
            "L_min": 0.0, "ESS": 1.0, "snapshot_version": 1
        }))
        .unwrap()
    }

    #[test]
    fn unknown_grid_renders_blue_with_one_polyline() {
        let grid = OccupancyGrid::unknown(GridGeometry { origin: Vector3::zeros(), dims: [4, 3, 2], resolution: 0.5 });
        let log = vec![entry(0.2, 0.2), entry(1.0, 0.7), entry(1.8, 1.2)];
        let svg = render(&log, &grid, 0.7, Markers { start: Some([0.2, 0.2]), goal: Some([1.8, 1.2]) });
        assert_eq!(svg.matches("#1f77b4").count(), 12);
        assert_eq!(svg.matches("#d62728").count(), 0);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains(r#"id="start""#) && svg.contains(r#"id="goal""#));
    }

    #[test]
    fn slice_follows_height() {
        let geometry = GridGeometry { origin: Vector3::zeros(), dims: [2, 2, 2], resolution: 1.0 };
        let mut values = vec![FREE; 8];
        values[geometry.linear_index([1, 0, 1]).unwrap()] = OCCUPIED;
        let grid = OccupancyGrid::from_values(geometry, values);
        assert_eq!(render(&[], &grid, 0.5, Markers::default()).matches("#d62728").count(), 0);
        assert_eq!(render(&[], &grid, 1.5, Markers::default()).matches("#d62728").count(), 1);
    }
}
