//! Output files, each written to a temporary sibling and renamed into place.

use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use pa_mppi::mapping::OccupancyGrid;
use pa_mppi::simulation::{EpisodeSummary, EventCounts, SummaryTable};
use pa_mppi::world::Scene;
use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

/// Contents of `summary.json`.
#[derive(Serialize, Deserialize)]
pub struct RunRecord {
    pub summary: EpisodeSummary,
    pub scene: Scene,
    pub events: EventCounts,
}

fn with_atomic_file(path: &Path, fill: impl FnOnce(&mut BufWriter<&mut NamedTempFile>) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).with_context(|| format!("writing {}", path.display()))?;
    {
        let mut w = BufWriter::new(&mut tmp);
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    with_atomic_file(path, |w| Ok(w.write_all(bytes)?))
}

/// One JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    with_atomic_file(path, |w| {
        for row in rows {
            serde_json::to_writer(&mut *w, row)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn write_grid(path: &Path, grid: &OccupancyGrid) -> Result<()> {
    with_atomic_file(path, |w| Ok(grid.write_binary(w)?))
}

pub const CSV_COLUMNS: [&str; 9] = [
    "controller",
    "family",
    "size",
    "repeats",
    "success_pct",
    "stuck_pct",
    "collision_pct",
    "mean_time_to_goal_s",
    "mean_penetration_m",
];

pub fn write_summary_csv(path: &Path, table: &SummaryTable) -> Result<()> {
    with_atomic_file(path, |w| {
        let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        csv.write_record(CSV_COLUMNS)?;
        for row in &table.rows {
            csv.serialize(row)?;
        }
        csv.flush()?;
        Ok(())
    })
}
