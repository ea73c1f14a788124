use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pa_mppi::config::RunConfig;
use pa_mppi::simulation::{Controller, EpisodeSummary, SummaryTable, Termination};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pa-mppi"));
    cmd.env_remove("PA_MPPI_OUT");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn table2() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/table2.cfg")
}

fn out(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn run_on_empty_scene_succeeds_and_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let o = run(&["run", "--set", "scene=empty:1.0", "--set", "mppi.samples=512", "--out", out(&dir)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("Success"));
    for f in ["trajectory.jsonl", "grid.bin", "summary.json", "config.toml"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let text = std::fs::read_to_string(dir.join("trajectory.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["t", "p", "q", "v", "omega", "command", "costs", "L_min", "ESS", "snapshot_version"] {
        assert!(first.get(key).is_some(), "{key} missing from the log");
    }

    let svg = tmp.path().join("plot.svg");
    let o = run(&["plot", out(&dir.join("trajectory.jsonl")), out(&dir.join("grid.bin")), "--out", out(&svg)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(svg).unwrap();
    assert!(svg.contains("<polyline") && svg.contains(r#"id="goal""#));
}

#[test]
fn tracking_baseline_is_stuck_behind_wide_wall() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--set",
        "controller=tracking-mppi",
        "--set",
        "scene=cwall:2.0",
        "--set",
        "mppi.samples=1024",
        "--out",
        out(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("Stuck"));
}

#[test]
fn missing_config_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("never");
    let o = run(&["run", "--config", "/no/such/config.toml", "--out", out(&dir)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.exists());
}

#[test]
fn malformed_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[mppi]\nsampels = 3\n").unwrap();
    let o = run(&["run", "--config", out(&cfg), "--out", out(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("sampels"), "{err}");

    let o = run(&["run", "--set", "mppi.temperature=-1", "--out", out(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn empty_batch_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["batch", "--out", out(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("batch.scenes"));
}

#[test]
fn batch_is_rerun_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |dir: &Path| {
        vec![
            "batch".to_string(),
            "--set".into(),
            "batch.controllers=[\"pa-mppi\"]".into(),
            "--set".into(),
            "batch.scenes=[{family=\"empty\", sizes=[1.0]}]".into(),
            "--set".into(),
            "batch.repeats=1".into(),
            "--set".into(),
            "mppi.samples=256".into(),
            "--set".into(),
            "episode.timeout=3.0".into(),
            "--jobs".into(),
            "2".into(),
            "--out".into(),
            out(dir).into(),
        ]
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = bin().args(args(dir)).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv_a = std::fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read_to_string(b.join("summary.csv")).unwrap());
    assert!(csv_a.starts_with(
        "controller,family,size,repeats,success_pct,stuck_pct,collision_pct,mean_time_to_goal_s,mean_penetration_m\n"
    ));
    assert_eq!(csv_a.lines().count(), 2);
    assert!(a.join("table.txt").is_file() && a.join("episodes.jsonl").is_file());
    assert!(a.join("episodes/pa-mppi_empty_1_0/trajectory.jsonl").is_file());
}

#[test]
fn output_directory_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("env");
    let o = bin()
        .args(["run", "--set", "scene=empty:1.0", "--set", "mppi.samples=256", "--set", "episode.timeout=1.0"])
        .env("PA_MPPI_OUT", &dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.join("summary.json").is_file());
}

#[test]
fn effective_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["config", "--config", out(&table2()), "--set", "mppi.temperature=0.1", "--set", "scene=hole:0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let dumped = tmp.path().join("dumped.toml");
    std::fs::write(&dumped, &o.stdout).unwrap();
    let again = run(&["config", "--config", out(&dumped)]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn table2_config_has_the_published_layout() {
    let cfg = RunConfig::load(&table2()).unwrap();
    let setups = cfg.batch.expand(&cfg.setup());
    assert_eq!(setups.len(), 2 * 9 * 5);

    let summaries: Vec<EpisodeSummary> = setups
        .iter()
        .map(|s| EpisodeSummary {
            controller: s.episode.controller,
            family: s.episode.scene.family,
            size: s.episode.scene.size,
            scene_seed: s.episode.scene.seed,
            seed: s.episode.seed,
            termination: Termination::Success,
            duration_s: 1.0,
            time_to_goal_s: Some(1.0),
            max_penetration_m: 0.0,
            starved: false,
            final_coverage: 0.5,
            final_position: [0.0; 3],
        })
        .collect();
    let table = SummaryTable::from_summaries(&summaries);
    assert_eq!(table.rows.len(), 18);
    assert!(table.rows.iter().all(|r| r.repeats == 5));
    let text = table.render_text();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    for column in ["cwall 0.5", "cwall 3", "hole 0.5", "hole 1", "fourwall 0.5", "fourwall 1.5"] {
        assert!(lines[0].contains(column), "{column} missing from {}", lines[0]);
    }
    assert!(lines[1].starts_with(Controller::PaMppi.name()));
    assert!(lines[4].starts_with(Controller::TrackingMppi.name()));
}

#[test]
fn unwritable_plot_output_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let o = run(&[
        "run",
        "--set",
        "scene=empty:1.0",
        "--set",
        "mppi.samples=256",
        "--set",
        "episode.timeout=0.5",
        "--out",
        out(&dir),
    ]);
    assert!(o.status.code().is_some());
    let o = run(&[
        "plot",
        out(&dir.join("trajectory.jsonl")),
        out(&dir.join("grid.bin")),
        "--out",
        "/no/such/dir/plot.svg",
    ]);
    assert_eq!(o.status.code(), Some(1));
}
