use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pa_mppi::config::RunConfig;
use pa_mppi::simulation::{run_batch, run_episode, EpisodeResult, Termination};

mod output;
mod plot;

use output::{write_atomic, write_grid, write_jsonl, write_summary_csv, RunRecord};

#[derive(Parser)]
#[command(name = "pa-mppi", version, about = "Perception-aware MPPI navigation in simulated unknown scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode.
    Run(RunArgs),
    /// Run every controller, scene and repeat of the `[batch]` block.
    Batch(BatchArgs),
    /// Render a top-down SVG of a trajectory over an occupancy slice.
    Plot(PlotArgs),
    /// Print the effective configuration.
    Config(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `mppi.samples=2048` or `scene=cwall:2.0`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory.
    #[arg(long, env = "PA_MPPI_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Seed for both the scene and the optimizer noise.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Base seed; repeat `r` uses `seed + r`.
    #[arg(long)]
    seed: Option<u64>,
    /// Episodes run concurrently; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    /// Trajectory JSONL written by `run`.
    trajectory: PathBuf,
    /// Grid binary written by `run`.
    grid: PathBuf,
    /// Output SVG.
    #[arg(long, default_value = "plot.svg")]
    out: PathBuf,
    /// Height of the occupancy slice, meters; defaults to the mean altitude.
    #[arg(long)]
    z: Option<f64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply_overrides(&self.overrides)?;
        Ok(cfg)
    }
}

fn exit_code(t: Termination) -> u8 {
    match t {
        Termination::Success => 0,
        Termination::Stuck => 2,
        Termination::Collision => 3,
    }
}

fn write_episode(dir: &Path, result: &EpisodeResult) -> Result<()> {
    write_jsonl(&dir.join("trajectory.jsonl"), &result.trajectory)?;
    write_grid(&dir.join("grid.bin"), &result.final_grid)?;
    let record = RunRecord { summary: result.summary.clone(), scene: result.scene.clone(), events: result.events };
    write_atomic(&dir.join("summary.json"), serde_json::to_string_pretty(&record)?.as_bytes())
}

fn cmd_run(args: RunArgs) -> Result<u8> {
    let mut cfg = args.config.load()?;
    if let Some(seed) = args.seed {
        cfg.episode.seed = seed;
        cfg.episode.scene.seed = seed;
    }
    let result = run_episode(&cfg.setup())?;
    let dir = &args.out.out;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_atomic(&dir.join("config.toml"), cfg.to_toml_string()?.as_bytes())?;
    write_episode(dir, &result)?;

    let s = &result.summary;
    match s.time_to_goal_s {
        Some(t) => println!("{} time_to_goal {t:.2} s", s.termination.name()),
        None => println!("{} after {:.2} s", s.termination.name(), s.duration_s),
    }
    Ok(exit_code(s.termination))
}

fn cmd_batch(args: BatchArgs) -> Result<u8> {
    let mut cfg = args.config.load()?;
    if let Some(seed) = args.seed {
        cfg.batch.seed = seed;
    }
    if cfg.batch.is_empty() {
        bail!(
            "the batch is empty; give at least one controller, scene size and repeat, e.g.\n  \
             --set 'batch.scenes=[{{family=\"cwall\", sizes=[2.0]}}]'"
        );
    }
    let setups = cfg.batch.expand(&cfg.setup());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.unwrap_or(0)).build()?;
    let (episodes, table) = pool.install(|| run_batch(setups));

    let dir = &args.out.out;
    let episode_dir = dir.join("episodes");
    std::fs::create_dir_all(&episode_dir).with_context(|| format!("creating {}", episode_dir.display()))?;
    write_atomic(&dir.join("config.toml"), cfg.to_toml_string()?.as_bytes())?;
    let mut summaries = Vec::new();
    for e in &episodes {
        let ep = &e.setup.episode;
        let name = format!("{}_{}_{}_{}", ep.controller.name(), ep.scene.family.name(), ep.scene.size, ep.seed);
        match &e.result {
            Ok(result) => {
                let sub = episode_dir.join(&name);
                std::fs::create_dir_all(&sub)?;
                write_episode(&sub, result)?;
                summaries.push(result.summary.clone());
            }
            Err(err) => eprintln!("episode {name} failed: {err}"),
        }
    }
    write_jsonl(&dir.join("episodes.jsonl"), &summaries)?;
    write_summary_csv(&dir.join("summary.csv"), &table)?;
    let text = table.render_text();
    write_atomic(&dir.join("table.txt"), text.as_bytes())?;
    print!("{text}");
    Ok(0)
}

fn cmd_plot(args: PlotArgs) -> Result<u8> {
    let svg = plot::render_files(&args.trajectory, &args.grid, args.z)?;
    write_atomic(&args.out, svg.as_bytes())?;
    Ok(0)
}

fn cmd_config(args: ConfigArgs) -> Result<u8> {
    print!("{}", args.load()?.to_toml_string()?);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Batch(a) => cmd_batch(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Config(a) => cmd_config(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
