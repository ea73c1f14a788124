//! Runs one episode and prints its summary, with an optional coarse trace.
//!
//! Arguments are `key=value` configuration overrides:
//!
//! `cargo run --release --example episode -- scene=cwall:2.0 mppi.samples=2048 episode.seed=3 --trace`

use pa_mppi::config::RunConfig;
use pa_mppi::simulation::run_episode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let trace = args.iter().any(|a| a == "--trace");
    let overrides: Vec<&String> = args.iter().filter(|a| *a != "--trace").collect();

    let mut cfg = RunConfig::default();
    cfg.set("scene", "cwall:2.0")?;
    cfg.apply_overrides(&overrides)?;

    let started = std::time::Instant::now();
    let result = run_episode(&cfg.setup())?;
    let s = &result.summary;
    println!(
        "{} {} {} seed {}: {} after {:.2} s, penetration {:.3} m, final position {:.2?}, {:.1} s wall",
        s.controller.name(),
        s.family.name(),
        s.size,
        s.seed,
        s.termination.name(),
        s.duration_s,
        s.max_penetration_m,
        s.final_position,
        started.elapsed().as_secs_f64()
    );
    if trace {
        for e in result.trajectory.iter().step_by(25) {
            let speed = e.v.iter().map(|x| x * x).sum::<f64>().sqrt();
            println!(
                "t {:5.2}  p ({:.2}, {:.2}, {:.2})  |v| {:.2}  total {:7.2}  L_min {:7.2}  ESS {:.1}",
                e.t,
                e.p[0],
                e.p[1],
                e.p[2],
                speed,
                e.costs.total(),
                e.l_min,
                e.ess
            );
        }
    }
    Ok(())
}
