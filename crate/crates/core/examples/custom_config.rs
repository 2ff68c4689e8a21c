//! Builds an experiment from config text that overrides a preset, and shows
//! the error a bad key produces.
//!
//!     cargo run --release --example custom_config

use spde_rl::experiment::parse_config;

const TEXT: &str = r#"
preset = "burgers-1d"
name = "burgers-fine"

[grid]
points = 96

[training]
iterations = 20
rollouts = 16
"#;

fn main() -> anyhow::Result<()> {
    let cfg = parse_config(TEXT)?;
    println!(
        "{}: {} points, {} steps, K={}, R={}, output {:?}",
        cfg.name,
        cfg.grid.points,
        cfg.steps().unwrap_or(0),
        cfg.training.iterations,
        cfg.training.rollouts,
        cfg.output
    );
    let problem = cfg.problem()?;
    println!("{} actuators, {} target nodes", problem.simulator.map().count(), problem.cost.regions.iter().map(|r| r.nodes.len()).sum::<usize>());
    match parse_config(&TEXT.replace("rollouts", "rolouts")) {
        Ok(_) => anyhow::bail!("misspelled key was accepted"),
        Err(e) => println!("rejected as expected: {e}"),
    }
    Ok(())
}
