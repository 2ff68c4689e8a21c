//! Trains a preset in-process and prints the smoothed cost curve, then
//! writes the usual artifacts under `target/examples-runs`.
//!
//!     cargo run --release --example train_preset -- burgers-1d 300

use anyhow::Context;
use spde_rl::experiment::{preset, run_experiment};
use spde_rl::train::smoothed;

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "burgers-1d".into());
    let mut cfg = preset(&name).with_context(|| format!("unknown preset {name}"))?;
    if let Some(k) = args.next() {
        cfg.training.iterations = k.parse()?;
    }
    let root = std::path::Path::new("target/examples-runs");
    let run = run_experiment(&cfg, root)?;
    let costs = smoothed(&run.outcome.report.state_costs(), 20);
    let stride = (costs.len() / 10).max(1);
    for (k, c) in costs.iter().enumerate().step_by(stride) {
        println!("iteration {:>5}: smoothed state cost {c:.4e}", k + 1);
    }
    let eval = run.eval.expect("finished runs are evaluated");
    println!(
        "final {:.4e}; eval cost {:.4e} controlled vs {:.4e} uncontrolled; artifacts in {}",
        costs[costs.len() - 1],
        eval.controlled_cost.0,
        eval.uncontrolled_cost.0,
        run.dir.display()
    );
    Ok(())
}
