//! Two boundary actuators heating a rod towards 3.0, printed as a terminal
//! profile of the controlled and uncontrolled means.
//!
//!     cargo run --release --example boundary_control -- 400

use spde_rl::experiment::{evaluate_policy, initial_policy, preset};
use spde_rl::train::train;

fn main() -> anyhow::Result<()> {
    let mut cfg = preset("heat-1d-boundary").expect("built-in preset");
    cfg.training.iterations = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(400);
    let problem = cfg.problem()?;
    let out = train(&problem, &cfg.train_settings(), initial_policy(&cfg)?)?;
    if let Some(abort) = out.abort {
        anyhow::bail!("training stopped at iteration {}: {}", abort.iteration, abort.error);
    }
    let eval = evaluate_policy(&out.params, &problem, 200, cfg.seed)?;
    let coords = problem.simulator.grid().coords();
    println!("{:>6} {:>18} {:>18}", "x", "controlled", "uncontrolled");
    for j in (0..coords.len()).step_by(7) {
        println!(
            "{:>6.3} {:>9.3} ± {:<6.3} {:>9.3} ± {:<6.3}",
            coords[j], eval.controlled.mean[j], 2.0 * eval.controlled.std[j], eval.uncontrolled.mean[j], 2.0 * eval.uncontrolled.std[j]
        );
    }
    Ok(())
}
