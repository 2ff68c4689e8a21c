//! Uncontrolled rollouts of every model, with a few summary numbers.
//!
//!     cargo run --release --example simulate_models

use spde_rl::experiment::{preset, PRESET_NAMES};
use spde_rl::spde::ZeroControl;
use spde_rl::train::{rollout_rng, state_cost};

fn main() -> anyhow::Result<()> {
    for name in PRESET_NAMES {
        let cfg = preset(name).expect("built-in preset");
        let problem = cfg.problem()?;
        let sim = &problem.simulator;
        let mut rng = rollout_rng(cfg.seed, 0);
        let x0 = sim.initial_state(&problem.initial, &mut rng);
        let traj = sim.rollout(&ZeroControl(sim.map().count()), &x0, problem.steps, &mut rng)?;
        let terminal = traj.terminal();
        let mean = terminal.values().iter().sum::<f64>() / terminal.values().len() as f64;
        println!(
            "{name:<17} {:?} {} nodes, {} steps: terminal mean {mean:+.4}, max |x| {:.4}, state cost {:.4e}",
            sim.model().kind,
            sim.grid().node_count(),
            traj.steps(),
            terminal.max_abs(),
            state_cost(&traj, &problem.cost)
        );
    }
    Ok(())
}
