//! One batch of rollouts under a frozen random policy: augmented costs,
//! importance weights, effective sample size and the loss.
//!
//!     cargo run --release --example importance_weights -- nagumo-1d

use anyhow::Context;
use spde_rl::experiment::{initial_policy, preset};
use spde_rl::train::{loss, RolloutBatch};

fn main() -> anyhow::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "heat-1d".into());
    let cfg = preset(&name).with_context(|| format!("unknown preset {name}"))?;
    let problem = cfg.problem()?;
    let params = initial_policy(&cfg)?;
    let rho = cfg.training.rho;
    let trajs = problem.sample_batch(&params, cfg.seed, 0, cfg.training.rollouts)?;
    let batch = RolloutBatch::new(trajs, &problem.cost, rho)?;
    let mut order: Vec<usize> = (0..batch.len()).collect();
    order.sort_by(|&a, &b| batch.weights[b].total_cmp(&batch.weights[a]));
    println!("{:>4} {:>12} {:>12} {:>12} {:>10}", "r", "J", "N", "P", "w");
    for &r in order.iter().take(8) {
        let s = &batch.scalars[r];
        println!(
            "{r:>4} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.4}",
            s.state_cost, s.noise, s.policy, batch.weights[r]
        );
    }
    println!(
        "{} rollouts, ESS {:.2}, mean state cost {:.4e}, loss {:.4e}",
        batch.len(),
        batch.effective_sample_size(),
        batch.mean_state_cost(),
        loss(&batch, rho)
    );
    Ok(())
}
