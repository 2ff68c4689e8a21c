//! Reverse-mode loss gradient against central differences of the
//! surrogate loss, in both gradient modes.
//!
//!     cargo run --release --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spde_rl::experiment::{initial_policy, preset};
use spde_rl::train::{loss_gradient, surrogate_loss, GradientMode, RolloutBatch};

fn main() -> anyhow::Result<()> {
    let mut cfg = preset("heat-1d").expect("built-in preset");
    cfg.grid.points = 16;
    cfg.time.horizon = 0.05;
    let problem = cfg.problem()?;
    let map = problem.simulator.map();
    let rho = cfg.training.rho;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut params = initial_policy(&cfg)?;
    // keep hidden units off their kinks: the initial state is zero
    for v in params.values_mut() {
        *v += rng.random_range(-0.05..0.05);
    }
    let trajs = problem.sample_batch(&params, 4, 0, 3)?;
    let batch = RolloutBatch::new(trajs, &problem.cost, rho)?;
    for mode in [GradientMode::FullGraph, GradientMode::DetachedWeights] {
        let grad = loss_gradient(&params, &batch, map, rho, mode)?;
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let i = rng.random_range(0..params.len());
            let h = 1e-6;
            let mut p = params.clone();
            p.values_mut()[i] += h;
            let up = surrogate_loss(&p, &batch, map, rho, mode)?;
            p.values_mut()[i] -= 2.0 * h;
            let down = surrogate_loss(&p, &batch, map, rho, mode)?;
            let fd = (up - down) / (2.0 * h);
            let g = grad.gradient[i];
            worst = worst.max((fd - g).abs() / fd.abs().max(g.abs()).max(1e-8));
        }
        println!("{mode:?}: |grad| = {:.4e}, worst relative FD error over 50 parameters {worst:.2e}", grad.norm());
    }
    Ok(())
}
