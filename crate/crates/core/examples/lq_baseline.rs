//! Exact optimum of the deterministic linear-quadratic part of a heat preset.
//!
//! The training objective is `E[J + P/2]`, `P = int <Phi, Phi> dt`. For the
//! heat models this is linear-quadratic, so the best open-loop control can be
//! solved for directly from impulse responses. The example prints the state
//! cost of that control next to the uncontrolled one, which bounds what any
//! trained policy can be expected to reach.
//!
//!     cargo run --release --example lq_baseline -- heat-1d
//!     cargo run --release --example lq_baseline -- heat-2d 16

use anyhow::{bail, Context};
use nalgebra::{DMatrix, DVector};
use spde_rl::experiment::preset;
use spde_rl::field::Field;
use spde_rl::spde::{ModelKind, StepForcing, ZeroControl};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "heat-1d".into());
    let mut cfg = preset(&name).with_context(|| format!("unknown preset {name}"))?;
    if let Some(points) = args.next() {
        cfg.grid.points = points.parse()?;
    }
    if !matches!(cfg.model.kind, ModelKind::Heat1dDirichlet | ModelKind::Heat2dDirichlet) {
        bail!("{name} is not a distributed heat preset");
    }
    let problem = cfg.problem()?;
    let sim = &problem.simulator;
    let grid = sim.grid().clone();
    let map = sim.map();
    let (n_act, steps, dt) = (map.count(), problem.steps, sim.dt());
    let kappa = problem.cost.kappa;

    // impulse responses: state after step k+1 for a unit control at step 0
    let zeros = vec![0.0; grid.node_count()];
    let mut impulses = Vec::with_capacity(n_act);
    for l in 0..n_act {
        let mut x = Field::zeros(&grid);
        let mut states = Vec::with_capacity(steps);
        for k in 0..steps {
            let control = if k == 0 { map.column(l) } else { &zeros[..] };
            let forcing = StepForcing {
                control,
                flux: [0.0; 2],
                noise: &zeros,
                flux_noise: [0.0; 2],
            };
            x = sim.stepper().step(&x, &forcing)?;
            states.push(x.values().to_vec());
        }
        impulses.push(states);
    }

    let targets: Vec<(usize, f64)> = problem
        .cost
        .regions
        .iter()
        .flat_map(|r| r.nodes.iter().map(move |&n| (n, r.desired)))
        .collect();
    let vars = steps * n_act;
    let mut a = DMatrix::zeros(steps * targets.len(), vars);
    let mut d = DVector::zeros(steps * targets.len());
    for t in 0..steps {
        for (i, &(node, desired)) in targets.iter().enumerate() {
            let row = t * targets.len() + i;
            d[row] = desired;
            for s in 0..=t {
                for (l, imp) in impulses.iter().enumerate() {
                    a[(row, s * n_act + l)] = imp[t - s][node];
                }
            }
        }
    }
    let gram = DMatrix::from_row_slice(n_act, n_act, map.gram());
    let solve = |control_weight: f64| -> anyhow::Result<(f64, f64)> {
        let mut h = 2.0 * kappa * a.transpose() * &a;
        for s in 0..steps {
            let o = s * n_act;
            let mut block = h.view_mut((o, o), (n_act, n_act));
            block += control_weight * dt * &gram;
        }
        let g = 2.0 * kappa * a.transpose() * &d;
        let u = h.cholesky().context("normal equations are not positive definite")?.solve(&g);
        let r = &a * &u - &d;
        let j = kappa * r.norm_squared();
        let p: f64 = (0..steps)
            .map(|s| map.quadratic(u.rows(s * n_act, n_act).as_slice()) * dt)
            .sum();
        Ok((j, p))
    };

    let j0 = kappa * d.norm_squared();
    let (j_opt, p_opt) = solve(1.0)?;
    let (j_reach, p_reach) = solve(1e-9)?;

    let zero = ZeroControl(n_act);
    let batch = problem.sample_batch(&zero, cfg.seed, 0, 400)?;
    let j_noisy = batch
        .iter()
        .map(|t| spde_rl::train::state_cost(t, &problem.cost))
        .sum::<f64>()
        / batch.len() as f64;
    let floor = j_noisy - j0;

    println!("{name} on {} nodes, {steps} steps, {n_act} actuators", grid.node_count());
    println!("uncontrolled state cost      {j_noisy:.4e}  (deterministic {j0:.4e}, noise floor {floor:.4e})");
    println!("optimal open loop: J = {j_opt:.4e}, P/2 = {:.4e}", p_opt / 2.0);
    println!("target-reaching control: J = {j_reach:.4e}, P/2 = {:.4e}", p_reach / 2.0);
    println!(
        "best reachable mean-cost factor {:.3}x (ignoring the noise floor {:.3}x)",
        j_noisy / (j_opt + floor),
        j0 / j_opt
    );
    Ok(())
}
