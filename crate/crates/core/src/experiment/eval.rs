//! Paired controlled/uncontrolled evaluation of a trained policy.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::spde::{Controller, Trajectory, ZeroControl};
use crate::train::{rollout_rng, state_cost, Problem, EVAL_STREAM_OFFSET};

/// Per-node mean and standard deviation of terminal fields.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EvalSummary {
    pub trials: usize,
    pub controlled: FieldStats,
    pub uncontrolled: FieldStats,
    /// Mean and sample standard deviation of the state cost.
    pub controlled_cost: (f64, f64),
    pub uncontrolled_cost: (f64, f64),
    /// Trials whose controlled run diverged (excluded from the statistics).
    pub diverged: usize,
    /// One controlled trajectory (the first trial), for plotting.
    pub sample: Trajectory,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

fn field_stats(terminals: &[&[f64]]) -> FieldStats {
    let nodes = terminals[0].len();
    let (mean, std) = (0..nodes)
        .map(|j| mean_std(&terminals.iter().map(|t| t[j]).collect::<Vec<_>>()))
        .unzip();
    FieldStats { mean, std }
}

fn run_trial(problem: &Problem, controller: &dyn Controller, seed: u64, trial: usize) -> Result<Trajectory> {
    let mut rng = rollout_rng(seed, EVAL_STREAM_OFFSET + trial as u64);
    let x0 = problem.simulator.initial_state(&problem.initial, &mut rng);
    problem.simulator.rollout(controller, &x0, problem.steps, &mut rng)
}

/// Runs `trials` paired rollouts: trial `i` of the controlled and the
/// uncontrolled system shares one noise stream.
pub fn evaluate_policy(params: &PolicyParams, problem: &Problem, trials: usize, seed: u64) -> Result<EvalSummary> {
    if trials < 2 {
        return Err(Error::Config(format!("evaluation needs at least two trials, got {trials}")));
    }
    let map = problem.simulator.map();
    if params.outputs() != map.count() || params.inputs() != problem.simulator.grid().node_count() {
        return Err(Error::Shape {
            expected: map.count(),
            found: params.outputs(),
            context: "policy does not fit the experiment grid/actuators",
        });
    }
    let zero = ZeroControl(map.count());
    let pairs: Vec<(Trajectory, Trajectory)> = (0..trials)
        .into_par_iter()
        .map(|i| Ok((run_trial(problem, params, seed, i)?, run_trial(problem, &zero, seed, i)?)))
        .collect::<Result<_>>()?;
    let kept: Vec<&(Trajectory, Trajectory)> = pairs.iter().filter(|(c, u)| !c.diverged && !u.diverged).collect();
    let diverged = trials - kept.len();
    if kept.len() < 2 {
        return Err(Error::AllRolloutsDiverged { rollouts: trials });
    }
    if diverged > 0 {
        log::warn!("{diverged} of {trials} evaluation trials diverged and were excluded");
    }
    let controlled: Vec<&[f64]> = kept.iter().map(|(c, _)| c.terminal().values()).collect();
    let uncontrolled: Vec<&[f64]> = kept.iter().map(|(_, u)| u.terminal().values()).collect();
    let c_cost: Vec<f64> = kept.iter().map(|(c, _)| state_cost(c, &problem.cost)).collect();
    let u_cost: Vec<f64> = kept.iter().map(|(_, u)| state_cost(u, &problem.cost)).collect();
    Ok(EvalSummary {
        trials: kept.len(),
        controlled: field_stats(&controlled),
        uncontrolled: field_stats(&uncontrolled),
        controlled_cost: mean_std(&c_cost),
        uncontrolled_cost: mean_std(&u_cost),
        diverged,
        sample: pairs[0].0.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::preset;
    use crate::policy::Architecture;

    fn small_problem() -> Problem {
        let mut c = preset("heat-1d").unwrap();
        c.grid.points = 16;
        c.time.horizon = 0.1;
        c.problem().unwrap()
    }

    #[test]
    fn zero_policy_matches_uncontrolled_exactly() {
        let problem = small_problem();
        let p = PolicyParams::zeros(&Architecture::mlp(16, 5)).unwrap();
        let s = evaluate_policy(&p, &problem, 4, 3).unwrap();
        assert_eq!(s.controlled, s.uncontrolled);
        assert_eq!(s.controlled_cost, s.uncontrolled_cost);
    }

    #[test]
    fn two_trials_have_nonzero_spread() {
        let problem = small_problem();
        let p = PolicyParams::zeros(&Architecture::mlp(16, 5)).unwrap();
        let s = evaluate_policy(&p, &problem, 2, 3).unwrap();
        assert!(s.controlled.std[1..15].iter().all(|&v| v > 0.0));
        assert!(evaluate_policy(&p, &problem, 1, 3).is_err());
    }

    #[test]
    fn mismatched_policy_is_rejected() {
        let problem = small_problem();
        let p = PolicyParams::zeros(&Architecture::mlp(32, 5)).unwrap();
        assert!(evaluate_policy(&p, &problem, 2, 3).is_err());
    }
}
