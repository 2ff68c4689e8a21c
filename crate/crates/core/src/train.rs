//! State costs, importance weights, the variational loss and its gradient,
//! and the outer training loop.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_same_grid, ActuatorMap, Field, Grid};
use crate::policy::{adam_step, AdamConfig, OptimizerState, PolicyParams};
use crate::spde::{InitialCondition, Simulator, Trajectory};

/// Nodes whose state is pulled towards `desired`.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetRegion {
    pub nodes: Vec<usize>,
    pub desired: f64,
}

/// `J = kappa * sum_t sum_{regions} sum_{nodes} (x - desired)^2` over `X_1 .. X_T`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostSpec {
    pub regions: Vec<TargetRegion>,
    pub kappa: f64,
}

impl CostSpec {
    pub fn new(grid: &Grid, regions: Vec<TargetRegion>, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::Config(format!("kappa must be positive, got {kappa}")));
        }
        for (i, r) in regions.iter().enumerate() {
            if r.nodes.is_empty() {
                return Err(Error::Config(format!("target region {i} contains no grid nodes")));
            }
            if let Some(&bad) = r.nodes.iter().find(|&&n| n >= grid.node_count()) {
                return Err(Error::Config(format!(
                    "target region {i} refers to node {bad} outside a grid of {} nodes",
                    grid.node_count()
                )));
            }
        }
        Ok(Self { regions, kappa })
    }

    /// Cost contribution of one state.
    pub fn step_cost(&self, x: &Field) -> f64 {
        let v = x.values();
        self.kappa
            * self
                .regions
                .iter()
                .map(|r| r.nodes.iter().map(|&n| (v[n] - r.desired).powi(2)).sum::<f64>())
                .sum::<f64>()
    }
}

/// Nodes of a 1D grid inside `[lo, hi]`. If no node falls inside, the nodes
/// whose cells `[x - dx/2, x + dx/2]` overlap the interval are used instead.
pub fn nodes_in_interval(grid: &Grid, lo: f64, hi: f64) -> Vec<usize> {
    let tol = 1e-12 * grid.extent();
    let coords = grid.coords();
    let inside: Vec<usize> = (0..coords.len())
        .filter(|&i| coords[i] >= lo - tol && coords[i] <= hi + tol)
        .collect();
    if !inside.is_empty() {
        return inside;
    }
    let h = 0.5 * grid.spacing();
    (0..coords.len())
        .filter(|&i| coords[i] + h > lo && coords[i] - h < hi)
        .collect()
}

/// Nodes of a grid inside the box `x in [x_lo, x_hi]` (and `y in [y_lo, y_hi]` in 2D),
/// with the per-axis fallback of [`nodes_in_interval`].
pub fn nodes_in_box(grid: &Grid, x: [f64; 2], y: Option<[f64; 2]>) -> Vec<usize> {
    let xs = nodes_in_interval(grid, x[0], x[1]);
    match (grid.dim(), y) {
        (1, _) => xs,
        (_, None) => {
            let j = grid.points();
            (0..j).flat_map(|iy| xs.iter().map(move |&ix| iy * j + ix)).collect()
        }
        (_, Some(y)) => {
            let ys = nodes_in_interval(grid, y[0], y[1]);
            let j = grid.points();
            ys.iter().flat_map(|&iy| xs.iter().map(move |&ix| iy * j + ix)).collect()
        }
    }
}

/// State cost of a trajectory; `+inf` if it diverged.
pub fn state_cost(traj: &Trajectory, spec: &CostSpec) -> f64 {
    if traj.diverged {
        return f64::INFINITY;
    }
    traj.states[1..].iter().map(|x| spec.step_cost(x)).sum()
}

/// `J + N / sqrt(rho) + P / 2`.
pub fn augmented_cost(j: f64, n: f64, p: f64, rho: f64) -> f64 {
    if j == f64::INFINITY {
        return f64::INFINITY;
    }
    j + n / rho.sqrt() + 0.5 * p
}

/// Normalized `exp(-rho J~)`, shifted by the minimum for stability.
pub fn importance_weights(costs: &[f64], rho: f64) -> Result<Vec<f64>> {
    let min = costs
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::AllRolloutsDiverged { rollouts: costs.len() });
    }
    let raw: Vec<f64> = costs
        .iter()
        .map(|&c| if c.is_finite() { (-rho * (c - min)).exp() } else { 0.0 })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// `1 / sum w^2`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Per-rollout summary scalars.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutScalars {
    /// State cost `J_r`.
    pub state_cost: f64,
    /// `N_r = sum_t N_t`.
    pub noise: f64,
    /// `P_r = sum_t P_t dt`.
    pub policy: f64,
    /// `J~_r`.
    pub augmented: f64,
}

impl RolloutScalars {
    /// `-sqrt(rho) N - rho/2 P`.
    pub fn log_density(&self, rho: f64) -> f64 {
        -rho.sqrt() * self.noise - 0.5 * rho * self.policy
    }
}

/// Rollouts of one iteration together with their weights.
#[derive(Clone, Debug)]
pub struct RolloutBatch {
    pub trajectories: Vec<Trajectory>,
    pub scalars: Vec<RolloutScalars>,
    pub weights: Vec<f64>,
    pub rho: f64,
}

impl RolloutBatch {
    pub fn new(trajectories: Vec<Trajectory>, spec: &CostSpec, rho: f64) -> Result<Self> {
        let scalars: Vec<RolloutScalars> = trajectories
            .iter()
            .map(|t| {
                let j = state_cost(t, spec);
                let (n, p) = (t.noise_sum(), t.policy_sum());
                RolloutScalars {
                    state_cost: j,
                    noise: n,
                    policy: p,
                    augmented: augmented_cost(j, n, p, rho),
                }
            })
            .collect();
        Self::from_scalars(trajectories, scalars, rho)
    }

    /// Batch from precomputed scalars (used by tests and by callers with their own costs).
    pub fn from_scalars(trajectories: Vec<Trajectory>, scalars: Vec<RolloutScalars>, rho: f64) -> Result<Self> {
        let costs: Vec<f64> = scalars.iter().map(|s| s.augmented).collect();
        let weights = importance_weights(&costs, rho)?;
        Ok(Self {
            trajectories,
            scalars,
            weights,
            rho,
        })
    }

    pub fn len(&self) -> usize {
        self.scalars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scalars.is_empty()
    }

    pub fn effective_sample_size(&self) -> f64 {
        effective_sample_size(&self.weights)
    }

    /// Mean state cost over the rollouts that did not diverge.
    pub fn mean_state_cost(&self) -> f64 {
        let finite: Vec<f64> = self.scalars.iter().map(|s| s.state_cost).filter(|c| c.is_finite()).collect();
        if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        }
    }

    pub fn diverged(&self) -> usize {
        self.trajectories.iter().filter(|t| t.diverged).count()
    }
}

/// `L = sum_r w_r (-sqrt(rho) N_r - rho/2 P_r)`.
pub fn loss(batch: &RolloutBatch, rho: f64) -> f64 {
    batch
        .scalars
        .iter()
        .zip(&batch.weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(s, w)| w * s.log_density(rho))
        .sum()
}

/// Whether the importance weights are differentiated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// Weights depend on the parameters through `J~`.
    #[default]
    FullGraph,
    /// Weights are treated as constants.
    DetachedWeights,
}

/// Per-rollout log densities and the weight derivative factors `dL / d l_r`.
fn weight_factors(scalars: &[RolloutScalars], weights: &[f64], rho: f64, mode: GradientMode) -> Vec<f64> {
    let logs: Vec<f64> = scalars.iter().map(|s| s.log_density(rho)).collect();
    let mean: f64 = logs
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(l, w)| w * l)
        .sum();
    weights
        .iter()
        .zip(&logs)
        .map(|(&w, &l)| match mode {
            _ if w == 0.0 => 0.0,
            GradientMode::DetachedWeights => w,
            GradientMode::FullGraph => w * (1.0 + l - mean),
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct LossGradient {
    pub loss: f64,
    pub gradient: Vec<f64>,
}

impl LossGradient {
    pub fn norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Gradient of [`loss`] with respect to the policy parameters.
///
/// Recorded states are data. The policy outputs `u_t` enter `N_t`, `P_t`
/// and, in full-graph mode, the importance weights; the implied noise moves
/// with `u_t` (see [`surrogate_loss`]), which cancels the quadratic term and
/// leaves `d l / d u_t = -sqrt(rho) b_t`.
pub fn loss_gradient(
    params: &PolicyParams,
    batch: &RolloutBatch,
    map: &ActuatorMap,
    rho: f64,
    mode: GradientMode,
) -> Result<LossGradient> {
    let factors = weight_factors(&batch.scalars, &batch.weights, rho, mode);
    if factors.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFiniteGradient { term: "importance weight" });
    }
    let sqrt_rho = rho.sqrt();
    let per_rollout: Vec<Result<Option<Vec<f64>>>> = batch
        .trajectories
        .par_iter()
        .zip(factors.par_iter())
        .map(|(traj, &c)| {
            if c == 0.0 {
                return Ok(None);
            }
            let mut grad = vec![0.0; params.len()];
            for t in 0..traj.steps() {
                let x = &traj.states[t];
                check_same_grid(x.grid(), map.grid())?;
                let tape = params.record(x.values())?;
                if tape.output().iter().any(|u| !u.is_finite()) {
                    return Err(Error::NonFiniteGradient { term: "policy inner product" });
                }
                let mut upstream = Vec::with_capacity(map.count());
                for &b in &traj.noise_projection[t] {
                    let noise = -sqrt_rho * b;
                    if !noise.is_finite() {
                        return Err(Error::NonFiniteGradient { term: "noise inner product" });
                    }
                    upstream.push(c * noise);
                }
                params.backward(&tape, &upstream, &mut grad)?;
            }
            Ok(Some(grad))
        })
        .collect();
    let mut gradient = vec![0.0; params.len()];
    for g in per_rollout {
        if let Some(g) = g? {
            for (a, b) in gradient.iter_mut().zip(&g) {
                *a += b;
            }
        }
    }
    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { term: "policy network" });
    }
    Ok(LossGradient {
        loss: loss(batch, rho),
        gradient,
    })
}

/// The loss as a function of `params` with the batch's states held fixed.
/// The noise is what the recorded path implies under the new policy:
/// `u dt + dW / sqrt(rho)` is kept, so each noise projection moves by
/// `-sqrt(rho) dt M (u - u_recorded)`. In detached mode the batch weights are reused; in full-graph mode
/// they are recomputed from `J~(params)`. At the parameters that produced the
/// batch this equals [`loss`], and its derivative is [`loss_gradient`].
pub fn surrogate_loss(
    params: &PolicyParams,
    batch: &RolloutBatch,
    map: &ActuatorMap,
    rho: f64,
    mode: GradientMode,
) -> Result<f64> {
    let mut scalars = Vec::with_capacity(batch.len());
    for (traj, old) in batch.trajectories.iter().zip(&batch.scalars) {
        let shift_scale = rho.sqrt() * traj.dt;
        let mut n = 0.0;
        let mut p = 0.0;
        for t in 0..traj.steps() {
            let u = params.forward(&traj.states[t])?;
            let shift: Vec<f64> = u.iter().zip(&traj.controls[t]).map(|(a, b)| a - b).collect();
            let m_shift = map.gram_apply(&shift);
            n += u
                .iter()
                .zip(&traj.noise_projection[t])
                .zip(&m_shift)
                .map(|((a, b), m)| a * (b - shift_scale * m))
                .sum::<f64>();
            p += map.quadratic(&u);
        }
        let p = p * traj.dt;
        scalars.push(RolloutScalars {
            state_cost: old.state_cost,
            noise: n,
            policy: p,
            augmented: augmented_cost(old.state_cost, n, p, rho),
        });
    }
    let weights = match mode {
        GradientMode::DetachedWeights => batch.weights.clone(),
        GradientMode::FullGraph => {
            let costs: Vec<f64> = scalars.iter().map(|s| s.augmented).collect();
            importance_weights(&costs, rho)?
        }
    };
    Ok(scalars
        .iter()
        .zip(&weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(s, w)| w * s.log_density(rho))
        .sum())
}

/// Random stream for rollout `index` of a run seeded with `seed`.
pub fn rollout_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Streams reserved for evaluation trials, disjoint from training.
pub const EVAL_STREAM_OFFSET: u64 = 1 << 62;

/// Everything about the controlled system that a training run needs.
#[derive(Clone, Debug)]
pub struct Problem {
    pub simulator: Simulator,
    pub cost: CostSpec,
    pub initial: InitialCondition,
    pub steps: usize,
}

impl Problem {
    /// Generates `count` rollouts on streams `first_stream ..`, in parallel.
    pub fn sample_batch(
        &self,
        controller: &dyn crate::spde::Controller,
        seed: u64,
        first_stream: u64,
        count: usize,
    ) -> Result<Vec<Trajectory>> {
        (0..count)
            .into_par_iter()
            .map(|r| {
                let mut rng = rollout_rng(seed, first_stream + r as u64);
                let x0 = self.simulator.initial_state(&self.initial, &mut rng);
                self.simulator.rollout(controller, &x0, self.steps, &mut rng)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub iterations: usize,
    pub rollouts: usize,
    pub rho: f64,
    pub adam: AdamConfig,
    pub gradient_mode: GradientMode,
    pub seed: u64,
}

/// One row of the training history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub iteration: usize,
    pub loss: f64,
    pub mean_state_cost: f64,
    pub ess: f64,
    pub grad_norm: f64,
    pub diverged: usize,
    pub wall_time: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub records: Vec<IterationRecord>,
}

impl TrainReport {
    pub fn state_costs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_state_cost).collect()
    }
}

/// Why a run stopped early.
#[derive(Debug)]
pub struct TrainAbort {
    /// Iteration (1-based) that failed.
    pub iteration: usize,
    pub error: Error,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Parameters after the last successful update.
    pub params: PolicyParams,
    pub report: TrainReport,
    pub abort: Option<TrainAbort>,
}

/// Trailing moving average; entry `k` averages the last `window` values up to `k`.
pub fn smoothed(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..values.len())
        .map(|k| {
            let start = (k + 1).saturating_sub(window);
            let slice = &values[start..=k];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

fn run_iteration(
    problem: &Problem,
    settings: &TrainSettings,
    params: &PolicyParams,
    iteration: usize,
) -> Result<(RolloutBatch, LossGradient)> {
    let first = (iteration as u64 - 1) * settings.rollouts as u64;
    let trajectories = problem.sample_batch(params, settings.seed, first, settings.rollouts)?;
    let batch = RolloutBatch::new(trajectories, &problem.cost, settings.rho)?;
    let grad = loss_gradient(params, &batch, problem.simulator.map(), settings.rho, settings.gradient_mode)?;
    Ok((batch, grad))
}

/// Runs the training loop, calling `on_iteration` after every update.
/// Errors from the callback stop training and are returned as-is.
pub fn train_with<F>(problem: &Problem, settings: &TrainSettings, initial: PolicyParams, mut on_iteration: F) -> Result<TrainOutcome>
where
    F: FnMut(&IterationRecord, &PolicyParams) -> Result<()>,
{
    if settings.rollouts == 0 || settings.iterations == 0 {
        return Err(Error::Config("training needs at least one iteration and one rollout".into()));
    }
    if !(settings.rho > 0.0 && settings.rho.is_finite()) {
        return Err(Error::Config(format!("rho must be positive, got {}", settings.rho)));
    }
    settings.adam.validate()?;
    if initial.outputs() != problem.simulator.map().count() {
        return Err(Error::Shape {
            expected: problem.simulator.map().count(),
            found: initial.outputs(),
            context: "policy outputs vs actuators",
        });
    }
    let mut params = initial;
    let mut optimizer = OptimizerState::new(settings.adam, params.len());
    let mut report = TrainReport::default();
    let started = Instant::now();
    for iteration in 1..=settings.iterations {
        let (batch, grad) = match run_iteration(problem, settings, &params, iteration) {
            Ok(v) => v,
            Err(error) => {
                log::error!("training stopped at iteration {iteration}: {error}");
                return Ok(TrainOutcome {
                    params,
                    report,
                    abort: Some(TrainAbort { iteration, error }),
                });
            }
        };
        let ess = batch.effective_sample_size();
        if ess < settings.rollouts as f64 / 10.0 {
            log::warn!("iteration {iteration}: effective sample size {ess:.2} of {} rollouts", settings.rollouts);
        }
        adam_step(&mut optimizer, &mut params, &grad.gradient)?;
        let record = IterationRecord {
            iteration,
            loss: grad.loss,
            mean_state_cost: batch.mean_state_cost(),
            ess,
            grad_norm: grad.norm(),
            diverged: batch.diverged(),
            wall_time: started.elapsed().as_secs_f64(),
        };
        log::debug!(
            "iteration {iteration}: loss {:.4e}, mean cost {:.4e}, ess {ess:.1}",
            record.loss,
            record.mean_state_cost
        );
        report.records.push(record);
        on_iteration(&record, &params)?;
    }
    Ok(TrainOutcome {
        params,
        report,
        abort: None,
    })
}

pub fn train(problem: &Problem, settings: &TrainSettings, initial: PolicyParams) -> Result<TrainOutcome> {
    train_with(problem, settings, initial, |_, _| Ok(()))
}
