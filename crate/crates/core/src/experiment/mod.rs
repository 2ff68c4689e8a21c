//! Experiment front end: configs, presets, training runs and their artifacts.

pub mod artifacts;
pub mod config;
pub mod eval;
pub mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::policy::{init_params, save_checkpoint, PolicyParams};
use crate::train::{rollout_rng, train_with, TrainOutcome};

pub use artifacts::{read_training_report, write_training_report, TrainingLog};
pub use config::{load_config, parse_config, preset, ExperimentConfig, PRESET_NAMES};
pub use eval::{evaluate_policy, EvalSummary, FieldStats};

/// Environment variable overriding the directory that run outputs go under.
pub const OUTPUT_ROOT_VAR: &str = "SPDE_RL_OUTPUT_ROOT";

pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const PROFILE_SVG: &str = "terminal_profile.svg";
pub const SAMPLE_SVG: &str = "sample_rollout.svg";

/// `$SPDE_RL_OUTPUT_ROOT`, or `runs` in the working directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Broad failure classes, used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureKind {
    Config,
    Numerical,
    Other,
}

pub fn classify(err: &Error) -> FailureKind {
    match err {
        Error::Config(_) | Error::InvalidGrid(_) | Error::InvalidActuator(_) | Error::InvalidModel(_) => FailureKind::Config,
        Error::AllRolloutsDiverged { .. } | Error::NonFiniteGradient { .. } | Error::NoConvergence { .. } => {
            FailureKind::Numerical
        }
        _ => FailureKind::Other,
    }
}

/// Seed of the policy initialization (kept apart from the rollout streams).
fn init_seed(seed: u64) -> u64 {
    seed ^ 0x5eed_1a17_0000_0000
}

pub fn initial_policy(config: &ExperimentConfig) -> Result<PolicyParams> {
    let mut rng = rollout_rng(init_seed(config.seed), 0);
    init_params(&config.architecture()?, &mut rng, config.init_scheme())
}

/// What [`run_experiment`] produced.
#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub outcome: TrainOutcome,
    /// Present when training finished without aborting.
    pub eval: Option<EvalSummary>,
}

/// Trains, evaluates and writes every artifact into `root/<config.output>`.
///
/// A training abort still leaves the config snapshot, the partial training
/// CSV and a checkpoint of the last good parameters; the abort is then
/// returned as the error.
pub fn run_experiment(config: &ExperimentConfig, root: &Path) -> Result<RunSummary> {
    config.validate()?;
    let dir = root.join(&config.output);
    let ckpt_dir = dir.join(CHECKPOINT_DIR);
    fs::create_dir_all(&ckpt_dir)?;
    fs::write(dir.join(CONFIG_SNAPSHOT), config.to_toml())?;

    let problem = config.problem()?;
    let settings = config.train_settings();
    let mut log = TrainingLog::create(&dir)?;
    let every = config.training.checkpoint_every;
    let initial = initial_policy(config)?;
    let mut outcome = train_with(&problem, &settings, initial, |record, params| {
        log.append(record)?;
        if every > 0 && record.iteration % every == 0 {
            save_checkpoint(&ckpt_dir.join(format!("iter-{:06}.ckpt", record.iteration)), params)?;
        }
        Ok(())
    })?;
    save_checkpoint(&ckpt_dir.join(FINAL_CHECKPOINT), &outcome.params)?;
    if let Some(abort) = outcome.abort.take() {
        log::error!("training aborted at iteration {}; partial artifacts in {}", abort.iteration, dir.display());
        return Err(abort.error);
    }

    let eval = evaluate(config, &outcome.params, config.evaluation.trials, &dir)?;
    Ok(RunSummary {
        dir,
        outcome,
        eval: Some(eval),
    })
}

/// Evaluates `params` and writes `eval.csv`, `eval_cost.csv` and the plots into `dir`.
pub fn evaluate(config: &ExperimentConfig, params: &PolicyParams, trials: usize, dir: &Path) -> Result<EvalSummary> {
    let problem = config.problem()?;
    let summary = evaluate_policy(params, &problem, trials, config.seed)?;
    fs::create_dir_all(dir)?;
    let grid = problem.simulator.grid().clone();
    artifacts::write_eval(dir, &grid, &summary)?;
    write_plots(config, &grid, &summary, dir)?;
    Ok(summary)
}

fn write_plots(config: &ExperimentConfig, grid: &crate::field::Grid, summary: &EvalSummary, dir: &Path) -> Result<()> {
    let a = grid.extent();
    let j = grid.points();
    if grid.dim() == 1 {
        let targets: Vec<plot::TargetMark> = config
            .cost
            .regions
            .iter()
            .map(|r| {
                let [lo, hi] = r.x.unwrap_or([grid.spacing(), a - grid.spacing()]);
                plot::TargetMark {
                    lo,
                    hi,
                    desired: r.desired,
                }
            })
            .collect();
        let title = format!("{}: terminal mean ± 2σ over {} trials", config.name, summary.trials);
        fs::write(
            dir.join(PROFILE_SVG),
            plot::profile_svg(&title, grid.coords(), &summary.controlled, &summary.uncontrolled, &targets),
        )?;
        let sample = &summary.sample;
        let rows = sample.states.len();
        let values: Vec<f64> = sample.states.iter().flat_map(|s| s.values().iter().copied()).collect();
        let t_end = (rows - 1) as f64 * sample.dt;
        fs::write(
            dir.join(SAMPLE_SVG),
            plot::heatmap_svg(
                &format!("{}: controlled sample rollout", config.name),
                &values,
                rows,
                j,
                (0.0, a),
                (0.0, t_end),
                "x",
                "t",
            ),
        )?;
    } else {
        fs::write(
            dir.join(PROFILE_SVG),
            plot::heatmap_svg(
                &format!("{}: controlled terminal mean over {} trials", config.name, summary.trials),
                &summary.controlled.mean,
                j,
                j,
                (0.0, a),
                (0.0, a),
                "x",
                "y",
            ),
        )?;
        fs::write(
            dir.join(SAMPLE_SVG),
            plot::heatmap_svg(
                &format!("{}: controlled sample, terminal field", config.name),
                summary.sample.terminal().values(),
                j,
                j,
                (0.0, a),
                (0.0, a),
                "x",
                "y",
            ),
        )?;
    }
    Ok(())
}
