use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use spde_rl::experiment::{
    classify, evaluate, load_config, output_root, preset, run_experiment, FailureKind, OUTPUT_ROOT_VAR, PRESET_NAMES,
};
use spde_rl::policy::load_checkpoint;

/// Train and evaluate feedback policies for controlled stochastic PDEs.
#[derive(Parser)]
#[command(version, about, after_help = format!("Outputs go under ${OUTPUT_ROOT_VAR} (default ./runs)."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy, then evaluate it and write plots.
    Run { config: PathBuf },
    /// Evaluate a saved checkpoint against a config.
    Eval {
        checkpoint: PathBuf,
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// List or print the built-in experiment presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Check a config file without running it.
    Validate { config: PathBuf },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Dump { name: String },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<spde_rl::Error>().map(classify) {
        Some(FailureKind::Config) => 2,
        Some(FailureKind::Numerical) => 3,
        _ => 1,
    }
}

fn run(config: &Path) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let root = output_root();
    log::info!("running {} into {}", cfg.name, root.join(&cfg.output).display());
    let summary = run_experiment(&cfg, &root)?;
    let records = &summary.outcome.report.records;
    if let (Some(first), Some(last)) = (records.first(), records.last()) {
        println!(
            "{}: {} iterations, mean state cost {:.4e} -> {:.4e}",
            cfg.name,
            records.len(),
            first.mean_state_cost,
            last.mean_state_cost
        );
    }
    if let Some(eval) = &summary.eval {
        println!(
            "eval over {} trials: controlled cost {:.4e} ± {:.2e}, uncontrolled {:.4e} ± {:.2e}",
            eval.trials, eval.controlled_cost.0, eval.controlled_cost.1, eval.uncontrolled_cost.0, eval.uncontrolled_cost.1
        );
    }
    println!("artifacts in {}", summary.dir.display());
    Ok(())
}

fn eval(checkpoint: &Path, config: &Path, trials: usize) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let params =
        load_checkpoint(checkpoint).with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let dir = output_root().join(&cfg.output).join("eval");
    let summary = evaluate(&cfg, &params, trials, &dir)?;
    println!(
        "{}: {} trials ({} diverged), controlled cost {:.4e} ± {:.2e}, uncontrolled {:.4e} ± {:.2e}",
        cfg.name,
        summary.trials,
        summary.diverged,
        summary.controlled_cost.0,
        summary.controlled_cost.1,
        summary.uncontrolled_cost.0,
        summary.uncontrolled_cost.1
    );
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn presets(action: PresetAction) -> anyhow::Result<()> {
    match action {
        PresetAction::List => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
        }
        PresetAction::Dump { name } => {
            let cfg = preset(&name).ok_or_else(|| {
                spde_rl::Error::Config(format!("unknown preset {name:?} (available: {})", PRESET_NAMES.join(", ")))
            })?;
            print!("{}", cfg.to_toml());
        }
    }
    Ok(())
}

fn validate(config: &Path) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    println!(
        "{}: ok ({} steps, {} iterations x {} rollouts)",
        config.display(),
        cfg.steps().unwrap_or(0),
        cfg.training.iterations,
        cfg.training.rollouts
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => run(&config),
        Command::Eval { checkpoint, config, trials } => eval(&checkpoint, &config, trials),
        Command::Presets { action } => presets(action),
        Command::Validate { config } => validate(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
