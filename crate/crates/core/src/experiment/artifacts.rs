//! CSV files written by a run.
//!
//! Floats are written with 17 significant digits so that files parse back to
//! the identical `f64`. Wall-clock times live in `timing.csv` so that
//! `training.csv` is reproducible byte for byte.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::train::{IterationRecord, TrainReport};

use super::eval::EvalSummary;

pub const TRAINING_CSV: &str = "training.csv";
pub const TIMING_CSV: &str = "timing.csv";
pub const EVAL_CSV: &str = "eval.csv";
pub const EVAL_COST_CSV: &str = "eval_cost.csv";

const TRAINING_HEADER: [&str; 6] = ["iteration", "loss", "mean_state_cost", "ess", "grad_norm", "diverged"];
const TIMING_HEADER: [&str; 2] = ["iteration", "wall_time_s"];

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_float(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {what} value {s:?}")))
}

fn parse_count(s: &str, what: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {what} value {s:?}")))
}

/// Appends one row per iteration to `training.csv` and `timing.csv`.
pub struct TrainingLog {
    training: csv::Writer<File>,
    timing: csv::Writer<File>,
}

impl TrainingLog {
    pub fn create(dir: &Path) -> Result<Self> {
        let mut training = csv::Writer::from_path(dir.join(TRAINING_CSV))?;
        let mut timing = csv::Writer::from_path(dir.join(TIMING_CSV))?;
        training.write_record(TRAINING_HEADER)?;
        timing.write_record(TIMING_HEADER)?;
        training.flush()?;
        timing.flush()?;
        Ok(Self { training, timing })
    }

    pub fn append(&mut self, r: &IterationRecord) -> Result<()> {
        self.training.write_record([
            r.iteration.to_string(),
            format_float(r.loss),
            format_float(r.mean_state_cost),
            format_float(r.ess),
            format_float(r.grad_norm),
            r.diverged.to_string(),
        ])?;
        self.timing
            .write_record([r.iteration.to_string(), format_float(r.wall_time)])?;
        self.training.flush()?;
        self.timing.flush()?;
        Ok(())
    }
}

pub fn write_training_report(dir: &Path, report: &TrainReport) -> Result<()> {
    let mut log = TrainingLog::create(dir)?;
    for r in &report.records {
        log.append(r)?;
    }
    Ok(())
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let found: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::Config(format!("{}: unexpected header {found:?}", path.display())));
    }
    reader.records().map(|r| r.map_err(Error::from)).collect()
}

/// Reads `training.csv` and `timing.csv` back into a report.
pub fn read_training_report(dir: &Path) -> Result<TrainReport> {
    let rows = read_rows(&dir.join(TRAINING_CSV), &TRAINING_HEADER)?;
    let times = read_rows(&dir.join(TIMING_CSV), &TIMING_HEADER)?;
    if rows.len() != times.len() {
        return Err(Error::Config(format!(
            "{} has {} rows but {} has {}",
            TRAINING_CSV,
            rows.len(),
            TIMING_CSV,
            times.len()
        )));
    }
    let records = rows
        .iter()
        .zip(&times)
        .map(|(r, t)| {
            let iteration = parse_count(&r[0], "iteration")?;
            if parse_count(&t[0], "iteration")? != iteration {
                return Err(Error::Config(format!("timing row for iteration {} is out of order", &t[0])));
            }
            Ok(IterationRecord {
                iteration,
                loss: parse_float(&r[1], "loss")?,
                mean_state_cost: parse_float(&r[2], "mean_state_cost")?,
                ess: parse_float(&r[3], "ess")?,
                grad_norm: parse_float(&r[4], "grad_norm")?,
                diverged: parse_count(&r[5], "diverged")?,
                wall_time: parse_float(&t[1], "wall_time_s")?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TrainReport { records })
}

/// Per-node terminal statistics: position columns then mean/std pairs.
pub fn write_eval(dir: &Path, grid: &Grid, summary: &EvalSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join(EVAL_CSV))?;
    let mut header = vec!["x"];
    if grid.dim() == 2 {
        header.push("y");
    }
    header.extend(["controlled_mean", "controlled_std", "uncontrolled_mean", "uncontrolled_std"]);
    w.write_record(&header)?;
    for (j, p) in grid.positions().enumerate() {
        let mut row = vec![format_float(p[0])];
        if grid.dim() == 2 {
            row.push(format_float(p[1]));
        }
        row.extend(
            [
                summary.controlled.mean[j],
                summary.controlled.std[j],
                summary.uncontrolled.mean[j],
                summary.uncontrolled.std[j],
            ]
            .map(format_float),
        );
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut c = csv::Writer::from_path(dir.join(EVAL_COST_CSV))?;
    c.write_record(["system", "trials", "diverged", "state_cost_mean", "state_cost_std"])?;
    for (name, (m, s)) in [("controlled", summary.controlled_cost), ("uncontrolled", summary.uncontrolled_cost)] {
        c.write_record([
            name.to_string(),
            summary.trials.to_string(),
            summary.diverged.to_string(),
            format_float(m),
            format_float(s),
        ])?;
    }
    c.flush()?;
    Ok(())
}
