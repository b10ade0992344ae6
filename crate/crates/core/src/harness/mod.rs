//! Experiment orchestration: configuration, multi-trial runs, sweeps, and
//! CSV output.

pub mod config;
pub mod report;

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::baselines::run_variant;
use crate::data::Dataset;
use crate::error::{Error, Result};

pub use config::{DatasetSpec, ExperimentConfig};
pub use report::{aggregate, AggregateReport, EpochRecord, TrialReport, METRICS_HEADER};

/// Parameters a sweep may vary.
pub const SWEEP_PARAMS: [&str; 4] = ["epsilon", "m", "E", "label_order"];

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs `trials` trials on already-loaded data with seeds `seed, seed+1, ...`.
/// Trials execute in parallel; results keep seed order.
pub fn run_trials(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<AggregateReport> {
    cfg.validate()?;
    cfg.train.validate(cfg.variant, train, test)?;
    let reports = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| run_variant(cfg.variant, train, test, &cfg.train, cfg.seed + i))
        .collect::<Result<Vec<_>>>()?;
    AggregateReport::from_trials(reports)
}

/// Loads the data, runs every trial, and writes `trial_<i>.csv`,
/// `trials.csv` and `summary.csv` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateReport> {
    cfg.validate()?;
    let (train, test) = cfg.dataset.load()?;
    let report = run_trials(cfg, &train, &test)?;
    write_outputs(&cfg.out_dir, &report)?;
    Ok(report)
}

pub fn write_outputs(dir: &Path, report: &AggregateReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, trial) in report.trials.iter().enumerate() {
        write(&dir.join(format!("trial_{i}.csv")), &trial.to_csv())?;
    }
    write(&dir.join("trials.csv"), &report.trials_csv())?;
    write(&dir.join("summary.csv"), &report.summary_csv())
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub report: AggregateReport,
}

/// Runs one experiment per value of `param` and writes
/// `sweep_<param>.csv` plus per-value trial files under `<out>/<param>=<value>/`.
pub fn sweep(cfg: &ExperimentConfig, param: &str, values: &[String]) -> Result<Vec<SweepRow>> {
    if !SWEEP_PARAMS.contains(&param) {
        return Err(Error::Config(format!(
            "cannot sweep `{param}`; choose one of {}",
            SWEEP_PARAMS.join(", ")
        )));
    }
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|value| {
            let mut c = cfg.clone();
            c.set(param, value)?;
            c.out_dir = cfg.out_dir.join(format!("{param}={value}"));
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let (train, test) = cfg.dataset.load()?;
    for c in &configs {
        c.train.validate(c.variant, &train, &test)?;
    }

    let mut rows = Vec::with_capacity(configs.len());
    let mut table = String::from("param,value,variant,trials,mean_test_acc,std_test_acc\n");
    for (value, c) in values.iter().zip(&configs) {
        let report = run_trials(c, &train, &test)?;
        write_outputs(&c.out_dir, &report)?;
        table.push_str(&format!(
            "{param},{value},{},{},{},{}\n",
            report.variant,
            report.trials.len(),
            report.mean,
            report.std
        ));
        rows.push(SweepRow {
            value: value.clone(),
            report,
        });
    }
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    write(&cfg.out_dir.join(format!("sweep_{param}.csv")), &table)?;
    Ok(rows)
}
