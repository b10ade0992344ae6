use std::fmt::Write as _;

use crate::baselines::VariantKind;
use crate::engine::Phase;
use crate::error::{Error, Result};

/// Column order of the per-epoch metrics CSV.
pub const METRICS_HEADER: &str = "epoch,phase,revealed_labels,lr,train_loss,train_acc,test_acc,ac_modified_count,probe_acc,cluster_acc";

/// Metrics for one epoch. Optional columns are written as empty strings
/// when not measured.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub revealed_labels: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub ac_modified_count: Option<usize>,
    pub probe_acc: Option<f64>,
    pub cluster_acc: Option<f64>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl EpochRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.phase,
            self.revealed_labels,
            self.lr,
            self.train_loss,
            self.train_acc,
            self.test_acc,
            opt(self.ac_modified_count),
            opt(self.probe_acc),
            opt(self.cluster_acc),
        )
    }
}

/// Per-epoch history of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub variant: VariantKind,
    pub seed: u64,
    pub il_epochs: usize,
    pub rows: Vec<EpochRecord>,
}

impl TrialReport {
    pub fn final_test_acc(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.test_acc)
    }

    pub fn epochs_in(&self, phase: Phase) -> usize {
        self.rows.iter().filter(|r| r.phase == phase).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(METRICS_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.csv_row());
        }
        out
    }
}

/// Mean and sample standard deviation (divisor `n - 1`; 0 for a single value).
pub fn aggregate(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Config("cannot aggregate zero reports".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// Final test accuracy across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub variant: VariantKind,
    pub trials: Vec<TrialReport>,
    pub mean: f64,
    pub std: f64,
}

impl AggregateReport {
    pub fn from_trials(trials: Vec<TrialReport>) -> Result<Self> {
        let finals: Vec<f64> = trials.iter().map(TrialReport::final_test_acc).collect();
        let (mean, std) = aggregate(&finals)?;
        Ok(AggregateReport {
            variant: trials[0].variant,
            trials,
            mean,
            std,
        })
    }

    /// True when the deviation is the single-trial convention rather than
    /// an estimate.
    pub fn std_is_placeholder(&self) -> bool {
        self.trials.len() == 1
    }

    pub fn trials_csv(&self) -> String {
        let mut out = String::from("variant,trial,seed,final_test_acc\n");
        for (i, t) in self.trials.iter().enumerate() {
            let _ = writeln!(out, "{},{i},{},{}", t.variant, t.seed, t.final_test_acc());
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "variant,trials,mean_test_acc,std_test_acc,std_kind\n{},{},{},{},{}\n",
            self.variant,
            self.trials.len(),
            self.mean,
            self.std,
            if self.std_is_placeholder() {
                "single_trial"
            } else {
                "sample"
            }
        )
    }
}
