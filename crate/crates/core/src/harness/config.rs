//! Flat `key = value` experiment configuration.
//!
//! Lines are UTF-8, `#` starts a comment, blank lines are ignored. Every key
//! can also be set from the command line with a flag of the same name.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::baselines::{VariantConfig, VariantKind};
use crate::curriculum::OrderPolicy;
use crate::data::{load_cifar10, load_cifar100, make_blobs, BlobsSpec, Dataset, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Blobs(BlobsSpec),
    Cifar10(PathBuf),
    Cifar100(PathBuf),
    /// Train and test files in the flat binary format.
    Flat {
        train: PathBuf,
        test: PathBuf,
    },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<(Dataset, Dataset)> {
        match self {
            DatasetSpec::Blobs(spec) => make_blobs(spec),
            DatasetSpec::Cifar10(dir) => load_cifar10(dir),
            DatasetSpec::Cifar100(dir) => load_cifar100(dir),
            DatasetSpec::Flat { train, test } => Ok((
                Dataset::load_flat(train, Split::Train)?,
                Dataset::load_flat(test, Split::Test)?,
            )),
        }
    }
}

/// A complete experiment: data, variant, training recipe and trial protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub variant: VariantKind,
    pub train: VariantConfig,
    pub trials: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::Blobs(BlobsSpec::default()),
            variant: VariantKind::Lilac,
            train: VariantConfig::default(),
            trials: 1,
            seed: 0,
            out_dir: PathBuf::from("runs"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid boolean `{value}` for `{key}`"
        ))),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    fn blobs_mut(&mut self) -> &mut BlobsSpec {
        if !matches!(self.dataset, DatasetSpec::Blobs(_)) {
            self.dataset = DatasetSpec::Blobs(BlobsSpec::default());
        }
        match &mut self.dataset {
            DatasetSpec::Blobs(spec) => spec,
            _ => unreachable!(),
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            // re-selecting the current kind keeps its settings
            "dataset" => match (value, &self.dataset) {
                ("blobs", DatasetSpec::Blobs(_))
                | ("cifar10", DatasetSpec::Cifar10(_))
                | ("cifar100", DatasetSpec::Cifar100(_))
                | ("flat", DatasetSpec::Flat { .. }) => {}
                ("blobs", _) => self.dataset = DatasetSpec::Blobs(BlobsSpec::default()),
                ("cifar10", _) => {
                    self.dataset = DatasetSpec::Cifar10(PathBuf::from("data/cifar-10-batches-bin"))
                }
                ("cifar100", _) => {
                    self.dataset = DatasetSpec::Cifar100(PathBuf::from("data/cifar-100-binary"))
                }
                ("flat", _) => {
                    self.dataset = DatasetSpec::Flat {
                        train: PathBuf::from("train.bin"),
                        test: PathBuf::from("test.bin"),
                    }
                }
                _ => return Err(Error::Config(format!("unknown dataset `{value}`"))),
            },
            "data_dir" => match &mut self.dataset {
                DatasetSpec::Cifar10(dir) | DatasetSpec::Cifar100(dir) => *dir = value.into(),
                _ => {
                    return Err(Error::Config(
                        "data_dir needs dataset = cifar10 or cifar100".into(),
                    ))
                }
            },
            "train_file" | "test_file" => match &mut self.dataset {
                DatasetSpec::Flat { train, test } => {
                    *(if key == "train_file" { train } else { test }) = value.into()
                }
                _ => return Err(Error::Config(format!("{key} needs dataset = flat"))),
            },
            "blobs_classes" => self.blobs_mut().classes = parse(key, value)?,
            "blobs_per_class" => self.blobs_mut().per_class = parse(key, value)?,
            "blobs_dim" => self.blobs_mut().dim = parse(key, value)?,
            "blobs_sep" => self.blobs_mut().sep = parse(key, value)?,
            "data_seed" => self.blobs_mut().seed = parse(key, value)?,
            "variant" => self.variant = value.parse()?,
            "hidden" => t.hidden = parse_list(key, value)?,
            "total_epochs" => t.total_epochs = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "lr" => t.hyper.base_lr = parse(key, value)?,
            "milestones" => t.hyper.milestones = parse_list(key, value)?,
            "gamma" => t.hyper.gamma = parse(key, value)?,
            "weight_decay" => t.hyper.weight_decay = parse(key, value)?,
            "momentum" => t.hyper.momentum = parse(key, value)?,
            "nesterov" => t.hyper.nesterov = parse_bool(key, value)?,
            "b" => t.schedule.initial = parse(key, value)?,
            "m" => t.schedule.step = parse(key, value)?,
            "E" => t.schedule.epochs_per_interval = parse(key, value)?,
            "interval_lr" => t.schedule.interval_lr = parse(key, value)?,
            "label_order" => {
                t.label_order = match value {
                    "ascending" => OrderPolicy::Ascending,
                    "random" => OrderPolicy::Random,
                    _ => return Err(Error::Config(format!("unknown label_order `{value}`"))),
                }
            }
            "epsilon" => t.ac.epsilon = parse(key, value)?,
            "T" => t.ac.threshold = parse(key, value)?,
            "ls_alpha" => t.ls_alpha = parse(key, value)?,
            "probe_every" => t.probe_every = parse(key, value)?,
            "augment" => t.augment = parse_bool(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out_dir = value.into(),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.variant.uses_compensation() && self.train.ac.threshold >= self.train.total_epochs {
            return Err(Error::Config(format!(
                "T = {} must be below total_epochs = {}",
                self.train.ac.threshold, self.train.total_epochs
            )));
        }
        self.train.hyper.validate()
    }
}
