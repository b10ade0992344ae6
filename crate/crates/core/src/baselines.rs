//! Training variants: batch learning, label smoothing, the DBS and RA
//! ablations, IL-only, AC-only, full LILAC and LILAC on top of label
//! smoothing. [`run_variant`] composes the phases for each.

use std::fmt;
use std::str::FromStr;

use ndarray::Array1;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compensation::{ac_epoch, AcConfig};
use crate::curriculum::{
    resample_to, run_il, Balancer, LabelOrder, OrderPolicy, Partition, Schedule, TargetedBatch,
};
use crate::data::{Dataset, LabelSampler};
use crate::engine::{EpochStats, Learner, Phase, TargetRule, Tracer, TrainPlan};
use crate::error::{Error, Result};
use crate::eval::{accuracy, cluster_accuracy, extract_features, kmeans, linear_probe};
use crate::harness::report::{EpochRecord, TrialReport};
use crate::nncore::{Model, ModelSnapshot, OptimHyper, TargetVector};

/// RNG stream carrying model init and every training draw.
const TRAIN_STREAM: u64 = 0;
/// RNG stream of the batch-size dry run used by DBS.
const DRY_RUN_STREAM: u64 = 1;
/// Evaluation streams start here, offset by the epoch.
const EVAL_STREAM: u64 = 1 << 32;
const KMEANS_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariantKind {
    Batch,
    LabelSmoothing,
    Dbs,
    Ra,
    OnlyIl,
    OnlyAc,
    Lilac,
    LsLilac,
}

impl VariantKind {
    pub const ALL: [VariantKind; 8] = [
        VariantKind::Batch,
        VariantKind::LabelSmoothing,
        VariantKind::Dbs,
        VariantKind::Ra,
        VariantKind::OnlyIl,
        VariantKind::OnlyAc,
        VariantKind::Lilac,
        VariantKind::LsLilac,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariantKind::Batch => "batch",
            VariantKind::LabelSmoothing => "label_smoothing",
            VariantKind::Dbs => "dbs",
            VariantKind::Ra => "ra",
            VariantKind::OnlyIl => "only_il",
            VariantKind::OnlyAc => "only_ac",
            VariantKind::Lilac => "lilac",
            VariantKind::LsLilac => "ls_lilac",
        }
    }

    /// Whether the run opens with an incremental-label window.
    pub fn has_il_window(self) -> bool {
        matches!(
            self,
            VariantKind::Dbs
                | VariantKind::Ra
                | VariantKind::OnlyIl
                | VariantKind::Lilac
                | VariantKind::LsLilac
        )
    }

    pub fn uses_compensation(self) -> bool {
        matches!(
            self,
            VariantKind::OnlyAc | VariantKind::Lilac | VariantKind::LsLilac
        )
    }

    pub fn uses_label_smoothing(self) -> bool {
        matches!(self, VariantKind::LabelSmoothing | VariantKind::LsLilac)
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VariantKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

/// `(ground-truth entry, every other entry)` of the label-smoothing target.
pub fn ls_weights(num_labels: usize, alpha: f64) -> (f64, f64) {
    let off = alpha / num_labels as f64;
    (1.0 - alpha + off, off)
}

/// `(1 - α)·δ_y + α/L`.
pub fn ls_target(label: usize, num_labels: usize, alpha: f64) -> Result<TargetVector> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Config(format!(
            "alpha must lie in [0, 1), got {alpha}"
        )));
    }
    if label >= num_labels {
        return Err(Error::Config(format!(
            "label {label} outside [0, {num_labels})"
        )));
    }
    let (on, off) = ls_weights(num_labels, alpha);
    let mut probs = Array1::from_elem(num_labels, off);
    probs[label] = on;
    Ok(TargetVector::from_raw(probs))
}

/// Balanced-batch sizes observed in a dry pass over the IL schedule, one
/// list per interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbsSizes {
    pub per_interval: Vec<Vec<usize>>,
}

impl DbsSizes {
    /// Replays the IL sampling and balancing without training.
    pub fn record<R: Rng + ?Sized>(
        dataset: &Dataset,
        schedule: &Schedule,
        order: LabelOrder,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let num_labels = dataset.num_labels();
        let sampler = LabelSampler::new(dataset)?;
        let mut partition = Partition::new(num_labels, schedule, order)?;
        let batches = dataset.len().div_ceil(batch_size) * schedule.epochs_per_interval;
        let mut per_interval = Vec::new();
        for interval in 0..schedule.intervals(num_labels) {
            if interval > 0 {
                partition = partition.reveal(schedule.step);
            }
            let balancer = Balancer::new(dataset, &partition);
            per_interval.push(
                (0..batches)
                    .map(|_| {
                        balancer
                            .balance(&sampler.sample(batch_size, rng), rng)
                            .len()
                    })
                    .collect(),
            );
        }
        Ok(DbsSizes { per_interval })
    }
}

/// Resizes a raw batch to a size drawn from `sizes`: uniform duplicates when
/// growing, a uniform subset when shrinking.
pub fn dbs_batch<R: Rng + ?Sized>(raw: &[usize], sizes: &[usize], rng: &mut R) -> Vec<usize> {
    assert!(!raw.is_empty(), "dbs needs a non-empty raw batch");
    let target = *sizes.choose(rng).unwrap_or(&raw.len());
    resample_to(raw, target, rng)
}

/// Like [`Balancer`], but the pseudo-labelled half comes from a single hidden
/// class chosen uniformly among those present in the raw batch.
pub struct RaBalancer<'a> {
    labels: &'a [usize],
    by_label: Vec<Vec<usize>>,
    partition: &'a Partition,
}

impl<'a> RaBalancer<'a> {
    pub fn new(dataset: &'a Dataset, partition: &'a Partition) -> Self {
        RaBalancer {
            labels: dataset.labels(),
            by_label: dataset.indices_by_label(),
            partition,
        }
    }

    pub fn balance<R: Rng + ?Sized>(&self, raw: &[usize], rng: &mut R) -> TargetedBatch {
        let rho = self.partition.rho();
        if !self.partition.has_hidden() {
            return TargetedBatch::ground_truth(raw.to_vec(), self.labels);
        }
        let (seen, unseen): (Vec<usize>, Vec<usize>) = raw
            .iter()
            .partition(|&&i| self.partition.is_revealed(self.labels[i]));
        if seen.is_empty() {
            return TargetedBatch {
                targets: vec![rho; unseen.len()],
                indices: unseen,
            };
        }
        let mut present: Vec<usize> = unseen.iter().map(|&i| self.labels[i]).collect();
        present.sort_unstable();
        present.dedup();
        let n = seen.len();
        let negatives = match present.choose(rng) {
            Some(&class) => {
                let pool: Vec<usize> = unseen
                    .iter()
                    .copied()
                    .filter(|&i| self.labels[i] == class)
                    .collect();
                resample_to(&pool, n, rng)
            }
            None => {
                let candidates: Vec<usize> = self
                    .partition
                    .hidden_labels()
                    .iter()
                    .copied()
                    .filter(|&c| !self.by_label[c].is_empty())
                    .collect();
                match candidates.choose(rng) {
                    Some(&class) => {
                        let members = &self.by_label[class];
                        (0..n)
                            .map(|_| members[rng.random_range(0..members.len())])
                            .collect()
                    }
                    None => Vec::new(),
                }
            }
        };
        let mut batch = TargetedBatch::ground_truth(seen, self.labels);
        for i in negatives {
            batch.push(i, rho);
        }
        batch
    }
}

/// One-off form of [`RaBalancer::balance`].
pub fn ra_balance<R: Rng + ?Sized>(
    raw: &[usize],
    dataset: &Dataset,
    partition: &Partition,
    rng: &mut R,
) -> TargetedBatch {
    RaBalancer::new(dataset, partition).balance(raw, rng)
}

/// Everything a single trial needs besides the data and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantConfig {
    pub hidden: Vec<usize>,
    /// Epochs after the incremental-label window.
    pub total_epochs: usize,
    pub batch_size: usize,
    pub hyper: OptimHyper,
    pub schedule: Schedule,
    pub label_order: OrderPolicy,
    pub ac: AcConfig,
    pub ls_alpha: f64,
    /// Probe and cluster metrics every this many epochs; 0 disables them.
    pub probe_every: usize,
    pub augment: bool,
}

impl Default for VariantConfig {
    fn default() -> Self {
        VariantConfig {
            hidden: vec![64],
            total_epochs: 40,
            batch_size: 32,
            hyper: OptimHyper {
                base_lr: 0.05,
                milestones: vec![15, 30],
                ..OptimHyper::default()
            },
            schedule: Schedule {
                initial: 4,
                step: 2,
                epochs_per_interval: 3,
                interval_lr: 0.05,
            },
            label_order: OrderPolicy::Ascending,
            ac: AcConfig {
                epsilon: 0.5,
                threshold: 20,
            },
            ls_alpha: 0.1,
            probe_every: 0,
            augment: false,
        }
    }
}

impl VariantConfig {
    pub fn validate(&self, kind: VariantKind, train: &Dataset, test: &Dataset) -> Result<()> {
        let num_labels = train.num_labels();
        if test.num_labels() != num_labels || test.dim() != train.dim() {
            return Err(Error::Config(
                "train and test sets disagree on shape".into(),
            ));
        }
        if self.total_epochs == 0 {
            return Err(Error::Config("total_epochs must be at least 1".into()));
        }
        if self.batch_size == 0 || self.batch_size > train.len() {
            return Err(Error::Config(format!(
                "batch_size {} must lie in [1, {}]",
                self.batch_size,
                train.len()
            )));
        }
        self.hyper.validate()?;
        if kind.has_il_window() {
            self.schedule.validate(num_labels)?;
        }
        if kind.uses_compensation() {
            self.ac.validate(num_labels)?;
            if self.ac.threshold >= self.total_epochs {
                return Err(Error::Config(format!(
                    "T = {} must be below total_epochs = {}",
                    self.ac.threshold, self.total_epochs
                )));
            }
        }
        if kind.uses_label_smoothing() && !(0.0..1.0).contains(&self.ls_alpha) {
            return Err(Error::Config(format!(
                "ls_alpha must lie in [0, 1), got {}",
                self.ls_alpha
            )));
        }
        if self.probe_every > 0 && self.hidden.is_empty() {
            return Err(Error::Config(
                "probing needs at least one hidden layer".into(),
            ));
        }
        if self.augment && train.image_shape().is_none() {
            return Err(Error::Config("augmentation needs image data".into()));
        }
        Ok(())
    }

    /// Epochs spent in the incremental-label window for `kind`; zero when
    /// the schedule starts with every label revealed.
    pub fn il_window_epochs(&self, kind: VariantKind, num_labels: usize) -> usize {
        if kind.has_il_window() && self.schedule.initial < num_labels {
            self.schedule.il_epochs(num_labels)
        } else {
            0
        }
    }
}

fn eval_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(EVAL_STREAM + epoch as u64);
    rng
}

/// Appends one metric row per epoch.
struct Recorder<'a> {
    train: &'a Dataset,
    test: &'a Dataset,
    seed: u64,
    probe_every: usize,
    track_ac: bool,
    rows: Vec<EpochRecord>,
}

impl Recorder<'_> {
    fn record(
        &mut self,
        model: &Model,
        phase: Phase,
        revealed: usize,
        lr: f64,
        stats: &EpochStats,
        ac_modified: usize,
    ) -> Result<()> {
        let epoch = self.rows.len();
        let (probe_acc, cluster_acc) =
            if self.probe_every > 0 && (epoch + 1).is_multiple_of(self.probe_every) {
                let (p, c) = self.probe(model, epoch)?;
                (Some(p), Some(c))
            } else {
                (None, None)
            };
        self.rows.push(EpochRecord {
            epoch,
            phase,
            revealed_labels: revealed,
            lr,
            train_loss: stats.loss,
            train_acc: accuracy(model, self.train)?,
            test_acc: accuracy(model, self.test)?,
            ac_modified_count: self.track_ac.then_some(ac_modified),
            probe_acc,
            cluster_acc,
        });
        Ok(())
    }

    fn probe(&self, model: &Model, epoch: usize) -> Result<(f64, f64)> {
        let mut rng = eval_rng(self.seed, epoch);
        let train = extract_features(model, self.train)?;
        let test = extract_features(model, self.test)?;
        let probe = linear_probe(&train, &test, rng.random())?;
        let k = self.test.num_labels();
        let clusters = kmeans(&test.features, k, rng.random(), KMEANS_ITERS)?;
        let cluster = cluster_accuracy(&clusters.assignments, &test.labels, k)?;
        Ok((probe, cluster))
    }
}

/// Runs one trial of `kind` and returns its per-epoch metrics.
pub fn run_variant(
    kind: VariantKind,
    train: &Dataset,
    test: &Dataset,
    cfg: &VariantConfig,
    seed: u64,
) -> Result<TrialReport> {
    run_variant_traced(kind, train, test, cfg, seed, None)
}

/// [`run_variant`] with a per-batch tracing hook.
pub fn run_variant_traced(
    kind: VariantKind,
    train: &Dataset,
    test: &Dataset,
    cfg: &VariantConfig,
    seed: u64,
    tracer: Option<Tracer>,
) -> Result<TrialReport> {
    cfg.validate(kind, train, test)?;
    let num_labels = train.num_labels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TRAIN_STREAM);

    let model = Model::new(train.dim(), &cfg.hidden, num_labels, &mut rng)?;
    let mut learner = Learner::new(model, &cfg.hyper).with_augmentation(if cfg.augment {
        train.image_shape()
    } else {
        None
    });
    if let Some(tracer) = tracer {
        learner = learner.with_tracer(tracer);
    }
    let plan = TrainPlan {
        batch_size: cfg.batch_size,
        rule: TargetRule {
            num_labels,
            smoothing: kind.uses_label_smoothing().then_some(cfg.ls_alpha),
            compensation: None,
        },
    };
    let order = cfg.label_order.resolve(seed);
    let mut recorder = Recorder {
        train,
        test,
        seed,
        probe_every: cfg.probe_every,
        track_ac: kind.uses_compensation(),
        rows: Vec::new(),
    };

    let il_epochs = cfg.il_window_epochs(kind, num_labels);
    if il_epochs > 0 {
        let schedule = &cfg.schedule;
        let interval_lr = schedule.interval_lr;
        match kind {
            VariantKind::OnlyIl | VariantKind::Lilac | VariantKind::LsLilac => {
                run_il(
                    &mut learner,
                    train,
                    schedule,
                    order,
                    &plan,
                    &mut rng,
                    |l, p, stats| {
                        recorder.record(
                            l.model(),
                            Phase::Il,
                            p.revealed_count(),
                            interval_lr,
                            &stats,
                            0,
                        )
                    },
                )?;
            }
            VariantKind::Ra => {
                run_windowed(
                    &mut learner,
                    train,
                    cfg,
                    order,
                    &plan,
                    &mut rng,
                    &mut recorder,
                    Window::Ra,
                )?;
            }
            VariantKind::Dbs => {
                let mut dry = ChaCha8Rng::seed_from_u64(seed);
                dry.set_stream(DRY_RUN_STREAM);
                let sizes = DbsSizes::record(train, schedule, order, cfg.batch_size, &mut dry)?;
                run_windowed(
                    &mut learner,
                    train,
                    cfg,
                    order,
                    &plan,
                    &mut rng,
                    &mut recorder,
                    Window::Dbs(&sizes),
                )?;
            }
            _ => unreachable!("variant without an IL window"),
        }
    }
    debug_assert_eq!(recorder.rows.len(), il_epochs);

    let mut snapshot: Option<ModelSnapshot> = None;
    for epoch in 0..cfg.total_epochs {
        let lr = cfg.hyper.lr_at_epoch(epoch);
        if kind.uses_compensation() && cfg.ac.active(epoch) {
            let previous = snapshot
                .take()
                .unwrap_or_else(|| learner.model().snapshot(epoch.saturating_sub(1)));
            let out = ac_epoch(
                &mut learner,
                &previous,
                train,
                &cfg.ac,
                &plan,
                lr,
                epoch,
                &mut rng,
            )?;
            recorder.record(
                learner.model(),
                Phase::Ac,
                num_labels,
                lr,
                &out.stats,
                out.mask.count(),
            )?;
            snapshot = Some(out.snapshot);
        } else {
            let stats =
                learner.run_shuffled_epoch(train, Phase::Standard, lr, &plan, None, &mut rng)?;
            recorder.record(learner.model(), Phase::Standard, num_labels, lr, &stats, 0)?;
        }
    }

    Ok(TrialReport {
        variant: kind,
        seed,
        il_epochs,
        rows: recorder.rows,
    })
}

enum Window<'a> {
    Ra,
    Dbs(&'a DbsSizes),
}

/// IL-equivalent window for the RA and DBS ablations: same interval
/// structure and learning rate, different batch construction.
#[allow(clippy::too_many_arguments)]
fn run_windowed(
    learner: &mut Learner,
    train: &Dataset,
    cfg: &VariantConfig,
    order: LabelOrder,
    plan: &TrainPlan,
    rng: &mut ChaCha8Rng,
    recorder: &mut Recorder<'_>,
    mode: Window<'_>,
) -> Result<()> {
    let num_labels = train.num_labels();
    let schedule = &cfg.schedule;
    let sampler = LabelSampler::new(train)?;
    let batches = plan.batches_per_epoch(train.len());
    let mut partition = Partition::new(num_labels, schedule, order)?;
    for interval in 0..schedule.intervals(num_labels) {
        if interval > 0 {
            partition = partition.reveal(schedule.step);
        }
        let ra = RaBalancer::new(train, &partition);
        let revealed = match mode {
            Window::Ra => partition.revealed_count(),
            Window::Dbs(_) => num_labels,
        };
        for _ in 0..schedule.epochs_per_interval {
            let stats = learner.run_epoch(
                train,
                Phase::Il,
                schedule.interval_lr,
                &plan.rule,
                None,
                batches,
                rng,
                |rng| {
                    let raw = sampler.sample(plan.batch_size, rng);
                    let batch = match &mode {
                        Window::Ra => ra.balance(&raw, rng),
                        Window::Dbs(sizes) => TargetedBatch::ground_truth(
                            dbs_batch(&raw, &sizes.per_interval[interval], rng),
                            train.labels(),
                        ),
                    };
                    (raw, batch)
                },
            )?;
            recorder.record(
                learner.model(),
                Phase::Il,
                revealed,
                schedule.interval_lr,
                &stats,
                0,
            )?;
        }
    }
    Ok(())
}
