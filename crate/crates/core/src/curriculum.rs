//! Incremental label introduction: the label partition, the reveal
//! schedule, pseudo-label assignment and balanced mini-batches.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, LabelSampler};
use crate::engine::{EpochStats, Learner, Phase, TrainPlan};
use crate::error::{Error, Result};
use crate::nncore::Model;

/// Order in which labels are revealed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelOrder {
    Ascending,
    Random(u64),
}

impl LabelOrder {
    pub fn ordering(&self, num_labels: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..num_labels).collect();
        if let LabelOrder::Random(seed) = *self {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        order
    }
}

/// Configured reveal order; a random order is seeded per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderPolicy {
    Ascending,
    Random,
}

impl OrderPolicy {
    pub fn resolve(self, seed: u64) -> LabelOrder {
        match self {
            OrderPolicy::Ascending => LabelOrder::Ascending,
            OrderPolicy::Random => LabelOrder::Random(seed),
        }
    }
}

/// Reveal schedule: `initial` labels up front, `step` more after every
/// `epochs_per_interval` epochs trained at `interval_lr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub initial: usize,
    pub step: usize,
    pub epochs_per_interval: usize,
    pub interval_lr: f64,
}

impl Schedule {
    pub fn validate(&self, num_labels: usize) -> Result<()> {
        if self.initial < 1 || self.initial > num_labels {
            return Err(Error::Config(format!(
                "b = {} must lie in [1, {num_labels}]",
                self.initial
            )));
        }
        if self.step < 1 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.epochs_per_interval < 1 {
            return Err(Error::Config("E must be at least 1".into()));
        }
        if !(self.interval_lr > 0.0 && self.interval_lr.is_finite()) {
            return Err(Error::Config("interval_lr must be > 0".into()));
        }
        Ok(())
    }

    /// `ceil((L - b) / m) + 1`: one interval per reveal plus a final interval
    /// with every label known.
    pub fn intervals(&self, num_labels: usize) -> usize {
        (num_labels - self.initial).div_ceil(self.step) + 1
    }

    pub fn il_epochs(&self, num_labels: usize) -> usize {
        self.intervals(num_labels) * self.epochs_per_interval
    }
}

/// Split of the label set into revealed and hidden labels, plus the
/// pseudo-label used as the target for every hidden sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    order: Vec<usize>,
    revealed_count: usize,
    revealed: Vec<bool>,
    rho: usize,
}

impl Partition {
    /// Reveals the first `b` labels of `order`. The pseudo-label is the last
    /// label of the ordering, `L - 1` for ascending order.
    pub fn new(num_labels: usize, schedule: &Schedule, order: LabelOrder) -> Result<Self> {
        if schedule.initial > num_labels {
            return Err(Error::Config(format!(
                "b = {} exceeds the label count {num_labels}",
                schedule.initial
            )));
        }
        Self::from_order(order.ordering(num_labels), schedule.initial)
    }

    pub fn from_order(order: Vec<usize>, initial: usize) -> Result<Self> {
        let num_labels = order.len();
        let mut seen = vec![false; num_labels];
        for &label in &order {
            if label >= num_labels || std::mem::replace(&mut seen[label], true) {
                return Err(Error::Config("label order must be a permutation".into()));
            }
        }
        if initial > num_labels || num_labels == 0 {
            return Err(Error::Config("invalid initial reveal count".into()));
        }
        let rho = *order.last().expect("non-empty order");
        let mut revealed = vec![false; num_labels];
        for &label in &order[..initial] {
            revealed[label] = true;
        }
        Ok(Partition {
            order,
            revealed_count: initial,
            revealed,
            rho,
        })
    }

    pub fn num_labels(&self) -> usize {
        self.order.len()
    }

    pub fn revealed_labels(&self) -> &[usize] {
        &self.order[..self.revealed_count]
    }

    pub fn hidden_labels(&self) -> &[usize] {
        &self.order[self.revealed_count..]
    }

    pub fn revealed_count(&self) -> usize {
        self.revealed_count
    }

    pub fn is_revealed(&self, label: usize) -> bool {
        self.revealed[label]
    }

    pub fn has_hidden(&self) -> bool {
        self.revealed_count < self.order.len()
    }

    pub fn rho(&self) -> usize {
        self.rho
    }

    /// Moves the next `min(m, |hidden|)` labels into the revealed set.
    pub fn reveal(&self, m: usize) -> Partition {
        let mut next = self.clone();
        let end = (self.revealed_count + m).min(self.order.len());
        for &label in &self.order[self.revealed_count..end] {
            next.revealed[label] = true;
        }
        next.revealed_count = end;
        next
    }

    /// The ground-truth label when revealed, otherwise the pseudo-label.
    pub fn effective_label(&self, label: usize) -> usize {
        if self.revealed[label] {
            label
        } else {
            self.rho
        }
    }
}

/// A training batch: sample indices and the class index each one is trained
/// towards.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TargetedBatch {
    pub indices: Vec<usize>,
    pub targets: Vec<usize>,
}

impl TargetedBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn push(&mut self, index: usize, target: usize) {
        self.indices.push(index);
        self.targets.push(target);
    }

    /// Every index trained towards its ground-truth label.
    pub fn ground_truth(indices: Vec<usize>, labels: &[usize]) -> Self {
        let targets = indices.iter().map(|&i| labels[i]).collect();
        TargetedBatch { indices, targets }
    }
}

/// Draws exactly `count` entries from `pool`: a uniform subset when the pool
/// is larger, otherwise the whole pool plus uniform duplicates.
pub(crate) fn resample_to<R: Rng + ?Sized>(
    pool: &[usize],
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    debug_assert!(!pool.is_empty() || count == 0);
    if pool.len() >= count {
        let mut picked = index::sample(rng, pool.len(), count).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| pool[i]).collect()
    } else {
        let mut out = pool.to_vec();
        out.extend((pool.len()..count).map(|_| pool[rng.random_range(0..pool.len())]));
        out
    }
}

/// Balances a raw uniform-prior batch so that hidden-label samples (trained
/// towards the pseudo-label) match the revealed-label samples one for one.
pub struct Balancer<'a> {
    labels: &'a [usize],
    partition: &'a Partition,
    hidden_pool: Vec<usize>,
}

impl<'a> Balancer<'a> {
    pub fn new(dataset: &'a Dataset, partition: &'a Partition) -> Self {
        let labels = dataset.labels();
        let hidden_pool = (0..labels.len())
            .filter(|&i| !partition.is_revealed(labels[i]))
            .collect();
        Balancer {
            labels,
            partition,
            hidden_pool,
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
        let n = seen.len();
        let negatives = if unseen.is_empty() {
            (0..n)
                .map(|_| self.hidden_pool[rng.random_range(0..self.hidden_pool.len())])
                .collect()
        } else {
            resample_to(&unseen, n, rng)
        };
        let mut batch = TargetedBatch::ground_truth(seen, self.labels);
        for i in negatives {
            batch.push(i, rho);
        }
        batch
    }
}

/// One-off form of [`Balancer::balance`].
pub fn balance_batch<R: Rng + ?Sized>(
    raw: &[usize],
    dataset: &Dataset,
    partition: &Partition,
    rng: &mut R,
) -> TargetedBatch {
    Balancer::new(dataset, partition).balance(raw, rng)
}

/// Runs the whole incremental-label phase: `E` epochs per interval at
/// `interval_lr`, revealing `m` labels after each interval, finishing with
/// one interval over the full label set. Returns the epochs consumed.
///
/// `on_epoch` receives the partition in force and the epoch statistics.
pub fn run_il<R: Rng + ?Sized>(
    learner: &mut Learner,
    dataset: &Dataset,
    schedule: &Schedule,
    order: LabelOrder,
    plan: &TrainPlan,
    rng: &mut R,
    mut on_epoch: impl FnMut(&Learner, &Partition, EpochStats) -> Result<()>,
) -> Result<usize> {
    let num_labels = dataset.num_labels();
    schedule.validate(num_labels)?;
    if learner.model().output_dim() != num_labels {
        return Err(Error::Shape(format!(
            "model emits {} logits for {num_labels} labels",
            learner.model().output_dim()
        )));
    }
    let sampler = LabelSampler::new(dataset)?;
    let mut partition = Partition::new(num_labels, schedule, order)?;
    let batches = plan.batches_per_epoch(dataset.len());
    let mut epochs = 0;
    for interval in 0..schedule.intervals(num_labels) {
        if interval > 0 {
            partition = partition.reveal(schedule.step);
        }
        let balancer = Balancer::new(dataset, &partition);
        for _ in 0..schedule.epochs_per_interval {
            let stats = learner.run_epoch(
                dataset,
                Phase::Il,
                schedule.interval_lr,
                &plan.rule,
                None,
                batches,
                rng,
                |rng| {
                    let raw = sampler.sample(plan.batch_size, rng);
                    let batch = balancer.balance(&raw, rng);
                    (raw, batch)
                },
            )?;
            epochs += 1;
            on_epoch(learner, &partition, stats)?;
        }
    }
    debug_assert!(!partition.has_hidden());
    Ok(epochs)
}

/// Convenience wrapper returning the trained model and the epochs consumed.
pub fn train_il<R: Rng + ?Sized>(
    learner: &mut Learner,
    dataset: &Dataset,
    schedule: &Schedule,
    order: LabelOrder,
    plan: &TrainPlan,
    rng: &mut R,
) -> Result<(Model, usize)> {
    let epochs = run_il(learner, dataset, schedule, order, plan, rng, |_, _, _| {
        Ok(())
    })?;
    Ok((learner.model().clone(), epochs))
}
