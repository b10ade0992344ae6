//! Shared epoch loop: target construction, optional augmentation, one SGD
//! step per batch, and per-batch tracing hooks.

use std::fmt;

use ndarray::{Array2, ArrayViewMut1};
use rand::Rng;

use crate::baselines::ls_weights;
use crate::compensation::{ac_weights, MisclassMask};
use crate::curriculum::TargetedBatch;
use crate::data::{crop_and_flip, Dataset, ImageShape};
use crate::error::{Error, Result};
use crate::nncore::{Model, OptimHyper, Sgd};

/// Padding used by the random-crop augmentation.
const CROP_PAD: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Il,
    Standard,
    Ac,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Il => "il",
            Phase::Standard => "standard",
            Phase::Ac => "ac",
        })
    }
}

/// How a class index becomes a target vector.
///
/// Unflagged samples get label smoothing when `smoothing` is set, else a
/// one-hot vector. Samples flagged by a misclassification mask get the
/// compensation target when `compensation` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetRule {
    pub num_labels: usize,
    pub smoothing: Option<f64>,
    pub compensation: Option<f64>,
}

impl TargetRule {
    pub fn one_hot(num_labels: usize) -> Self {
        TargetRule {
            num_labels,
            smoothing: None,
            compensation: None,
        }
    }

    /// Writes the target for `label` into `row`; returns whether the
    /// compensation target was used.
    pub fn fill(&self, mut row: ArrayViewMut1<'_, f64>, label: usize, flagged: bool) -> bool {
        let (on, off, smoothed) = match (flagged, self.compensation, self.smoothing) {
            (true, Some(eps), _) => {
                let (on, off) = ac_weights(self.num_labels, eps);
                (on, off, true)
            }
            (_, _, Some(alpha)) => {
                let (on, off) = ls_weights(self.num_labels, alpha);
                (on, off, false)
            }
            _ => (1.0, 0.0, false),
        };
        row.fill(off);
        row[label] = on;
        smoothed
    }
}

/// Batch size and target rule shared by every epoch of a phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainPlan {
    pub batch_size: usize,
    pub rule: TargetRule,
}

impl TrainPlan {
    pub fn batches_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }
}

/// What one optimisation step saw, for instrumentation.
#[derive(Debug)]
pub struct BatchTrace<'a> {
    pub phase: Phase,
    /// Indices drawn before any balancing or resizing.
    pub raw: &'a [usize],
    pub batch: &'a TargetedBatch,
    pub smoothed: usize,
}

pub type Tracer = Box<dyn FnMut(&BatchTrace<'_>) + Send>;

/// Aggregates over one epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpochStats {
    /// Sample-weighted mean of the batch losses.
    pub loss: f64,
    pub samples: usize,
    pub batches: usize,
    /// Batch entries that received the compensation target.
    pub smoothed: usize,
}

/// A model together with its optimiser state.
pub struct Learner {
    model: Model,
    sgd: Sgd,
    augment: Option<ImageShape>,
    tracer: Option<Tracer>,
}

impl fmt::Debug for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Learner")
            .field("model", &self.model)
            .field("augment", &self.augment)
            .field("traced", &self.tracer.is_some())
            .finish()
    }
}

impl Learner {
    pub fn new(model: Model, hyper: &OptimHyper) -> Self {
        Learner {
            sgd: Sgd::new(hyper),
            model,
            augment: None,
            tracer: None,
        }
    }

    /// Enables random crop + flip on batches of images with this geometry.
    pub fn with_augmentation(mut self, shape: Option<ImageShape>) -> Self {
        self.augment = shape;
        self
    }

    pub fn with_tracer(mut self, tracer: Tracer) -> Self {
        self.tracer = Some(tracer);
        self
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    /// One SGD step on explicit target rows. Returns the batch loss.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        dataset: &Dataset,
        indices: &[usize],
        targets: &Array2<f64>,
        lr: f64,
        rng: &mut R,
    ) -> Result<f64> {
        let mut inputs = dataset.gather(indices);
        if let Some(shape) = self.augment {
            crop_and_flip(&mut inputs, shape, CROP_PAD, rng);
        }
        let (loss, grads) = self.model.backward(&inputs, targets)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("loss became {loss}")));
        }
        self.sgd.step(&mut self.model, &grads, lr);
        Ok(loss)
    }

    /// Trains on `num_batches` batches produced by `next_batch`, which
    /// returns the raw draw and the batch actually trained on.
    #[allow(clippy::too_many_arguments)]
    pub fn run_epoch<R: Rng + ?Sized>(
        &mut self,
        dataset: &Dataset,
        phase: Phase,
        lr: f64,
        rule: &TargetRule,
        mask: Option<&MisclassMask>,
        num_batches: usize,
        rng: &mut R,
        mut next_batch: impl FnMut(&mut R) -> (Vec<usize>, TargetedBatch),
    ) -> Result<EpochStats> {
        let mut stats = EpochStats::default();
        let mut loss_sum = 0.0;
        for _ in 0..num_batches {
            let (raw, batch) = next_batch(rng);
            if batch.is_empty() {
                continue;
            }
            let mut targets = Array2::zeros((batch.len(), rule.num_labels));
            let mut smoothed = 0;
            for ((row, &index), &target) in targets
                .rows_mut()
                .into_iter()
                .zip(&batch.indices)
                .zip(&batch.targets)
            {
                let flagged = mask.is_some_and(|m| m.is_flagged(index));
                smoothed += usize::from(rule.fill(row, target, flagged));
            }
            if let Some(tracer) = self.tracer.as_mut() {
                tracer(&BatchTrace {
                    phase,
                    raw: &raw,
                    batch: &batch,
                    smoothed,
                });
            }
            let loss = self.step(dataset, &batch.indices, &targets, lr, rng)?;
            loss_sum += loss * batch.len() as f64;
            stats.samples += batch.len();
            stats.batches += 1;
            stats.smoothed += smoothed;
        }
        if stats.samples > 0 {
            stats.loss = loss_sum / stats.samples as f64;
        }
        Ok(stats)
    }

    /// A conventional epoch: a shuffled pass over the whole dataset.
    pub fn run_shuffled_epoch<R: Rng + ?Sized>(
        &mut self,
        dataset: &Dataset,
        phase: Phase,
        lr: f64,
        plan: &TrainPlan,
        mask: Option<&MisclassMask>,
        rng: &mut R,
    ) -> Result<EpochStats> {
        let batches = crate::data::shuffled_batches(dataset.len(), plan.batch_size, rng);
        let count = batches.len();
        let mut batches = batches.into_iter();
        let labels = dataset.labels();
        self.run_epoch(dataset, phase, lr, &plan.rule, mask, count, rng, |_| {
            let raw = batches.next().expect("one batch per iteration");
            let batch = TargetedBatch::ground_truth(raw.clone(), labels);
            (raw, batch)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;
    use ndarray::Array1;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rule_fill_variants() {
        let mut row = Array1::zeros(4);
        let plain = TargetRule::one_hot(4);
        assert!(!plain.fill(row.view_mut(), 2, true));
        assert_eq!(row.to_vec(), vec![0.0, 0.0, 1.0, 0.0]);

        let ls = TargetRule {
            smoothing: Some(0.2),
            ..plain
        };
        ls.fill(row.view_mut(), 0, false);
        assert!((row[0] - 0.85).abs() < 1e-15 && (row[1] - 0.05).abs() < 1e-15);

        let ac = TargetRule {
            compensation: Some(0.5),
            ..ls
        };
        assert!(ac.fill(row.view_mut(), 1, true));
        assert!((row[1] - 0.5).abs() < 1e-15);
        assert!((row[3] - 0.5 / 3.0).abs() < 1e-15);
        // unflagged samples keep the smoothing target under composition
        assert!(!ac.fill(row.view_mut(), 1, false));
        assert!((row[1] - 0.85).abs() < 1e-15);
    }

    #[test]
    fn shuffled_epoch_visits_every_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ds = Dataset::new(
            Array2::zeros((10, 2)),
            (0..10).map(|i| i % 2).collect(),
            2,
            Split::Train,
        )
        .unwrap();
        let model = Model::new(2, &[3], 2, &mut rng).unwrap();
        let seen = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
        let sink = seen.clone();
        let mut learner = Learner::new(model, &OptimHyper::default()).with_tracer(Box::new(
            move |t: &BatchTrace<'_>| sink.lock().unwrap().extend_from_slice(&t.batch.indices),
        ));
        let plan = TrainPlan {
            batch_size: 4,
            rule: TargetRule::one_hot(2),
        };
        let stats = learner
            .run_shuffled_epoch(&ds, Phase::Standard, 0.1, &plan, None, &mut rng)
            .unwrap();
        assert_eq!(stats.batches, 3);
        assert_eq!(stats.samples, 10);
        let mut all = seen.lock().unwrap().clone();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }
}
