//! Adaptive compensation: samples the previous epoch's model got wrong are
//! trained towards a smoothed target instead of a one-hot vector.

use ndarray::Array1;
use rand::Rng;

use crate::data::Dataset;
use crate::engine::{EpochStats, Learner, Phase, TrainPlan};
use crate::error::{Error, Result};
use crate::eval::predict_dataset;
use crate::nncore::{ModelSnapshot, TargetVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcConfig {
    pub epsilon: f64,
    /// First post-IL epoch at which compensation is applied.
    pub threshold: usize,
}

impl AcConfig {
    pub fn validate(&self, num_labels: usize) -> Result<()> {
        if !(self.epsilon <= 1.0 && self.epsilon * num_labels as f64 > 1.0) {
            return Err(Error::Config(format!(
                "epsilon must lie in (1/L, 1] = (1/{num_labels}, 1], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn active(&self, epoch: usize) -> bool {
        epoch >= self.threshold
    }
}

/// `(ground-truth entry, every other entry)` of the compensation target.
pub fn ac_weights(num_labels: usize, epsilon: f64) -> (f64, f64) {
    let l = num_labels as f64;
    let off = (1.0 - epsilon) / (l - 1.0);
    let on = (epsilon * l - 1.0) / (l - 1.0) + off;
    (on, off)
}

/// `((εL - 1)/(L - 1))·δ_y + ((1 - ε)/(L - 1))·1`: mass `ε` on `y`, the rest
/// spread evenly over the other labels.
pub fn ac_target(label: usize, num_labels: usize, epsilon: f64) -> Result<TargetVector> {
    if num_labels < 2 {
        return Err(Error::Config(
            "compensation needs at least two labels".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Config(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    if label >= num_labels {
        return Err(Error::Config(format!(
            "label {label} outside [0, {num_labels})"
        )));
    }
    let (on, off) = ac_weights(num_labels, epsilon);
    let mut probs = Array1::from_elem(num_labels, off);
    probs[label] = on;
    Ok(TargetVector::from_raw(probs))
}

/// Per-sample flag: misclassified by the snapshot taken at `epoch`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MisclassMask {
    flags: Vec<bool>,
    epoch: usize,
}

impl MisclassMask {
    pub fn from_flags(flags: Vec<bool>, epoch: usize) -> Self {
        MisclassMask { flags, epoch }
    }

    pub fn is_flagged(&self, index: usize) -> bool {
        self.flags[index]
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }
}

pub fn mark_misclassified(snapshot: &ModelSnapshot, dataset: &Dataset) -> Result<MisclassMask> {
    if snapshot.model().output_dim() != dataset.num_labels() {
        return Err(Error::Shape(format!(
            "snapshot emits {} logits for {} labels",
            snapshot.model().output_dim(),
            dataset.num_labels()
        )));
    }
    let predictions = predict_dataset(snapshot.model(), dataset)?;
    let flags = predictions
        .iter()
        .zip(dataset.labels())
        .map(|(p, y)| p != y)
        .collect();
    Ok(MisclassMask::from_flags(flags, snapshot.epoch()))
}

/// Output of one compensation epoch.
#[derive(Debug, Clone)]
pub struct AcEpoch {
    pub stats: EpochStats,
    pub mask: MisclassMask,
    /// Parameters after this epoch, used to build the next epoch's mask.
    pub snapshot: ModelSnapshot,
}

/// One shuffled epoch in which samples misclassified by `snapshot` are
/// trained towards the compensation target. The mask is computed once,
/// before any update.
#[allow(clippy::too_many_arguments)]
pub fn ac_epoch<R: Rng + ?Sized>(
    learner: &mut Learner,
    snapshot: &ModelSnapshot,
    dataset: &Dataset,
    cfg: &AcConfig,
    plan: &TrainPlan,
    lr: f64,
    epoch: usize,
    rng: &mut R,
) -> Result<AcEpoch> {
    if !cfg.active(epoch) {
        return Err(Error::Config(format!(
            "epoch {epoch} precedes the compensation threshold {}",
            cfg.threshold
        )));
    }
    let mask = mark_misclassified(snapshot, dataset)?;
    let rule = crate::engine::TargetRule {
        compensation: Some(cfg.epsilon),
        ..plan.rule
    };
    let plan = TrainPlan { rule, ..*plan };
    let stats = learner.run_shuffled_epoch(dataset, Phase::Ac, lr, &plan, Some(&mask), rng)?;
    Ok(AcEpoch {
        stats,
        mask,
        snapshot: learner.model().snapshot(epoch),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;
    use crate::nncore::{Activation, Dense, Model};
    use ndarray::{array, Array2};

    #[test]
    fn epsilon_one_is_one_hot() {
        for l in [2, 5, 10] {
            let t = ac_target(1, l, 1.0).unwrap();
            assert_eq!(t, TargetVector::one_hot(1, l));
        }
    }

    #[test]
    fn half_epsilon_on_ten_labels() {
        let t = ac_target(3, 10, 0.5).unwrap();
        assert!((t.probs()[3] - 0.5).abs() < 1e-15);
        for (i, &p) in t.probs().iter().enumerate() {
            if i != 3 {
                assert!((p - 0.5 / 9.0).abs() < 1e-15);
                assert!((p - 0.055556).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn epsilon_one_over_l_is_uniform() {
        let t = ac_target(0, 4, 0.25).unwrap();
        assert!(t.probs().iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn rejects_single_label_and_bad_epsilon() {
        assert!(ac_target(0, 1, 0.5).is_err());
        assert!(ac_target(0, 4, 0.0).is_err());
        assert!(ac_target(0, 4, 1.5).is_err());
        assert!(AcConfig {
            epsilon: 0.1,
            threshold: 0
        }
        .validate(10)
        .is_err());
        assert!(AcConfig {
            epsilon: 0.2,
            threshold: 0
        }
        .validate(10)
        .is_ok());
    }

    fn constant_model(bias: Array1<f64>) -> Model {
        let l = bias.len();
        Model::from_layers(vec![Dense {
            weights: Array2::zeros((1, l)),
            bias,
            activation: Activation::None,
        }])
        .unwrap()
    }

    #[test]
    fn zero_logits_flag_everything_but_label_zero() {
        let ds = Dataset::new(Array2::zeros((5, 1)), vec![0, 1, 2, 0, 2], 3, Split::Train).unwrap();
        let snap = constant_model(Array1::zeros(3)).snapshot(4);
        let mask = mark_misclassified(&snap, &ds).unwrap();
        assert_eq!(mask.flags(), &[false, true, true, false, true]);
        assert_eq!(mask.count(), 3);
        assert_eq!(mask.epoch(), 4);
    }

    #[test]
    fn perfect_snapshot_flags_nothing() {
        let ds = Dataset::new(array![[1.0], [-1.0]], vec![0, 1], 2, Split::Train).unwrap();
        let model = Model::from_layers(vec![Dense {
            weights: array![[1.0, -1.0]],
            bias: Array1::zeros(2),
            activation: Activation::None,
        }])
        .unwrap();
        assert_eq!(
            mark_misclassified(&model.snapshot(0), &ds).unwrap().count(),
            0
        );
    }
}
