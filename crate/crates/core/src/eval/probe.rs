use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::nncore::argmax;

/// Training recipe for the linear probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRecipe {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
}

impl Default for ProbeRecipe {
    fn default() -> Self {
        ProbeRecipe {
            epochs: 50,
            lr: 0.01,
            weight_decay: 1e-4,
        }
    }
}

/// Fits a linear multiclass hinge-loss classifier (Crammer-Singer margin)
/// on standardised training features with per-sample SGD, and returns its
/// test accuracy in percent.
pub fn linear_probe(train: &FeatureMatrix, test: &FeatureMatrix, seed: u64) -> Result<f64> {
    linear_probe_with(train, test, seed, &ProbeRecipe::default())
}

pub fn linear_probe_with(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    seed: u64,
    recipe: &ProbeRecipe,
) -> Result<f64> {
    let dim = train.features.ncols();
    if test.features.ncols() != dim {
        return Err(Error::Shape(format!(
            "train features have {dim} columns, test features {}",
            test.features.ncols()
        )));
    }
    if train.features.nrows() != train.labels.len() || test.features.nrows() != test.labels.len() {
        return Err(Error::Shape(
            "feature rows and labels differ in count".into(),
        ));
    }
    let num_classes = train.num_labels.max(test.num_labels);
    let first = train.labels.first().copied();
    if first.is_none() || train.labels.iter().all(|&y| Some(y) == first) {
        return Err(Error::Config(
            "linear probe needs at least two classes in training".into(),
        ));
    }

    let mean = train.features.mean_axis(Axis(0)).expect("non-empty");
    let std = train
        .features
        .std_axis(Axis(0), 0.0)
        .mapv(|s| if s > 1e-12 { s } else { 1.0 });
    let standardise = |x: &Array2<f64>| (x - &mean) / &std;
    let x_train = standardise(&train.features);
    let x_test = standardise(&test.features);

    let mut weights = Array2::<f64>::zeros((num_classes, dim));
    let mut bias = Array1::<f64>::zeros(num_classes);
    let mut order: Vec<usize> = (0..x_train.nrows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decay = 1.0 - recipe.lr * recipe.weight_decay;
    for _ in 0..recipe.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let x = x_train.row(i);
            let y = train.labels[i];
            let scores = weights.dot(&x) + &bias;
            let (rival, rival_score) = scores.iter().enumerate().filter(|&(c, _)| c != y).fold(
                (usize::MAX, f64::NEG_INFINITY),
                |best, (c, &s)| {
                    if s > best.1 {
                        (c, s)
                    } else {
                        best
                    }
                },
            );
            weights *= decay;
            if 1.0 + rival_score - scores[y] > 0.0 {
                weights.row_mut(y).scaled_add(recipe.lr, &x);
                weights.row_mut(rival).scaled_add(-recipe.lr, &x);
                bias[y] += recipe.lr;
                bias[rival] -= recipe.lr;
            }
        }
    }

    let scores = x_test.dot(&weights.t()) + &bias;
    let predictions: Vec<usize> = scores.rows().into_iter().map(argmax).collect();
    Ok(super::percent_matching(&predictions, &test.labels))
}
