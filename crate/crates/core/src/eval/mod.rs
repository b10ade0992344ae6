//! Evaluation: accuracy, penultimate-layer features, linear probe, and
//! unsupervised cluster accuracy (k-means + Hungarian matching).

mod hungarian;
mod kmeans;
mod probe;

use std::path::Path;

use ndarray::{s, Array2, Axis};
use rayon::prelude::*;

use crate::data::{read_flat, write_flat, Dataset};
use crate::error::{Error, Result};
use crate::nncore::Model;

pub use hungarian::{cluster_accuracy, hungarian, Assignment};
pub use kmeans::{kmeans, KMeans};
pub use probe::{linear_probe, ProbeRecipe};

const EVAL_CHUNK: usize = 1024;

fn chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .step_by(EVAL_CHUNK)
        .map(|start| (start, (start + EVAL_CHUNK).min(n)))
        .collect()
}

/// Arg-max predictions for every row of `dataset`, evaluated in parallel chunks.
pub fn predict_dataset(model: &Model, dataset: &Dataset) -> Result<Vec<usize>> {
    let features = dataset.features();
    let parts = chunk_ranges(dataset.len())
        .into_par_iter()
        .map(|(a, b)| model.predict(&features.slice(s![a..b, ..]).to_owned()))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.concat())
}

/// Percentage of samples whose arg-max prediction equals the label.
pub fn accuracy(model: &Model, dataset: &Dataset) -> Result<f64> {
    if model.output_dim() != dataset.num_labels() {
        return Err(Error::Shape(format!(
            "model emits {} logits for {} labels",
            model.output_dim(),
            dataset.num_labels()
        )));
    }
    let predictions = predict_dataset(model, dataset)?;
    Ok(percent_matching(&predictions, dataset.labels()))
}

pub(crate) fn percent_matching(predictions: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, y)| p == y)
        .count();
    100.0 * correct as f64 / labels.len() as f64
}

/// Penultimate-layer activations with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_labels: usize,
}

impl FeatureMatrix {
    pub fn save_flat(&self, path: impl AsRef<Path>) -> Result<()> {
        write_flat(path, &self.features, &self.labels, self.num_labels)
    }

    pub fn load_flat(path: impl AsRef<Path>) -> Result<Self> {
        let (features, labels, num_labels) = read_flat(path)?;
        Ok(FeatureMatrix {
            features,
            labels,
            num_labels,
        })
    }
}

/// Activations after the penultimate layer's nonlinearity.
pub fn extract_features(model: &Model, dataset: &Dataset) -> Result<FeatureMatrix> {
    let depth = model.layers().len();
    if depth < 2 {
        return Err(Error::Shape(
            "feature extraction needs a model with a hidden layer".into(),
        ));
    }
    let features = dataset.features();
    let parts = chunk_ranges(dataset.len())
        .into_par_iter()
        .map(|(a, b)| model.forward_layers(&features.slice(s![a..b, ..]).to_owned(), depth - 1))
        .collect::<Result<Vec<_>>>()?;
    let width = model.layers()[depth - 2].fan_out();
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    let features = if views.is_empty() {
        Array2::zeros((0, width))
    } else {
        ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))?
    };
    Ok(FeatureMatrix {
        features,
        labels: dataset.labels().to_vec(),
        num_labels: dataset.num_labels(),
    })
}
