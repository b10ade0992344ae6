use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dataset::{Dataset, Split};
use crate::error::{Error, Result};

/// Parameters of the Gaussian-blobs toy dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobsSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub sep: f64,
    pub seed: u64,
}

impl Default for BlobsSpec {
    fn default() -> Self {
        BlobsSpec {
            classes: 8,
            per_class: 250,
            dim: 16,
            sep: 6.0,
            seed: 0,
        }
    }
}

/// Random unit directions; orthonormal whenever `k <= d`.
fn class_directions(k: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Array1<f64>> {
    let mut dirs: Vec<Array1<f64>> = Vec::with_capacity(k);
    while dirs.len() < k {
        let mut v: Array1<f64> = Array1::from_shape_fn(d, |_| StandardNormal.sample(rng));
        if dirs.len() < d {
            for u in &dirs {
                let proj = v.dot(u);
                v.scaled_add(-proj, u);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-8 {
            dirs.push(v / norm);
        }
    }
    dirs
}

/// Class `c` is centred at `sep · u_c` with unit-variance isotropic noise.
/// Each class is split 80/20 into train and test.
pub fn make_blobs(spec: &BlobsSpec) -> Result<(Dataset, Dataset)> {
    if spec.dim < 1 {
        return Err(Error::Config("blobs need at least one dimension".into()));
    }
    if spec.classes < 2 {
        return Err(Error::Config("blobs need at least two classes".into()));
    }
    if spec.sep.is_nan() || spec.sep <= 0.0 {
        return Err(Error::Config("blob separation must be positive".into()));
    }
    let test_per_class = spec.per_class / 5;
    let train_per_class = spec.per_class - test_per_class;
    if train_per_class == 0 {
        return Err(Error::Config(
            "blobs need at least one training sample per class".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = class_directions(spec.classes, spec.dim, &mut rng);

    let mut build = |count: usize, split: Split| -> Result<Dataset> {
        let n = count * spec.classes;
        let mut features = Array2::zeros((n, spec.dim));
        let mut labels = Vec::with_capacity(n);
        for (c, center) in centers.iter().enumerate() {
            for j in 0..count {
                let mut row = features.row_mut(c * count + j);
                for (x, &u) in row.iter_mut().zip(center) {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    *x = spec.sep * u + noise;
                }
                labels.push(c);
            }
        }
        Dataset::new(features, labels, spec.classes, split)
    };
    let train = build(train_per_class, Split::Train)?;
    let test = build(test_per_class, Split::Test)?;
    Ok((train, test))
}
