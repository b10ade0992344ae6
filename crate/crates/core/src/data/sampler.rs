use rand::seq::SliceRandom;
use rand::Rng;

use super::dataset::Dataset;
use crate::error::{Error, Result};

/// Two-stage sampler: draw a label uniformly from all `L` labels, then a
/// sample uniformly among that label's members. Draws are with replacement.
#[derive(Debug, Clone)]
pub struct LabelSampler {
    by_label: Vec<Vec<usize>>,
}

impl LabelSampler {
    pub fn new(dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Data("cannot sample from an empty dataset".into()));
        }
        let by_label = dataset.indices_by_label();
        if let Some(empty) = by_label.iter().position(Vec::is_empty) {
            return Err(Error::Data(format!("label {empty} has no samples to draw")));
        }
        Ok(LabelSampler { by_label })
    }

    pub fn num_labels(&self) -> usize {
        self.by_label.len()
    }

    pub fn members(&self, label: usize) -> &[usize] {
        &self.by_label[label]
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Vec<usize> {
        (0..batch_size)
            .map(|_| {
                let members = &self.by_label[rng.random_range(0..self.by_label.len())];
                members[rng.random_range(0..members.len())]
            })
            .collect()
    }
}

/// One uniform-label-prior batch of `batch_size` indices.
pub fn sample_batch<R: Rng + ?Sized>(
    dataset: &Dataset,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if batch_size == 0 || batch_size > dataset.len() {
        return Err(Error::Config(format!(
            "batch size {batch_size} must lie in [1, {}]",
            dataset.len()
        )));
    }
    Ok(LabelSampler::new(dataset)?.sample(batch_size, rng))
}

/// A shuffled pass over `0..n` split into consecutive batches; the last
/// batch may be short.
pub fn shuffled_batches<R: Rng + ?Sized>(
    n: usize,
    batch_size: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    assert!(batch_size > 0, "batch size must be positive");
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}
