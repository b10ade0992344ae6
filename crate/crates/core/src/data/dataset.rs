use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Channel-planar image geometry of each feature row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ImageShape {
    pub const CIFAR: ImageShape = ImageShape {
        channels: 3,
        height: 32,
        width: 32,
    };

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Feature rows with integer labels in `[0, num_labels)`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    num_labels: usize,
    split: Split,
    image_shape: Option<ImageShape>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        num_labels: usize,
        split: Split,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Data(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if num_labels == 0 {
            return Err(Error::Data("label count must be positive".into()));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_labels) {
            return Err(Error::Data(format!(
                "sample {i} has label {y} outside [0, {num_labels})"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("features must be finite".into()));
        }
        Ok(Dataset {
            features,
            labels,
            num_labels,
            split,
            image_shape: None,
        })
    }

    pub fn with_image_shape(mut self, shape: ImageShape) -> Result<Self> {
        if shape.len() != self.dim() {
            return Err(Error::Data(format!(
                "image shape {shape:?} does not cover {} features",
                self.dim()
            )));
        }
        self.image_shape = Some(shape);
        Ok(self)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn image_shape(&self) -> Option<ImageShape> {
        self.image_shape
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Copies the given rows into a new `indices.len() × dim` matrix.
    pub fn gather(&self, indices: &[usize]) -> Array2<f64> {
        self.features.select(Axis(0), indices)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_labels];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Sample indices grouped by label.
    pub fn indices_by_label(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_labels];
        for (i, &y) in self.labels.iter().enumerate() {
            groups[y].push(i);
        }
        groups
    }
}
