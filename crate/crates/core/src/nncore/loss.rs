use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

/// A probability distribution over the `L` output classes used as the
/// optimisation target for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetVector(Array1<f64>);

impl TargetVector {
    /// Validates non-negativity and unit mass (within 1e-9).
    pub fn new(probs: Array1<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Config("target vector must be non-empty".into()));
        }
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::Numeric(
                "target vector entries must be finite and non-negative".into(),
            ));
        }
        let sum = probs.sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Numeric(format!(
                "target vector sums to {sum}, not 1"
            )));
        }
        Ok(TargetVector(probs))
    }

    pub fn one_hot(label: usize, num_labels: usize) -> Self {
        assert!(
            label < num_labels,
            "label {label} out of range {num_labels}"
        );
        let mut probs = Array1::zeros(num_labels);
        probs[label] = 1.0;
        TargetVector(probs)
    }

    /// Caller guarantees the distribution invariants.
    pub(crate) fn from_raw(probs: Array1<f64>) -> Self {
        TargetVector(probs)
    }

    pub fn probs(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability, lowest index on ties.
    pub fn argmax(&self) -> usize {
        super::model::argmax(self.0.view())
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    /// Stacks targets into a `B × L` matrix, one row per sample.
    pub fn stack(targets: &[TargetVector]) -> Result<Array2<f64>> {
        let width = targets
            .first()
            .map(TargetVector::len)
            .ok_or_else(|| Error::Config("empty target batch".into()))?;
        let mut out = Array2::zeros((targets.len(), width));
        for (mut row, t) in out.rows_mut().into_iter().zip(targets) {
            if t.len() != width {
                return Err(Error::Shape(format!(
                    "target widths differ: {} vs {width}",
                    t.len()
                )));
            }
            row.assign(&t.0);
        }
        Ok(out)
    }
}

/// Row-wise numerically stable log-softmax.
pub fn log_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Mean soft-target cross-entropy and its gradient with respect to the logits.
///
/// `loss = -(1/B) Σ_i Σ_c t_ic log softmax(z_i)_c`, `grad = (softmax(z) - t) / B`.
pub fn soft_ce(logits: &Array2<f64>, targets: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if logits.dim() != targets.dim() {
        return Err(Error::Shape(format!(
            "logits {:?} vs targets {:?}",
            logits.dim(),
            targets.dim()
        )));
    }
    let batch = logits.nrows();
    if batch == 0 {
        return Err(Error::Shape("soft_ce needs at least one sample".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    let log_probs = log_softmax(logits);
    let scale = 1.0 / batch as f64;
    let loss = -(&log_probs * targets).sum() * scale;
    let mut grad = log_probs.mapv(f64::exp);
    grad -= targets;
    grad *= scale;
    debug_assert_eq!(grad.len_of(Axis(0)), batch);
    Ok((loss, grad))
}
