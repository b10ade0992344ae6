//! Reference implementations used as independent oracles. They share no
//! code paths with the library beyond reading parameters.
#![allow(dead_code)]

use lilac::nncore::{Activation, Model};
use ndarray::Array2;
use rand::Rng;

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Triple-loop forward pass over `Vec<Vec<f64>>` rows.
pub fn naive_forward(model: &Model, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    inputs
        .iter()
        .map(|x| {
            let mut act = x.clone();
            for layer in model.layers() {
                let mut next = vec![0.0; layer.fan_out()];
                for (j, out) in next.iter_mut().enumerate() {
                    let mut z = compensated_sum(
                        act.iter()
                            .enumerate()
                            .map(|(i, a)| a * layer.weights[[i, j]]),
                    );
                    z += layer.bias[j];
                    if layer.activation == Activation::Relu && z < 0.0 {
                        z = 0.0;
                    }
                    *out = z;
                }
                act = next;
            }
            act
        })
        .collect()
}

/// Pre-activations of every layer, for kink detection.
pub fn naive_preactivations(model: &Model, x: &[f64]) -> Vec<f64> {
    let mut act = x.to_vec();
    let mut all = Vec::new();
    for layer in model.layers() {
        let mut next = vec![0.0; layer.fan_out()];
        for (j, out) in next.iter_mut().enumerate() {
            let z: f64 = act
                .iter()
                .enumerate()
                .map(|(i, a)| a * layer.weights[[i, j]])
                .sum::<f64>()
                + layer.bias[j];
            all.push(z);
            *out = if layer.activation == Activation::Relu {
                z.max(0.0)
            } else {
                z
            };
        }
        act = next;
    }
    all
}

/// `log Σ exp(z)` as `max + ln(1 + Σ_{others} exp(z - max))` with compensated summation.
pub fn log_sum_exp(row: &[f64]) -> f64 {
    let (arg, &max) = row
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let rest = compensated_sum(
        row.iter()
            .enumerate()
            .filter(|&(i, _)| i != arg)
            .map(|(_, &z)| (z - max).exp()),
    );
    max + rest.ln_1p()
}

/// Mean soft-target cross-entropy from first principles.
pub fn reference_loss(logits: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let per_sample = logits.iter().zip(targets).map(|(z, t)| {
        let lse = log_sum_exp(z);
        compensated_sum(z.iter().zip(t).map(|(zc, tc)| -tc * (zc - lse)))
    });
    compensated_sum(per_sample) / logits.len() as f64
}

pub fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

/// Random probability rows.
pub fn random_targets<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let mut t = Array2::from_shape_fn((rows, cols), |_| rng.random_range(0.01..1.0));
    for mut row in t.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    t
}

/// Lowest-index arg-max.
pub fn first_argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Five-point finite-difference check of `Model::backward` against the
/// reference loss. Returns the worst relative error, skipping entries where
/// both gradients are below `1e-7`, where the difference quotient is
/// dominated by rounding.
pub fn max_gradient_error(model: &Model, x: &Array2<f64>, targets: &Array2<f64>) -> f64 {
    let h = 1e-4;
    let (_, grads) = model.backward(x, targets).unwrap();
    let xs = rows(x);
    let ts = rows(targets);
    let loss_of = |m: &Model| reference_loss(&naive_forward(m, &xs), &ts);
    let mut worst = 0.0f64;
    let mut probe = model.clone();
    for l in 0..model.layers().len() {
        let (fan_in, fan_out) = model.layers()[l].weights.dim();
        let mut entries: Vec<(Option<(usize, usize)>, usize)> = Vec::new();
        for i in 0..fan_in {
            for j in 0..fan_out {
                entries.push((Some((i, j)), 0));
            }
        }
        for j in 0..fan_out {
            entries.push((None, j));
        }
        for (w, j) in entries {
            let (orig, analytic) = match w {
                Some((i, jj)) => (
                    model.layers()[l].weights[[i, jj]],
                    grads.layers[l].weights[[i, jj]],
                ),
                None => (model.layers()[l].bias[j], grads.layers[l].bias[j]),
            };
            let mut at = |offset: f64| {
                match w {
                    Some((i, jj)) => probe.layers_mut()[l].weights[[i, jj]] = orig + offset,
                    None => probe.layers_mut()[l].bias[j] = orig + offset,
                }
                loss_of(&probe)
            };
            let numeric = (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
            at(0.0);
            let scale = analytic.abs().max(numeric.abs());
            if scale < 1e-7 {
                continue;
            }
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    }
    worst
}

/// Random MLP with 1-3 layers of width <= 32 plus a batch whose
/// pre-activations stay clear of the ReLU kink.
pub fn random_case<R: Rng>(rng: &mut R) -> (Model, Array2<f64>, Array2<f64>) {
    let depth = rng.random_range(1..=3);
    let input = rng.random_range(1..=32);
    let hidden: Vec<usize> = (1..depth).map(|_| rng.random_range(1..=32)).collect();
    let output = rng.random_range(2..=32);
    let mut model = Model::new(input, &hidden, output, rng).unwrap();
    for layer in model.layers_mut() {
        layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    let batch = rng.random_range(1..=4);
    loop {
        let x = random_matrix(batch, input, 1.0, rng);
        let clear = x.rows().into_iter().all(|r| {
            naive_preactivations(&model, &r.to_vec())
                .iter()
                .all(|z| z.abs() > 5e-3)
        });
        if clear {
            let t = random_targets(batch, output, rng);
            return (model, x, t);
        }
    }
}

/// Owned copy of one traced batch.
#[derive(Debug, Clone)]
pub struct Trace {
    pub phase: lilac::engine::Phase,
    pub raw: Vec<usize>,
    pub indices: Vec<usize>,
    pub targets: Vec<usize>,
    pub smoothed: usize,
}

pub type TraceLog = std::sync::Arc<std::sync::Mutex<Vec<Trace>>>;

/// A tracer that appends every batch to a shared log.
pub fn recording_tracer() -> (lilac::engine::Tracer, TraceLog) {
    let log = TraceLog::default();
    let sink = log.clone();
    let tracer: lilac::engine::Tracer = Box::new(move |t| {
        sink.lock().unwrap().push(Trace {
            phase: t.phase,
            raw: t.raw.to_vec(),
            indices: t.batch.indices.clone(),
            targets: t.batch.targets.clone(),
            smoothed: t.smoothed,
        });
    });
    (tracer, log)
}
