use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use super::loss::soft_ce;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        if self == Activation::Relu {
            z.mapv_inplace(|v| v.max(0.0));
        }
    }
}

/// Fully connected layer computing `act(x · W + b)` with `W` stored as `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }

    fn affine(&self, inputs: &Array2<f64>) -> Array2<f64> {
        let mut z = inputs.dot(&self.weights);
        z += &self.bias;
        z
    }
}

/// Gradient of the loss with respect to one dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseGrad>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| DenseGrad {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }
}

/// Multilayer perceptron producing raw logits.
///
/// Hidden layers use ReLU; the final layer is linear. Parameters are plain
/// `f64` arrays so tests can set them directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    layers: Vec<Dense>,
}

impl Model {
    /// Builds an MLP `input_dim → hidden... → output_dim` with weights drawn
    /// uniformly from `±sqrt(6 / (fan_in + fan_out))` and zero biases.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden.contains(&0) {
            return Err(Error::Config(
                "layer widths must all be positive".to_string(),
            ));
        }
        let dims: Vec<usize> = std::iter::once(input_dim)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(output_dim))
            .collect();
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, pair)| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights =
                    Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit));
                let activation = if i + 2 == dims.len() {
                    Activation::None
                } else {
                    Activation::Relu
                };
                Dense {
                    weights,
                    bias: Array1::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        Ok(Model { layers })
    }

    /// Wraps explicit layers after checking that dimensions chain and the
    /// last layer emits raw logits.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let last = layers
            .last()
            .ok_or_else(|| Error::Config("model needs at least one layer".to_string()))?;
        if last.activation != Activation::None {
            return Err(Error::Config(
                "final layer must not apply an activation".to_string(),
            ));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.fan_out() {
                return Err(Error::Shape(format!(
                    "layer {i}: bias length {} != fan_out {}",
                    layer.bias.len(),
                    layer.fan_out()
                )));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::Shape(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].fan_out(),
                    i + 1,
                    pair[1].fan_in()
                )));
            }
        }
        Ok(Model { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    fn check_inputs(&self, inputs: &Array2<f64>) -> Result<()> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "model expects {} input features, got {}",
                self.input_dim(),
                inputs.ncols()
            )));
        }
        Ok(())
    }

    /// Raw logits for a `B × input_dim` batch.
    pub fn forward(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        self.forward_layers(inputs, self.layers.len())
    }

    /// Output of the first `depth` layers, including their activations.
    pub fn forward_layers(&self, inputs: &Array2<f64>, depth: usize) -> Result<Array2<f64>> {
        self.check_inputs(inputs)?;
        let mut layers = self.layers[..depth].iter();
        let Some(first) = layers.next() else {
            return Ok(inputs.clone());
        };
        let mut act = first.affine(inputs);
        first.activation.apply(&mut act);
        for layer in layers {
            act = layer.affine(&act);
            layer.activation.apply(&mut act);
        }
        Ok(act)
    }

    /// Arg-max class per row; ties resolve to the lowest index.
    pub fn predict(&self, inputs: &Array2<f64>) -> Result<Vec<usize>> {
        let logits = self.forward(inputs)?;
        Ok(logits.rows().into_iter().map(argmax).collect())
    }

    /// Mean soft-target cross-entropy over the batch and its gradient with
    /// respect to every weight and bias.
    pub fn backward(
        &self,
        inputs: &Array2<f64>,
        targets: &Array2<f64>,
    ) -> Result<(f64, Gradients)> {
        self.check_inputs(inputs)?;
        // acts[l] is the input to layer l
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut current = inputs.clone();
        for layer in &self.layers {
            let mut z = layer.affine(&current);
            layer.activation.apply(&mut z);
            acts.push(std::mem::replace(&mut current, z));
        }
        let (loss, mut delta) = soft_ce(&current, targets)?;

        let mut grads = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &acts[l];
            grads.push(DenseGrad {
                weights: input.t().dot(&delta),
                bias: delta.sum_axis(Axis(0)),
            });
            if l > 0 {
                let mut upstream = delta.dot(&layer.weights.t());
                // acts[l] is the post-ReLU output of layer l-1
                ndarray::Zip::from(&mut upstream)
                    .and(input)
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
                delta = upstream;
            }
        }
        grads.reverse();
        Ok((loss, Gradients { layers: grads }))
    }

    /// Immutable copy of the current parameters tagged with `epoch`.
    pub fn snapshot(&self, epoch: usize) -> ModelSnapshot {
        ModelSnapshot {
            model: Arc::new(self.clone()),
            epoch,
        }
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Frozen copy of a model's parameters at the end of some epoch.
#[derive(Debug, Clone)]
pub struct ModelSnapshot {
    model: Arc<Model>,
    epoch: usize,
}

impl ModelSnapshot {
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn forward(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        self.model.forward(inputs)
    }

    pub fn predict(&self, inputs: &Array2<f64>) -> Result<Vec<usize>> {
        self.model.predict(inputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_model(dims: &[usize]) -> Model {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, p)| Dense {
                weights: Array2::zeros((p[0], p[1])),
                bias: Array1::zeros(p[1]),
                activation: if i + 2 == dims.len() {
                    Activation::None
                } else {
                    Activation::Relu
                },
            })
            .collect();
        Model::from_layers(layers).unwrap()
    }

    #[test]
    fn zero_parameters_give_zero_logits() {
        let model = zero_model(&[3, 5, 4]);
        let x = array![[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]];
        let logits = model.forward(&x).unwrap();
        assert!(logits.iter().all(|&v| v == 0.0));
        assert_eq!(logits.dim(), (2, 4));
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let model = Model::from_layers(vec![Dense {
            weights: Array2::eye(3),
            bias: Array1::zeros(3),
            activation: Activation::None,
        }])
        .unwrap();
        let x = array![[1.5, -2.0, 0.25]];
        assert_eq!(model.forward(&x).unwrap(), x);
    }

    #[test]
    fn wrong_input_width_is_a_shape_error() {
        let model = zero_model(&[3, 2]);
        let err = model.forward(&Array2::zeros((1, 4))).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn layers_must_chain() {
        let layers = vec![
            Dense {
                weights: Array2::zeros((3, 4)),
                bias: Array1::zeros(4),
                activation: Activation::Relu,
            },
            Dense {
                weights: Array2::zeros((5, 2)),
                bias: Array1::zeros(2),
                activation: Activation::None,
            },
        ];
        assert!(matches!(Model::from_layers(layers), Err(Error::Shape(_))));
    }

    #[test]
    fn final_activation_must_be_none() {
        let layers = vec![Dense {
            weights: Array2::zeros((3, 4)),
            bias: Array1::zeros(4),
            activation: Activation::Relu,
        }];
        assert!(matches!(Model::from_layers(layers), Err(Error::Config(_))));
    }

    #[test]
    fn init_respects_glorot_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = Model::new(10, &[6], 4, &mut rng).unwrap();
        let l0 = (6.0f64 / 16.0).sqrt();
        assert!(model.layers()[0].weights.iter().all(|w| w.abs() <= l0));
        assert!(model.layers()[1].bias.iter().all(|&b| b == 0.0));
        assert_eq!(model.layers()[0].activation, Activation::Relu);
        assert_eq!(model.layers()[1].activation, Activation::None);
    }

    #[test]
    fn argmax_ties_pick_lowest_index() {
        assert_eq!(argmax(array![0.0, 0.0, 0.0].view()), 0);
        assert_eq!(argmax(array![1.0, 3.0, 3.0].view()), 1);
    }

    #[test]
    fn zero_input_bias_free_net_has_zero_weight_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = Model::new(4, &[5], 3, &mut rng).unwrap();
        let x = Array2::zeros((2, 4));
        let t = Array2::zeros((2, 3));
        let (_, grads) = model.backward(&x, &t).unwrap();
        assert!(grads.layers[0].weights.iter().all(|&g| g == 0.0));
        // first-layer outputs are relu(0) = 0, so the second layer sees zeros too
        assert!(grads.layers[1].weights.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn snapshot_is_unaffected_by_later_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model = Model::new(2, &[3], 2, &mut rng).unwrap();
        let snap = model.snapshot(0);
        let x = array![[0.3, -0.7]];
        let before = snap.forward(&x).unwrap();
        model.layers_mut()[0].weights.fill(1.0);
        assert_eq!(snap.forward(&x).unwrap(), before);
        assert_ne!(model.forward(&x).unwrap(), before);
    }
}
