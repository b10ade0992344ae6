use ndarray::Zip;

use super::model::{Gradients, Model};
use crate::error::{Error, Result};

/// SGD hyper-parameters plus the milestone learning-rate schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimHyper {
    pub base_lr: f64,
    pub milestones: Vec<usize>,
    pub gamma: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub nesterov: bool,
}

impl Default for OptimHyper {
    /// CIFAR-10 batch-learning recipe.
    fn default() -> Self {
        OptimHyper {
            base_lr: 0.1,
            milestones: vec![90, 180, 260],
            gamma: 0.2,
            weight_decay: 0.0005,
            momentum: 0.9,
            nesterov: true,
        }
    }
}

impl OptimHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::Config(format!(
                "lr must be > 0, got {}",
                self.base_lr
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("weight_decay must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "milestones must be strictly ascending".into(),
            ));
        }
        Ok(())
    }

    /// `base_lr · gamma^k` where `k` counts milestones `<= epoch`.
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        let passed = self.milestones.iter().filter(|&&m| m <= epoch).count() as i32;
        // dividing by 1/gamma keeps decimal configs exact, e.g. 0.1 -> 0.02 -> 0.004
        self.base_lr / (1.0 / self.gamma).powi(passed)
    }
}

/// Momentum SGD with coupled weight decay. Velocity buffers persist across steps.
#[derive(Debug, Clone)]
pub struct Sgd {
    momentum: f64,
    weight_decay: f64,
    nesterov: bool,
    velocity: Option<Gradients>,
}

impl Sgd {
    pub fn new(hyper: &OptimHyper) -> Self {
        Sgd {
            momentum: hyper.momentum,
            weight_decay: hyper.weight_decay,
            nesterov: hyper.nesterov,
            velocity: None,
        }
    }

    pub fn velocity(&self) -> Option<&Gradients> {
        self.velocity.as_ref()
    }

    /// `g' = g + wd·w; v = μ·v + g'`, then `w -= lr·(g' + μ·v)` (Nesterov)
    /// or `w -= lr·v`.
    pub fn step(&mut self, model: &mut Model, grads: &Gradients, lr: f64) {
        assert!(lr > 0.0, "learning rate must be positive");
        let velocity = self
            .velocity
            .get_or_insert_with(|| Gradients::zeros_like(model));
        let (mu, wd, nesterov) = (self.momentum, self.weight_decay, self.nesterov);
        let update = |w: &mut f64, &g: &f64, v: &mut f64| {
            let g = g + wd * *w;
            *v = mu * *v + g;
            *w -= if nesterov {
                lr * (g + mu * *v)
            } else {
                lr * *v
            };
        };
        for ((layer, grad), vel) in model
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut velocity.layers)
        {
            Zip::from(&mut layer.weights)
                .and(&grad.weights)
                .and(&mut vel.weights)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(&grad.bias)
                .and(&mut vel.bias)
                .for_each(update);
        }
    }
}
