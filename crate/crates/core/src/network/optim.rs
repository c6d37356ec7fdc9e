use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Result};
use crate::network::mlp::{Gradients, MlpModel};

/// RMSProp hyperparameters, defaulting to alpha 0.95, eps 1e-6, momentum 0.9,
/// and 1e-3 for both the l2 (weight decay) and l1 penalties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub alpha: f64,
    pub eps: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub l1_penalty: f64,
}

impl RmsPropConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            alpha: 0.95,
            eps: 1e-6,
            momentum: 0.9,
            weight_decay: 1e-3,
            l1_penalty: 1e-3,
        }
    }
}

/// Non-centered RMSProp with momentum on the normalized gradient.
///
/// Buffers are kept per tensor in layer order: weights of layer 0, bias of
/// layer 0, weights of layer 1, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: RmsPropConfig,
    square_avg: Vec<Vec<f64>>,
    momentum_buf: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(model: &MlpModel, config: RmsPropConfig) -> Result<Self> {
        if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        let mut shapes = Vec::new();
        for (w, b) in model.weights().iter().zip(model.biases()) {
            shapes.push(w.as_slice().len());
            shapes.push(b.len());
        }
        Ok(Self {
            config,
            square_avg: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            momentum_buf: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    pub fn square_avg(&self) -> &[Vec<f64>] {
        &self.square_avg
    }

    pub fn momentum_buf(&self) -> &[Vec<f64>] {
        &self.momentum_buf
    }

    /// Applies one update in place. Penalties touch weights, never biases.
    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients) -> Result<()> {
        let layers = model.weights().len();
        check_dim("gradient weight tensors", layers, grads.weights.len())?;
        check_dim("gradient bias tensors", layers, grads.biases.len())?;
        check_dim("optimizer buffers", 2 * layers, self.square_avg.len())?;
        let cfg = self.config;
        let (weights, biases) = model.params_mut();
        for l in 0..layers {
            let w = weights[l].as_mut_slice();
            let gw = grads.weights[l].as_slice();
            check_dim("weight gradient size", w.len(), gw.len())?;
            check_dim("weight buffer size", w.len(), self.square_avg[2 * l].len())?;
            let (sq, buf) = (&mut self.square_avg[2 * l], &mut self.momentum_buf[2 * l]);
            update(&cfg, w, gw, sq, buf, true);

            let b = &mut biases[l];
            let gb = &grads.biases[l];
            check_dim("bias gradient size", b.len(), gb.len())?;
            check_dim("bias buffer size", b.len(), self.square_avg[2 * l + 1].len())?;
            let (sq, buf) = (&mut self.square_avg[2 * l + 1], &mut self.momentum_buf[2 * l + 1]);
            update(&cfg, b, gb, sq, buf, false);
        }
        Ok(())
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn update(cfg: &RmsPropConfig, params: &mut [f64], grads: &[f64], sq: &mut [f64], buf: &mut [f64], penalize: bool) {
    for (((w, &g0), s), m) in params.iter_mut().zip(grads).zip(sq.iter_mut()).zip(buf.iter_mut()) {
        let g = if penalize {
            g0 + cfg.weight_decay * *w + cfg.l1_penalty * sign(*w)
        } else {
            g0
        };
        *s = cfg.alpha * *s + (1.0 - cfg.alpha) * g * g;
        *m = cfg.momentum * *m + g / libm::sqrt(*s + cfg.eps);
        *w -= cfg.learning_rate * *m;
    }
}
