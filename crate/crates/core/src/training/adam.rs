use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IntFFModel;
use crate::numerics::{DenseLayer, Tensor};

use super::LayerGradients;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for an ordered list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig, shapes: &[Vec<usize>]) -> Self {
        AdamState {
            config,
            step: 0,
            m: shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
        }
    }

    /// State for `[w0, b0, w1, b1, ...]` of a layer chain.
    pub fn for_layers(config: AdamConfig, layers: &[DenseLayer]) -> Self {
        let shapes: Vec<Vec<usize>> = layers
            .iter()
            .flat_map(|l| [l.weight.shape().to_vec(), l.bias.shape().to_vec()])
            .collect();
        AdamState::new(config, &shapes)
    }

    pub fn step_layers(&mut self, layers: &mut [DenseLayer], grads: &[LayerGradients]) -> Result<()> {
        let mut params: Vec<&mut Tensor> = layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect();
        let grads: Vec<&Tensor> = grads.iter().flat_map(|g| [&g.weight, &g.bias]).collect();
        adam_update(self, &mut params, &grads)
    }
}

/// One bias-corrected Adam step over every parameter tensor.
pub fn adam_update(state: &mut AdamState, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<()> {
    if params.len() != state.m.len() || grads.len() != state.m.len() {
        return Err(Error::Shape {
            op: "adam_update",
            left: vec![params.len(), grads.len()],
            right: vec![state.m.len()],
        });
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(Error::Shape {
                op: "adam_update",
                left: p.shape().to_vec(),
                right: g.shape().to_vec(),
            });
        }
    }
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for (((pi, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = beta1 * *mi + (1.0 - beta1) * gi;
            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *pi -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Adam state for every parameter group of a model: one per unit, plus the head.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub units: Vec<AdamState>,
    pub head: Option<AdamState>,
}

impl OptimizerState {
    pub fn new(model: &IntFFModel, config: AdamConfig) -> Self {
        OptimizerState {
            units: model
                .units
                .iter()
                .map(|u| AdamState::for_layers(config, &u.layers))
                .collect(),
            head: model
                .bp_head
                .as_ref()
                .map(|h| AdamState::for_layers(config, std::slice::from_ref(h))),
        }
    }
}
