//! Backpropagation baseline: the unit layers as one plain ReLU stack (no
//! normalization, no gradient barriers) followed by a linear softmax head.

use crate::error::{Error, Result};
use crate::model::IntFFModel;
use crate::numerics::{DenseLayer, Tensor};

use super::{LayerGradients, ModelGradients, OptimizerState, UnitGradients};

#[derive(Debug, Clone)]
pub struct BpTrace {
    /// Output of every hidden layer in network order.
    pub hidden: Vec<Tensor>,
    pub logits: Tensor,
}

fn head(model: &IntFFModel) -> Result<&DenseLayer> {
    model
        .bp_head
        .as_ref()
        .ok_or_else(|| Error::Domain("model has no bp head".into()))
}

pub fn bp_forward(model: &IntFFModel, x: &Tensor) -> Result<BpTrace> {
    let head = head(model)?;
    let mut hidden: Vec<Tensor> = Vec::new();
    for layer in model.units.iter().flat_map(|u| &u.layers) {
        let y = layer.forward(hidden.last().unwrap_or(x))?;
        y.check_finite("bp hidden activations")?;
        hidden.push(y);
    }
    let logits = head.forward(hidden.last().expect("at least one unit"))?;
    logits.check_finite("bp logits")?;
    Ok(BpTrace { hidden, logits })
}

/// Mean softmax cross-entropy and its gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[u8]) -> Result<(f64, Tensor)> {
    let (n, classes) = (logits.rows(), logits.cols());
    if labels.len() != n || n == 0 {
        return Err(Error::Shape {
            op: "softmax_cross_entropy",
            left: logits.shape().to_vec(),
            right: vec![labels.len()],
        });
    }
    let mut grad = logits.clone();
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let label = label as usize;
        if label >= classes {
            return Err(Error::Domain(format!("label {label} out of range 0..{classes}")));
        }
        let row = grad.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - row[label];
        for z in row.iter_mut() {
            *z = (*z - log_z).exp() / n as f64;
        }
        row[label] -= 1.0 / n as f64;
    }
    Ok((total / n as f64, grad))
}

pub fn bp_gradients(model: &IntFFModel, x: &Tensor, labels: &[u8]) -> Result<(f64, ModelGradients)> {
    let trace = bp_forward(model, x)?;
    let (loss, d_logits) = softmax_cross_entropy(&trace.logits, labels)?;
    let head = head(model)?;
    let last = trace.hidden.last().expect("at least one unit");
    let hg = head.backward(last, &trace.logits, &d_logits, true)?;
    let mut upstream = hg.input.expect("requested");

    let layers: Vec<&DenseLayer> = model.units.iter().flat_map(|u| &u.layers).collect();
    let mut flat: Vec<LayerGradients> = Vec::with_capacity(layers.len());
    for l in (0..layers.len()).rev() {
        let input = if l == 0 { x } else { &trace.hidden[l - 1] };
        let g = layers[l].backward(input, &trace.hidden[l], &upstream, l > 0)?;
        if let Some(dx) = g.input {
            upstream = dx;
        }
        flat.push(LayerGradients {
            weight: g.weight,
            bias: g.bias,
        });
    }
    flat.reverse();

    let mut flat = flat.into_iter();
    let units = model
        .units
        .iter()
        .map(|u| UnitGradients {
            layers: flat.by_ref().take(u.layers.len()).collect(),
        })
        .collect();
    if !loss.is_finite() {
        return Err(Error::non_finite("bp cross-entropy loss"));
    }
    Ok((
        loss,
        ModelGradients {
            units,
            head: Some(LayerGradients {
                weight: hg.weight,
                bias: hg.bias,
            }),
        },
    ))
}

/// Full-depth backprop step on a labeled batch; returns the mean loss.
pub fn train_bp_step(
    model: &mut IntFFModel,
    x: &Tensor,
    labels: &[u8],
    opt: &mut OptimizerState,
) -> Result<f64> {
    let (loss, grads) = bp_gradients(model, x, labels)?;
    for ((unit, state), g) in model.units.iter_mut().zip(&mut opt.units).zip(&grads.units) {
        state.step_layers(&mut unit.layers, &g.layers)?;
    }
    let head = model.bp_head.as_mut().expect("checked in bp_gradients");
    let state = opt
        .head
        .as_mut()
        .ok_or_else(|| Error::Domain("optimizer has no head state".into()))?;
    state.step_layers(std::slice::from_mut(head), std::slice::from_ref(grads.head.as_ref().expect("bp head gradient")))?;
    Ok(loss)
}

/// Arg-max class per row; ties go to the lowest index.
pub fn bp_predict(model: &IntFFModel, x: &Tensor) -> Result<Vec<u8>> {
    let trace = bp_forward(model, x)?;
    Ok((0..trace.logits.rows())
        .map(|i| argmax(trace.logits.row(i)) as u8)
        .collect())
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate() {
        if s > v[best] {
            best = i;
        }
    }
    best
}
