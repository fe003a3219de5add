//! Direct implementation of the original Forward-Forward per-layer rule, for
//! cross-checking the singleton-unit case of the batched trainer.
//!
//! Each layer normalizes its input, computes `y = relu(W x + b)`, and follows
//! the gradient of its own loss `softplus(theta - g_pos) + softplus(g_neg - theta)`,
//! `g = mean(y^2)`, with respect to its own `W` and `b`. Plain per-sample loops.

use crate::error::{Error, Result};
use crate::numerics::DenseLayer;

use super::loss::sigmoid;

/// Per-layer `(dW, db)` of the batch-mean FF loss, `dW` row-major `out x in`.
pub fn ff_layer_gradients(
    layers: &[DenseLayer],
    pos: &[Vec<f64>],
    neg: &[Vec<f64>],
    theta: f64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    if pos.len() != neg.len() || pos.is_empty() {
        return Err(Error::Shape {
            op: "ff reference batches",
            left: vec![pos.len()],
            right: vec![neg.len()],
        });
    }
    let n = pos.len() as f64;
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = layers
        .iter()
        .map(|l| (vec![0.0; l.weight.len()], vec![0.0; l.bias.len()]))
        .collect();

    for (samples, positive) in [(pos, true), (neg, false)] {
        for sample in samples {
            let mut h = sample.clone();
            for (layer, (dw, db)) in layers.iter().zip(grads.iter_mut()) {
                let (inw, out) = (layer.in_width(), layer.out_width());
                if h.len() != inw {
                    return Err(Error::Shape {
                        op: "ff reference layer",
                        left: vec![h.len()],
                        right: vec![inw],
                    });
                }
                let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
                let x: Vec<f64> = h.iter().map(|v| v / norm).collect();
                let w = layer.weight.data();
                let y: Vec<f64> = (0..out)
                    .map(|j| {
                        let z = layer.bias.data()[j]
                            + (0..inw).map(|i| w[j * inw + i] * x[i]).sum::<f64>();
                        z.max(0.0)
                    })
                    .collect();
                let g = y.iter().map(|v| v * v).sum::<f64>() / out as f64;
                let dg = if positive {
                    -sigmoid(theta - g)
                } else {
                    sigmoid(g - theta)
                } / n;
                for j in 0..out {
                    if y[j] <= 0.0 {
                        continue;
                    }
                    let dz = dg * 2.0 * y[j] / out as f64;
                    db[j] += dz;
                    for i in 0..inw {
                        dw[j * inw + i] += dz * x[i];
                    }
                }
                h = y;
            }
        }
    }
    Ok(grads)
}
