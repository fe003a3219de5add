//! Independent gradient oracle.
//!
//! Builds the *global* loss `sum_k unit_loss_k` on a scalar reverse-mode tape
//! and differentiates it. With `detach_unit_inputs` each unit's input is cut
//! from the graph (stop-gradient), and the result must equal the per-unit
//! shallow backprop gradients. Without it the same loss is differentiated end
//! to end, which is what plain backprop of the summed loss would do.
//!
//! The tape shares no code with the batched layer backward passes.

use crate::error::{Error, Result};
use crate::model::IntFFModel;
use crate::numerics::{Tensor, NORMALIZE_EPS};

use super::{LayerGradients, ModelGradients, UnitGradients};

#[derive(Clone, Copy, Debug)]
struct Var(usize);

struct Node {
    value: f64,
    parents: [(usize, f64); 2],
    arity: u8,
}

#[derive(Default)]
struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    fn push(&mut self, value: f64, parents: &[(Var, f64)]) -> Var {
        let mut p = [(0, 0.0); 2];
        for (slot, &(v, d)) in p.iter_mut().zip(parents) {
            *slot = (v.0, d);
        }
        self.nodes.push(Node {
            value,
            parents: p,
            arity: parents.len() as u8,
        });
        Var(self.nodes.len() - 1)
    }

    fn leaf(&mut self, value: f64) -> Var {
        self.push(value, &[])
    }

    fn val(&self, v: Var) -> f64 {
        self.nodes[v.0].value
    }

    /// Same value, no gradient path.
    fn stop_gradient(&mut self, v: Var) -> Var {
        self.leaf(self.val(v))
    }

    fn add(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a) + self.val(b), &[(a, 1.0), (b, 1.0)])
    }

    fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.val(a), self.val(b));
        self.push(x * y, &[(a, y), (b, x)])
    }

    fn scale(&mut self, a: Var, c: f64) -> Var {
        self.push(self.val(a) * c, &[(a, c)])
    }

    fn offset(&mut self, a: Var, c: f64) -> Var {
        self.push(self.val(a) + c, &[(a, 1.0)])
    }

    fn relu(&mut self, a: Var) -> Var {
        let x = self.val(a);
        if x > 0.0 {
            self.push(x, &[(a, 1.0)])
        } else {
            self.push(0.0, &[(a, 0.0)])
        }
    }

    fn sqrt(&mut self, a: Var) -> Var {
        let s = self.val(a).sqrt();
        let d = if s > 0.0 { 0.5 / s } else { 0.0 };
        self.push(s, &[(a, d)])
    }

    fn div(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.val(a), self.val(b));
        self.push(x / y, &[(a, 1.0 / y), (b, -x / (y * y))])
    }

    fn softplus(&mut self, a: Var) -> Var {
        let x = self.val(a);
        let value = x.max(0.0) + (-x.abs()).exp().ln_1p();
        let slope = 1.0 / (1.0 + (-x).exp());
        self.push(value, &[(a, slope)])
    }

    fn sum(&mut self, vars: &[Var]) -> Var {
        let mut acc = self.leaf(0.0);
        for &v in vars {
            acc = self.add(acc, v);
        }
        acc
    }

    fn gradient(&self, root: Var) -> Vec<f64> {
        let mut adj = vec![0.0; self.nodes.len()];
        adj[root.0] = 1.0;
        for i in (0..=root.0).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = &self.nodes[i];
            for &(p, d) in &node.parents[..node.arity as usize] {
                adj[p] += a * d;
            }
        }
        adj
    }
}

/// Parameter leaves of one dense layer.
struct LayerVars {
    weight: Vec<Var>,
    bias: Vec<Var>,
    in_width: usize,
}

/// Records `sum_k goodness_k` terms for one sample and returns the per-unit
/// goodness variables.
fn record_sample(
    tape: &mut Tape,
    params: &[Vec<LayerVars>],
    x: &[f64],
    detach: bool,
) -> Vec<Var> {
    let mut input: Vec<Var> = x.iter().map(|&v| tape.leaf(v)).collect();
    let mut goodness = Vec::with_capacity(params.len());
    for unit in params {
        if detach {
            input = input.iter().map(|&v| tape.stop_gradient(v)).collect();
        }
        // x / max(|x|, eps)
        let squares: Vec<Var> = input.iter().map(|&v| tape.mul(v, v)).collect();
        let ss = tape.sum(&squares);
        let norm = tape.sqrt(ss);
        let denom = if tape.val(norm) >= NORMALIZE_EPS {
            norm
        } else {
            tape.leaf(NORMALIZE_EPS)
        };
        let mut h: Vec<Var> = input.iter().map(|&v| tape.div(v, denom)).collect();

        for layer in unit {
            let out = layer.bias.len();
            let mut next = Vec::with_capacity(out);
            for j in 0..out {
                let mut z = layer.bias[j];
                for (i, &hi) in h.iter().enumerate() {
                    let t = tape.mul(layer.weight[j * layer.in_width + i], hi);
                    z = tape.add(z, t);
                }
                next.push(tape.relu(z));
            }
            h = next;
        }
        let squares: Vec<Var> = h.iter().map(|&v| tape.mul(v, v)).collect();
        let s = tape.sum(&squares);
        goodness.push(tape.scale(s, 1.0 / h.len() as f64));
        input = h;
    }
    goodness
}

/// Gradients of the global loss `sum_k mean_i unit_loss(g_pos_ik, g_neg_ik)`
/// computed on a scalar tape.
pub fn global_loss_grads(
    model: &IntFFModel,
    pos: &Tensor,
    neg: &Tensor,
    theta: f64,
    detach_unit_inputs: bool,
) -> Result<(f64, ModelGradients)> {
    if pos.shape() != neg.shape() || pos.rows() == 0 || pos.cols() != model.input_width() {
        return Err(Error::Shape {
            op: "stopgrad oracle batches",
            left: pos.shape().to_vec(),
            right: neg.shape().to_vec(),
        });
    }
    let mut tape = Tape::default();
    let params: Vec<Vec<LayerVars>> = model
        .units
        .iter()
        .map(|u| {
            u.layers
                .iter()
                .map(|l| LayerVars {
                    weight: l.weight.data().iter().map(|&w| tape.leaf(w)).collect(),
                    bias: l.bias.data().iter().map(|&b| tape.leaf(b)).collect(),
                    in_width: l.in_width(),
                })
                .collect()
        })
        .collect();

    let n = pos.rows();
    let mut terms = Vec::new();
    for i in 0..n {
        let gp = record_sample(&mut tape, &params, pos.row(i), detach_unit_inputs);
        let gn = record_sample(&mut tape, &params, neg.row(i), detach_unit_inputs);
        for (p, q) in gp.into_iter().zip(gn) {
            // softplus(theta - g_pos) + softplus(g_neg - theta), averaged over the batch
            let a = tape.scale(p, -1.0);
            let a = tape.offset(a, theta);
            let a = tape.softplus(a);
            let b = tape.offset(q, -theta);
            let b = tape.softplus(b);
            let pair = tape.add(a, b);
            terms.push(tape.scale(pair, 1.0 / n as f64));
        }
    }
    let loss = tape.sum(&terms);
    let adj = tape.gradient(loss);

    let grab = |vars: &[Var], shape: &[usize]| {
        Tensor::new(shape.to_vec(), vars.iter().map(|v| adj[v.0]).collect())
    };
    let mut units = Vec::with_capacity(params.len());
    for (unit_vars, unit) in params.iter().zip(&model.units) {
        let mut layers = Vec::with_capacity(unit_vars.len());
        for (lv, layer) in unit_vars.iter().zip(&unit.layers) {
            layers.push(LayerGradients {
                weight: grab(&lv.weight, layer.weight.shape())?,
                bias: grab(&lv.bias, layer.bias.shape())?,
            });
        }
        units.push(UnitGradients { layers });
    }
    let value = tape.val(loss);
    if !value.is_finite() {
        return Err(Error::non_finite("global loss"));
    }
    Ok((value, ModelGradients { units, head: None }))
}

/// Stop-gradient oracle: gradients of the detached global loss.
pub fn stopgrad_oracle_grads(
    model: &IntFFModel,
    pos: &Tensor,
    neg: &Tensor,
    theta: f64,
) -> Result<ModelGradients> {
    global_loss_grads(model, pos, neg, theta, true).map(|(_, g)| g)
}
