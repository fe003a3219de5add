use crate::error::{Error, Result};
use crate::model::{HiddenUnit, UnitBatchTrace};
use crate::numerics::{DenseLayer, Tensor};

use super::loss::{unit_loss, unit_loss_partials};

/// Weight and bias gradient of one dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LayerGradients {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        LayerGradients {
            weight: Tensor::zeros(layer.weight.shape().to_vec()),
            bias: Tensor::zeros(layer.bias.shape().to_vec()),
        }
    }

    pub fn max_abs_diff(&self, other: &LayerGradients) -> Result<f64> {
        Ok(self
            .weight
            .max_abs_diff(&other.weight)?
            .max(self.bias.max_abs_diff(&other.bias)?))
    }
}

/// Gradients for the layers of exactly one hidden unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitGradients {
    pub layers: Vec<LayerGradients>,
}

impl UnitGradients {
    pub fn zeros_like(unit: &HiddenUnit) -> Self {
        UnitGradients {
            layers: unit.layers.iter().map(LayerGradients::zeros_like).collect(),
        }
    }

    fn accumulate(&mut self, other: &UnitGradients) -> Result<()> {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.add_scaled(&b.weight, 1.0)?;
            a.bias.add_scaled(&b.bias, 1.0)?;
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &UnitGradients) -> Result<f64> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::Shape {
                op: "UnitGradients::max_abs_diff",
                left: vec![self.layers.len()],
                right: vec![other.layers.len()],
            });
        }
        self.layers
            .iter()
            .zip(&other.layers)
            .try_fold(0.0f64, |m, (a, b)| Ok(m.max(a.max_abs_diff(b)?)))
    }

    fn check_finite(&self) -> Result<()> {
        for (l, g) in self.layers.iter().enumerate() {
            g.weight.check_finite(&format!("layer {l} weight gradient"))?;
            g.bias.check_finite(&format!("layer {l} bias gradient"))?;
        }
        Ok(())
    }
}

/// Gradients for a whole model, one entry per unit plus the optional head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients {
    pub units: Vec<UnitGradients>,
    pub head: Option<LayerGradients>,
}

impl ModelGradients {
    pub fn max_abs_diff(&self, other: &ModelGradients) -> Result<f64> {
        if self.units.len() != other.units.len() {
            return Err(Error::Shape {
                op: "ModelGradients::max_abs_diff",
                left: vec![self.units.len()],
                right: vec![other.units.len()],
            });
        }
        let mut m = 0.0f64;
        for (a, b) in self.units.iter().zip(&other.units) {
            m = m.max(a.max_abs_diff(b)?);
        }
        match (&self.head, &other.head) {
            (Some(a), Some(b)) => m = m.max(a.max_abs_diff(b)?),
            (None, None) => {}
            _ => return Err(Error::Domain("only one side has a head gradient".into())),
        }
        Ok(m)
    }
}

/// Batch-mean local loss of one unit.
pub fn unit_batch_loss(pos: &UnitBatchTrace, neg: &UnitBatchTrace, theta: f64) -> Result<f64> {
    check_pair(pos, neg)?;
    let n = pos.goodness.len() as f64;
    let loss = pos
        .goodness
        .iter()
        .zip(&neg.goodness)
        .map(|(&gp, &gn)| unit_loss(gp, gn, theta))
        .sum::<f64>()
        / n;
    if !loss.is_finite() {
        return Err(Error::non_finite("unit loss"));
    }
    Ok(loss)
}

fn check_pair(pos: &UnitBatchTrace, neg: &UnitBatchTrace) -> Result<()> {
    if pos.goodness.len() != neg.goodness.len() || pos.goodness.is_empty() {
        return Err(Error::Shape {
            op: "positive/negative batch",
            left: vec![pos.goodness.len()],
            right: vec![neg.goodness.len()],
        });
    }
    Ok(())
}

/// dLoss/dGroup for one pass, given per-sample dLoss/dGoodness.
/// Goodness is the mean square, so dG/dy = 2y / width.
pub fn group_loss_gradient(group: &Tensor, d_goodness: &[f64]) -> Tensor {
    let width = group.cols() as f64;
    let mut g = group.clone();
    for (i, row) in g.data_mut().chunks_mut(group.cols().max(1)).enumerate() {
        let c = 2.0 * d_goodness[i] / width;
        row.iter_mut().for_each(|y| *y *= c);
    }
    g
}

/// Backpropagates one pass through the unit's own layers, stopping at the
/// normalized input.
fn backprop_pass(unit: &HiddenUnit, trace: &UnitBatchTrace, d_group: Tensor) -> Result<UnitGradients> {
    let depth = unit.layers.len();
    let mut grads: Vec<Option<LayerGradients>> = vec![None; depth];
    let mut upstream = d_group;
    for l in (0..depth).rev() {
        let layer = &unit.layers[l];
        let g = layer.backward(trace.layer_input(l), &trace.activations[l], &upstream, l > 0)?;
        if let Some(dx) = g.input {
            upstream = dx;
        }
        grads[l] = Some(LayerGradients {
            weight: g.weight,
            bias: g.bias,
        });
    }
    Ok(UnitGradients {
        layers: grads.into_iter().map(|g| g.expect("every layer visited")).collect(),
    })
}

/// Exact gradient of the batch-mean local loss with respect to this unit's
/// parameters only. The unit's normalized input is a constant here, so the
/// result never reaches another unit.
pub fn unit_backward(
    unit: &HiddenUnit,
    pos: &UnitBatchTrace,
    neg: &UnitBatchTrace,
    theta: f64,
) -> Result<UnitGradients> {
    check_pair(pos, neg)?;
    let n = pos.goodness.len() as f64;
    let (d_pos, d_neg): (Vec<f64>, Vec<f64>) = pos
        .goodness
        .iter()
        .zip(&neg.goodness)
        .map(|(&gp, &gn)| {
            let (dp, dn) = unit_loss_partials(gp, gn, theta);
            (dp / n, dn / n)
        })
        .unzip();

    let mut grads = backprop_pass(unit, pos, group_loss_gradient(pos.group(), &d_pos))?;
    let neg_grads = backprop_pass(unit, neg, group_loss_gradient(neg.group(), &d_neg))?;
    grads.accumulate(&neg_grads)?;
    grads.check_finite()?;
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_arch, IntFFModel};
    use crate::numerics::{finite_diff_grad, max_relative_error};
    use crate::training::loss::sigmoid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn batch(rng: &mut ChaCha8Rng, n: usize, w: usize) -> Tensor {
        Tensor::matrix(n, w, (0..n * w).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
    }

    fn loss_of(unit: &HiddenUnit, pos: &Tensor, neg: &Tensor, theta: f64) -> f64 {
        let tp = unit.forward_batch(pos).unwrap();
        let tn = unit.forward_batch(neg).unwrap();
        unit_batch_loss(&tp, &tn, theta).unwrap()
    }

    fn check_against_fd(unit: &HiddenUnit, pos: &Tensor, neg: &Tensor, theta: f64) {
        let tp = unit.forward_batch(pos).unwrap();
        let tn = unit.forward_batch(neg).unwrap();
        let g = unit_backward(unit, &tp, &tn, theta).unwrap();
        for (l, lg) in g.layers.iter().enumerate() {
            let nw = finite_diff_grad(|p| {
                let mut u = unit.clone();
                u.layers[l].weight.data_mut().copy_from_slice(p);
                loss_of(&u, pos, neg, theta)
            }, &unit.layers[l].weight, 1e-4).unwrap();
            let nb = finite_diff_grad(|p| {
                let mut u = unit.clone();
                u.layers[l].bias.data_mut().copy_from_slice(p);
                loss_of(&u, pos, neg, theta)
            }, &unit.layers[l].bias, 1e-4).unwrap();
            assert!(max_relative_error(&lg.weight, &nw) < 1e-4, "layer {l} weight");
            assert!(max_relative_error(&lg.bias, &nb) < 1e-4, "layer {l} bias");
        }
    }

    #[test]
    fn random_units_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for seed in 0..10 {
            let m = IntFFModel::build(parse_arch("7,(6,5,4)").unwrap(), 1.5, seed).unwrap();
            let mut unit = m.units[0].clone();
            for l in &mut unit.layers {
                l.bias.data_mut().iter_mut().for_each(|b| *b = rng.random_range(0.0..0.3));
            }
            let (pos, neg) = (batch(&mut rng, 4, 7), batch(&mut rng, 4, 7));
            check_against_fd(&unit, &pos, &neg, 0.05);
        }
    }

    #[test]
    fn zero_weight_unit_bias_gradient_by_hand() {
        // W = 0, b = c > 0: the group is c everywhere, goodness c^2 for both passes,
        // and dL/db_j = (-sigma(theta - c^2) + sigma(c^2 - theta)) * 2c / width.
        let mut unit = IntFFModel::build(parse_arch("3,2").unwrap(), 1.5, 0).unwrap().units[0].clone();
        unit.layers[0].weight.data_mut().fill(0.0);
        unit.layers[0].bias.data_mut().fill(0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (pos, neg) = (batch(&mut rng, 3, 3), batch(&mut rng, 3, 3));
        let theta = 1.5;
        let tp = unit.forward_batch(&pos).unwrap();
        let tn = unit.forward_batch(&neg).unwrap();
        let g = unit_backward(&unit, &tp, &tn, theta).unwrap();
        let gsq = 0.64;
        let expect = (-sigmoid(theta - gsq) + sigmoid(gsq - theta)) * 2.0 * 0.8 / 2.0;
        for &b in g.layers[0].bias.data() {
            assert!((b - expect).abs() < 1e-14);
        }
        check_against_fd(&unit, &pos, &neg, theta);
    }

    #[test]
    fn identical_passes_partially_cancel() {
        // same input for both passes: per-sample coefficient is sigma(g - theta) - sigma(theta - g)
        let m = IntFFModel::build(parse_arch("5,(4,3)").unwrap(), 1.5, 3).unwrap();
        let mut unit = m.units[0].clone();
        // nonzero biases keep every pre-activation off the ReLU kink
        for l in &mut unit.layers {
            l.bias.data_mut().fill(0.1);
        }
        let unit = &unit;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = batch(&mut rng, 2, 5);
        let t = unit.forward_batch(&x).unwrap();
        let g = unit_backward(unit, &t, &t, 1.5).unwrap();
        let half = {
            let d: Vec<f64> = t
                .goodness
                .iter()
                .map(|&gv| (sigmoid(gv - 1.5) - sigmoid(1.5 - gv)) / 2.0)
                .collect();
            backprop_pass(unit, &t, group_loss_gradient(t.group(), &d)).unwrap()
        };
        assert!(g.max_abs_diff(&half).unwrap() < 1e-15);
        check_against_fd(unit, &x, &x, 1.5);
    }

    #[test]
    fn mismatched_batches_are_rejected() {
        let m = IntFFModel::build(parse_arch("4,3").unwrap(), 1.5, 0).unwrap();
        let u = &m.units[0];
        let tp = u.forward_batch(&Tensor::zeros(vec![2, 4])).unwrap();
        let tn = u.forward_batch(&Tensor::zeros(vec![3, 4])).unwrap();
        assert!(unit_backward(u, &tp, &tn, 1.5).is_err());
    }
}
