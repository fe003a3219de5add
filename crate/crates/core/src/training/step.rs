use crate::error::{Error, Result};
use crate::model::IntFFModel;
use crate::numerics::Tensor;

use super::{unit_backward, unit_batch_loss, ModelGradients, OptimizerState, UpdateSchedule};

fn check_batches(model: &IntFFModel, pos: &Tensor, neg: &Tensor) -> Result<()> {
    if pos.shape() != neg.shape() || pos.rows() == 0 {
        return Err(Error::Shape {
            op: "positive/negative batches",
            left: pos.shape().to_vec(),
            right: neg.shape().to_vec(),
        });
    }
    if pos.cols() != model.input_width() {
        return Err(Error::Shape {
            op: "batch width",
            left: pos.shape().to_vec(),
            right: vec![model.input_width()],
        });
    }
    Ok(())
}

/// Per-unit gradients and batch-mean losses from one positive and one
/// negative forward pass, without touching the parameters.
pub fn intff_gradients(
    model: &IntFFModel,
    pos: &Tensor,
    neg: &Tensor,
) -> Result<(ModelGradients, Vec<f64>)> {
    check_batches(model, pos, neg)?;
    let tp = model.forward_batch(pos)?;
    let tn = model.forward_batch(neg)?;
    let mut units = Vec::with_capacity(model.units.len());
    let mut losses = Vec::with_capacity(model.units.len());
    for (k, unit) in model.units.iter().enumerate() {
        let (p, n) = (&tp.units[k], &tn.units[k]);
        losses.push(unit_batch_loss(p, n, model.theta).map_err(|e| in_unit(k, e))?);
        units.push(unit_backward(unit, p, n, model.theta).map_err(|e| in_unit(k, e))?);
    }
    Ok((ModelGradients { units, head: None }, losses))
}

fn in_unit(k: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { context } => Error::non_finite(format!("unit {k} {context}")),
        other => other,
    }
}

/// One IntFF/FF training step. Returns the batch-mean local loss of each unit.
///
/// `PerBatch` computes every unit's gradient from one pair of forward passes
/// and then updates all units. `PerUnit` walks the units in order and updates
/// each one as soon as its gradient is known; the next unit is fed the
/// activations computed before that update.
pub fn train_step_intff(
    model: &mut IntFFModel,
    pos: &Tensor,
    neg: &Tensor,
    opt: &mut OptimizerState,
    schedule: UpdateSchedule,
) -> Result<Vec<f64>> {
    match schedule {
        UpdateSchedule::PerBatch => {
            let (grads, losses) = intff_gradients(model, pos, neg)?;
            for ((unit, state), g) in model.units.iter_mut().zip(&mut opt.units).zip(&grads.units) {
                state.step_layers(&mut unit.layers, &g.layers)?;
            }
            Ok(losses)
        }
        UpdateSchedule::PerUnit => {
            check_batches(model, pos, neg)?;
            let theta = model.theta;
            let mut losses = Vec::with_capacity(model.units.len());
            let (mut in_pos, mut in_neg) = (pos.clone(), neg.clone());
            for (k, (unit, state)) in model.units.iter_mut().zip(&mut opt.units).enumerate() {
                let tp = unit.forward_batch(&in_pos).map_err(|e| in_unit(k, e))?;
                let tn = unit.forward_batch(&in_neg).map_err(|e| in_unit(k, e))?;
                losses.push(unit_batch_loss(&tp, &tn, theta).map_err(|e| in_unit(k, e))?);
                let g = unit_backward(unit, &tp, &tn, theta).map_err(|e| in_unit(k, e))?;
                state.step_layers(&mut unit.layers, &g.layers)?;
                in_pos = tp.activations.last().expect("nonempty").clone();
                in_neg = tn.activations.last().expect("nonempty").clone();
            }
            Ok(losses)
        }
    }
}
