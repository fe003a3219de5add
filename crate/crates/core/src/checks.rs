//! Self-verification suites: finite-difference gradient checks for every
//! analytic backward pass, the stop-gradient global-loss oracle, and the
//! reduction of singleton-unit IntFF to the original FF rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::eval::readout_gradients;
use crate::model::{parse_arch, ArchSpec, HiddenUnitSpec, IntFFModel};
use crate::numerics::{
    finite_diff_grad, max_relative_error, mean_square, relu, relu_backward, Activation,
    Conv2DLayer, DenseLayer, Tensor,
};
use crate::training::reference::ff_layer_gradients;
use crate::training::{
    bp_gradients, intff_gradients, stopgrad_oracle_grads, unit_batch_loss, unit_loss,
    unit_loss_partials,
};

/// Finite-difference step used by every gradient check.
pub const FD_STEP: f64 = 1e-4;
/// Largest accepted relative error between analytic and numeric gradients.
pub const GRADCHECK_THRESHOLD: f64 = 1e-4;
/// Largest accepted elementwise gap between per-unit and oracle gradients.
pub const ORACLE_THRESHOLD: f64 = 1e-9;
/// Largest accepted elementwise gap between singleton IntFF and direct FF.
pub const FF_REDUCTION_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub instances: usize,
    /// Worst error seen across all instances.
    pub worst: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, instances: usize, worst: f64, threshold: f64) -> Self {
        CheckResult {
            name: name.into(),
            instances,
            worst,
            threshold,
            passed: worst.is_finite() && worst <= threshold,
        }
    }
}

fn random_tensor(shape: Vec<usize>, scale: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-scale..scale)).collect())
        .expect("finite by construction")
}

fn positive_tensor(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random::<f64>()).collect()).expect("finite by construction")
}

/// Relative error between `analytic` and the central difference of `f` around `at`.
fn compare<F: FnMut(&[f64]) -> f64>(analytic: &Tensor, at: &Tensor, f: F) -> Result<f64> {
    let numeric = finite_diff_grad(f, at, FD_STEP)?;
    Ok(max_relative_error(analytic, &numeric))
}

fn dense_instance(activation: Activation, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (n, inw, out) = (rng.random_range(1..5), rng.random_range(2..7), rng.random_range(2..6));
    let layer = DenseLayer::new(
        random_tensor(vec![out, inw], 1.0, rng),
        random_tensor(vec![out], 0.5, rng),
        activation,
    )?;
    let x = random_tensor(vec![n, inw], 1.0, rng);
    let r = random_tensor(vec![n, out], 1.0, rng);
    let probe = |l: &DenseLayer, x: &Tensor| -> f64 {
        let y = l.forward(x).expect("shapes fixed");
        y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
    };
    let y = layer.forward(&x)?;
    let g = layer.backward(&x, &y, &r, true)?;
    let ew = compare(&g.weight, &layer.weight, |p| {
        let mut l = layer.clone();
        l.weight.data_mut().copy_from_slice(p);
        probe(&l, &x)
    })?;
    let eb = compare(&g.bias, &layer.bias, |p| {
        let mut l = layer.clone();
        l.bias.data_mut().copy_from_slice(p);
        probe(&l, &x)
    })?;
    let ex = compare(g.input.as_ref().expect("requested"), &x, |p| {
        let xi = Tensor::new(x.shape().to_vec(), p.to_vec()).expect("same shape");
        probe(&layer, &xi)
    })?;
    Ok(ew.max(eb).max(ex))
}

fn relu_instance(rng: &mut ChaCha8Rng) -> Result<f64> {
    let x = random_tensor(vec![12], 1.0, rng);
    let r = random_tensor(vec![12], 1.0, rng);
    let out = relu(x.data());
    let analytic = Tensor::vector(relu_backward(&out.mask, r.data())?)?;
    compare(&analytic, &x, |p| relu(p).value.iter().zip(r.data()).map(|(a, b)| a * b).sum())
}

fn unit_loss_instance(rng: &mut ChaCha8Rng) -> Result<f64> {
    let theta = rng.random_range(0.5..3.0);
    let g = Tensor::vector(vec![rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)])?;
    let (dp, dn) = unit_loss_partials(g.data()[0], g.data()[1], theta);
    compare(&Tensor::vector(vec![dp, dn])?, &g, |p| unit_loss(p[0], p[1], theta))
}

fn random_model(rng: &mut ChaCha8Rng, max_in: usize, max_width: usize, bp_head: bool) -> Result<IntFFModel> {
    let input = rng.random_range(4..=max_in);
    let units = (0..rng.random_range(1..=3))
        .map(|_| HiddenUnitSpec {
            layer_widths: (0..rng.random_range(1..=3))
                .map(|_| rng.random_range(2..=max_width))
                .collect(),
        })
        .collect();
    let mut arch = ArchSpec::new(input, units)?;
    if bp_head {
        arch = arch.with_bp_head(10)?;
    }
    let mut model = IntFFModel::build(arch, rng.random_range(0.5..2.0), rng.random())?;
    // Random biases keep pre-activations away from the ReLU kink at exactly
    // zero, where a dead layer would otherwise sit with zero bias.
    for layer in model.units.iter_mut().flat_map(|u| u.layers.iter_mut()) {
        for b in layer.bias.data_mut() {
            *b = rng.random_range(-0.2..0.3);
        }
    }
    Ok(model)
}

fn batch(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    positive_tensor(vec![rows, cols], rng)
}

fn unit_backward_instance(rng: &mut ChaCha8Rng) -> Result<f64> {
    let model = random_model(rng, 10, 8, false)?;
    let n = rng.random_range(1..5);
    let (pos, neg) = (batch(n, model.input_width(), rng), batch(n, model.input_width(), rng));
    let (grads, _) = intff_gradients(&model, &pos, &neg)?;
    let mut worst: f64 = 0.0;
    for k in 0..model.units.len() {
        for l in 0..model.units[k].layers.len() {
            let local_loss = |m: &IntFFModel| -> f64 {
                let tp = m.forward_batch(&pos).expect("finite");
                let tn = m.forward_batch(&neg).expect("finite");
                unit_batch_loss(&tp.units[k], &tn.units[k], m.theta).expect("finite")
            };
            let layer = &model.units[k].layers[l];
            let g = &grads.units[k].layers[l];
            worst = worst.max(compare(&g.weight, &layer.weight, |p| {
                let mut m = model.clone();
                m.units[k].layers[l].weight.data_mut().copy_from_slice(p);
                local_loss(&m)
            })?);
            worst = worst.max(compare(&g.bias, &layer.bias, |p| {
                let mut m = model.clone();
                m.units[k].layers[l].bias.data_mut().copy_from_slice(p);
                local_loss(&m)
            })?);
        }
    }
    Ok(worst)
}

fn bp_instance(rng: &mut ChaCha8Rng) -> Result<f64> {
    let model = random_model(rng, 10, 8, true)?;
    let n = rng.random_range(1..5);
    let x = batch(n, model.input_width(), rng);
    let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..10)).collect();
    let (_, grads) = bp_gradients(&model, &x, &labels)?;
    let loss = |m: &IntFFModel| bp_gradients(m, &x, &labels).expect("finite").0;
    let mut worst: f64 = 0.0;
    for k in 0..model.units.len() {
        for l in 0..model.units[k].layers.len() {
            let g = &grads.units[k].layers[l];
            worst = worst.max(compare(&g.weight, &model.units[k].layers[l].weight, |p| {
                let mut m = model.clone();
                m.units[k].layers[l].weight.data_mut().copy_from_slice(p);
                loss(&m)
            })?);
            worst = worst.max(compare(&g.bias, &model.units[k].layers[l].bias, |p| {
                let mut m = model.clone();
                m.units[k].layers[l].bias.data_mut().copy_from_slice(p);
                loss(&m)
            })?);
        }
    }
    let head = model.bp_head.as_ref().expect("built with head");
    let hg = grads.head.as_ref().expect("bp gradients include the head");
    worst = worst.max(compare(&hg.weight, &head.weight, |p| {
        let mut m = model.clone();
        m.bp_head.as_mut().expect("head").weight.data_mut().copy_from_slice(p);
        loss(&m)
    })?);
    worst = worst.max(compare(&hg.bias, &head.bias, |p| {
        let mut m = model.clone();
        m.bp_head.as_mut().expect("head").bias.data_mut().copy_from_slice(p);
        loss(&m)
    })?);
    Ok(worst)
}

/// A convolution used as a unit interior: conv, ReLU, mean-square goodness,
/// and the contrastive local loss over one positive and one negative image.
fn conv_unit_instance(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (cin, cout) = (rng.random_range(1..3), rng.random_range(1..4));
    let k = rng.random_range(2..4);
    let stride = rng.random_range(1..3);
    let padding = rng.random_range(0..2);
    let mut conv = Conv2DLayer::init(cin, cout, (k, k), stride, padding, rng)?;
    conv.bias = random_tensor(vec![cout], 0.3, rng);
    let (h, w) = (rng.random_range(4..7), rng.random_range(4..7));
    let pos = positive_tensor(vec![cin, h, w], rng);
    let neg = positive_tensor(vec![cin, h, w], rng);
    let theta = rng.random_range(0.05..0.5);

    let loss = |c: &Conv2DLayer, p: &Tensor, n: &Tensor| -> f64 {
        let g = |x: &Tensor| mean_square(&relu(c.forward(x).expect("dims").data()).value).expect("nonempty");
        unit_loss(g(p), g(n), theta)
    };
    let pass = |x: &Tensor, d_goodness: f64| -> Result<crate::numerics::Conv2DGrads> {
        let z = conv.forward(x)?;
        let act = relu(z.data());
        let width = act.value.len() as f64;
        let dy: Vec<f64> = act.value.iter().map(|y| d_goodness * 2.0 * y / width).collect();
        let dz = relu_backward(&act.mask, &dy)?;
        conv.backward(x, &Tensor::new(z.shape().to_vec(), dz)?)
    };
    let gp = |x: &Tensor| mean_square(&relu(conv.forward(x).expect("dims").data()).value).expect("nonempty");
    let (dp, dn) = unit_loss_partials(gp(&pos), gp(&neg), theta);
    let (a, b) = (pass(&pos, dp)?, pass(&neg, dn)?);
    let mut dk = a.kernels.clone();
    dk.add_scaled(&b.kernels, 1.0)?;
    let mut db = a.bias.clone();
    db.add_scaled(&b.bias, 1.0)?;

    let ek = compare(&dk, &conv.kernels, |p| {
        let mut c = conv.clone();
        c.kernels.data_mut().copy_from_slice(p);
        loss(&c, &pos, &neg)
    })?;
    let eb = compare(&db, &conv.bias, |p| {
        let mut c = conv.clone();
        c.bias.data_mut().copy_from_slice(p);
        loss(&c, &pos, &neg)
    })?;
    let ex = compare(&a.input, &pos, |p| {
        let x = Tensor::new(pos.shape().to_vec(), p.to_vec()).expect("same shape");
        loss(&conv, &x, &neg)
    })?;
    Ok(ek.max(eb).max(ex))
}

fn readout_instance(rng: &mut ChaCha8Rng) -> Result<f64> {
    let f = rng.random_range(2..8);
    let layer = DenseLayer::new(
        random_tensor(vec![10, f], 1.0, rng),
        random_tensor(vec![10], 1.0, rng),
        Activation::Identity,
    )?;
    let n = rng.random_range(1..5);
    let x = positive_tensor(vec![n, f], rng);
    let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..10)).collect();
    let (_, g) = readout_gradients(&layer, &x, &labels)?;
    let ew = compare(&g.weight, &layer.weight, |p| {
        let mut l = layer.clone();
        l.weight.data_mut().copy_from_slice(p);
        readout_gradients(&l, &x, &labels).expect("finite").0
    })?;
    let eb = compare(&g.bias, &layer.bias, |p| {
        let mut l = layer.clone();
        l.bias.data_mut().copy_from_slice(p);
        readout_gradients(&l, &x, &labels).expect("finite").0
    })?;
    Ok(ew.max(eb))
}

fn run_check(
    name: &str,
    instances: usize,
    threshold: f64,
    rng: &mut ChaCha8Rng,
    mut instance: impl FnMut(&mut ChaCha8Rng) -> Result<f64>,
) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let e = instance(rng)?;
        worst = if e.is_nan() { f64::NAN } else { worst.max(e) };
    }
    Ok(CheckResult::new(name, instances, worst, threshold))
}

/// Finite-difference checks of every analytic backward pass.
pub fn gradcheck_suite(seed: u64, instances: usize) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = GRADCHECK_THRESHOLD;
    Ok(vec![
        run_check("dense-relu", instances, t, &mut rng, |r| dense_instance(Activation::Relu, r))?,
        run_check("dense-linear", instances, t, &mut rng, |r| dense_instance(Activation::Identity, r))?,
        run_check("relu", instances, t, &mut rng, relu_instance)?,
        run_check("unit-loss", instances, t, &mut rng, unit_loss_instance)?,
        run_check("unit-backward", instances, t, &mut rng, unit_backward_instance)?,
        run_check("bp-stack", instances, t, &mut rng, bp_instance)?,
        run_check("conv2d-unit", instances, t, &mut rng, conv_unit_instance)?,
        run_check("softmax-readout", instances, t, &mut rng, readout_instance)?,
    ])
}

/// Per-unit gradients against the detached global-loss gradients on random
/// models no larger than `16,(12,8),(6,4)`.
pub fn oracle_suite(seed: u64, instances: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_check("stop-gradient-oracle", instances, ORACLE_THRESHOLD, &mut rng, |rng| {
        let model = random_model(rng, 16, 12, false)?;
        let n = rng.random_range(1..6);
        let (pos, neg) = (batch(n, model.input_width(), rng), batch(n, model.input_width(), rng));
        let (local, _) = intff_gradients(&model, &pos, &neg)?;
        let oracle = stopgrad_oracle_grads(&model, &pos, &neg, model.theta)?;
        local.max_abs_diff(&oracle)
    })
}

/// Singleton-unit IntFF gradients against a direct per-layer FF implementation.
pub fn ff_reduction_check(seed: u64, instances: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_check("ff-reduction", instances, FF_REDUCTION_THRESHOLD, &mut rng, |rng| {
        let depth = rng.random_range(1..=4);
        let mut spec = rng.random_range(4..=16).to_string();
        for _ in 0..depth {
            spec.push_str(&format!(",{}", rng.random_range(2..=12)));
        }
        let model = IntFFModel::build(parse_arch(&spec)?, rng.random_range(0.5..2.0), rng.random())?;
        let n = rng.random_range(1..6);
        let (pos, neg) = (batch(n, model.input_width(), rng), batch(n, model.input_width(), rng));
        let (grads, _) = intff_gradients(&model, &pos, &neg)?;
        let layers: Vec<DenseLayer> = model.units.iter().map(|u| u.layers[0].clone()).collect();
        let rows = |t: &Tensor| (0..t.rows()).map(|i| t.row(i).to_vec()).collect::<Vec<_>>();
        let reference = ff_layer_gradients(&layers, &rows(&pos), &rows(&neg), model.theta)?;
        let mut worst: f64 = 0.0;
        for (g, (dw, db)) in grads.units.iter().zip(&reference) {
            let l = &g.layers[0];
            for (a, b) in l.weight.data().iter().zip(dw).chain(l.bias.data().iter().zip(db)) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradcheck_suite_passes() {
        for r in gradcheck_suite(1, 10).unwrap() {
            assert!(r.passed, "{r:?}");
            assert_eq!(r.instances, 10);
        }
    }

    #[test]
    fn oracle_suite_passes() {
        let r = oracle_suite(2, 20).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn ff_reduction_passes() {
        let r = ff_reduction_check(3, 20).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn nan_never_passes() {
        assert!(!CheckResult::new("x", 1, f64::NAN, 1.0).passed);
    }
}
