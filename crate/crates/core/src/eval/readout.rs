use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{make_batches, overlay_into, LabeledImage, Overlay, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::model::IntFFModel;
use crate::numerics::{Activation, DenseLayer, Tensor};
use crate::training::{softmax_cross_entropy, AdamConfig, AdamState, LayerGradients};

use super::report::EvalReport;

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        ReadoutConfig {
            epochs: 5,
            lr: 1e-3,
            batch_size: 64,
            seed: 0,
        }
    }
}

/// Linear softmax classifier over the concatenated selected-group activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub layer: DenseLayer,
}

/// Selected-group activations of every unit under the neutral overlay,
/// concatenated per image into one row.
pub fn readout_features(model: &IntFFModel, images: &[LabeledImage]) -> Result<Tensor> {
    let width = model.input_width();
    let mut x = Tensor::zeros(vec![images.len(), width]);
    for (i, img) in images.iter().enumerate() {
        overlay_into(&img.pixels, Overlay::Neutral, x.row_mut(i))?;
    }
    let trace = model.forward_batch(&x)?;
    let total: usize = trace.units.iter().map(|u| u.group().cols()).sum();
    let mut out = Tensor::zeros(vec![images.len(), total]);
    for i in 0..images.len() {
        let row = out.row_mut(i);
        let mut at = 0;
        for u in &trace.units {
            let g = u.group().row(i);
            row[at..at + g.len()].copy_from_slice(g);
            at += g.len();
        }
    }
    Ok(out)
}

/// Mean cross-entropy of the readout on `features` and its parameter gradients.
pub fn readout_gradients(layer: &DenseLayer, features: &Tensor, labels: &[u8]) -> Result<(f64, LayerGradients)> {
    let logits = layer.forward(features)?;
    let (loss, dlogits) = softmax_cross_entropy(&logits, labels)?;
    let g = layer.backward(features, &logits, &dlogits, false)?;
    Ok((
        loss,
        LayerGradients {
            weight: g.weight,
            bias: g.bias,
        },
    ))
}

/// Trains a readout on frozen features; the model itself is never modified.
pub fn train_readout(model: &IntFFModel, images: &[LabeledImage], config: &ReadoutConfig) -> Result<Readout> {
    if images.is_empty() {
        return Err(Error::Domain("cannot train a readout on an empty set".into()));
    }
    let features = readout_features(model, images)?;
    let labels: Vec<u8> = images.iter().map(|i| i.label).collect();
    let mut layer = DenseLayer::zeros(features.cols(), NUM_CLASSES, Activation::Identity);
    let adam = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    let mut state = AdamState::for_layers(adam, std::slice::from_ref(&layer));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cols = features.cols();
    for _ in 0..config.epochs {
        for batch in make_batches(images.len(), config.batch_size, &mut rng)? {
            let mut x = Tensor::zeros(vec![batch.len(), cols]);
            for (r, &i) in batch.iter().enumerate() {
                x.row_mut(r).copy_from_slice(features.row(i));
            }
            let y: Vec<u8> = batch.iter().map(|&i| labels[i]).collect();
            let (_, g) = readout_gradients(&layer, &x, &y)?;
            state.step_layers(std::slice::from_mut(&mut layer), std::slice::from_ref(&g))?;
        }
    }
    Ok(Readout { layer })
}

impl Readout {
    pub fn predict(&self, model: &IntFFModel, images: &[LabeledImage]) -> Result<Vec<u8>> {
        let logits = self.layer.forward(&readout_features(model, images)?)?;
        Ok((0..logits.rows())
            .map(|i| {
                let row = logits.row(i);
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best as u8
            })
            .collect())
    }

    pub fn evaluate(&self, model: &IntFFModel, images: &[LabeledImage]) -> Result<EvalReport> {
        let predicted = self.predict(model, images)?;
        let truth: Vec<u8> = images.iter().map(|i| i.label).collect();
        EvalReport::from_predictions(&truth, &predicted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_arch;
    use crate::numerics::{finite_diff_grad, max_relative_error};
    use rand::Rng;

    fn images(n: usize, seed: u64) -> Vec<LabeledImage> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let label = rng.random_range(0..10u8);
                let mut pixels: Vec<f64> = (0..30).map(|_| rng.random::<f64>() * 0.2).collect();
                pixels[10 + label as usize] = 1.0;
                LabeledImage { pixels, label }
            })
            .collect()
    }

    #[test]
    fn features_have_total_group_width() {
        let m = IntFFModel::build(parse_arch("30,(8,6),(5,4)").unwrap(), 1.5, 0).unwrap();
        let f = readout_features(&m, &images(7, 1)).unwrap();
        assert_eq!(f.shape(), &[7, 10]);
    }

    #[test]
    fn model_is_untouched_and_readout_learns() {
        let m = IntFFModel::build(parse_arch("30,(20),(20)").unwrap(), 1.5, 3).unwrap();
        let before = m.clone();
        let train = images(600, 2);
        let cfg = ReadoutConfig {
            epochs: 30,
            lr: 1e-2,
            ..ReadoutConfig::default()
        };
        let r = train_readout(&m, &train, &cfg).unwrap();
        assert_eq!(m, before);
        let acc = r.evaluate(&m, &images(200, 3)).unwrap().accuracy;
        assert!(acc > 0.3, "readout accuracy {acc}");
    }

    #[test]
    fn readout_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let w = Tensor::new(vec![10, 6], (0..60).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let b = Tensor::new(vec![10], (0..10).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let layer = DenseLayer::new(w, b, Activation::Identity).unwrap();
            let x = Tensor::new(vec![4, 6], (0..24).map(|_| rng.random::<f64>()).collect()).unwrap();
            let y: Vec<u8> = (0..4).map(|_| rng.random_range(0..10)).collect();
            let (_, g) = readout_gradients(&layer, &x, &y).unwrap();
            let fd_w = finite_diff_grad(
                |p| {
                    let mut l = layer.clone();
                    l.weight.data_mut().copy_from_slice(p);
                    readout_gradients(&l, &x, &y).unwrap().0
                },
                &layer.weight,
                1e-4,
            )
            .unwrap();
            assert!(max_relative_error(&g.weight, &fd_w) < 1e-4);
            let fd_b = finite_diff_grad(
                |p| {
                    let mut l = layer.clone();
                    l.bias.data_mut().copy_from_slice(p);
                    readout_gradients(&l, &x, &y).unwrap().0
                },
                &layer.bias,
                1e-4,
            )
            .unwrap();
            assert!(max_relative_error(&g.bias, &fd_b) < 1e-4);
        }
    }
}
