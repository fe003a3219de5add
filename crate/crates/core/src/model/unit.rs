use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{
    he_uniform_init, l2_normalize_rows, mean_square, Activation, DenseLayer, Tensor,
    NORMALIZE_EPS,
};

use super::HiddenUnitSpec;

/// One hidden unit: input normalization followed by a dense/ReLU chain.
/// The chain's last layer is the selected group.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenUnit {
    pub layers: Vec<DenseLayer>,
}

/// Activations of one unit over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitBatchTrace {
    /// Row-normalized unit input. Treated as a constant by the unit's backward
    /// pass: nothing flows back across it.
    pub normalized: Tensor,
    /// Output of every layer; the last entry is the selected group.
    pub activations: Vec<Tensor>,
    /// Mean square of the selected group, per sample.
    pub goodness: Vec<f64>,
}

impl UnitBatchTrace {
    pub fn group(&self) -> &Tensor {
        self.activations.last().expect("units have at least one layer")
    }

    /// Input seen by layer `l` (the normalized input for layer 0).
    pub fn layer_input(&self, l: usize) -> &Tensor {
        if l == 0 {
            &self.normalized
        } else {
            &self.activations[l - 1]
        }
    }
}

impl HiddenUnit {
    pub fn init<R: Rng + ?Sized>(in_width: usize, spec: &HiddenUnitSpec, rng: &mut R) -> Self {
        let mut fan_in = in_width;
        let layers = spec
            .layer_widths
            .iter()
            .map(|&w| {
                let layer = DenseLayer {
                    weight: he_uniform_init(fan_in, w, rng),
                    bias: Tensor::zeros(vec![w]),
                    activation: Activation::Relu,
                };
                fan_in = w;
                layer
            })
            .collect();
        HiddenUnit { layers }
    }

    pub fn in_width(&self) -> usize {
        self.layers[0].in_width()
    }

    pub fn group_width(&self) -> usize {
        self.layers.last().expect("nonempty unit").out_width()
    }

    pub fn forward_batch(&self, input: &Tensor) -> Result<UnitBatchTrace> {
        if input.shape().len() != 2 || input.cols() != self.in_width() {
            return Err(Error::Shape {
                op: "unit forward",
                left: input.shape().to_vec(),
                right: vec![self.in_width()],
            });
        }
        let normalized = l2_normalize_rows(input, NORMALIZE_EPS);
        let mut activations: Vec<Tensor> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let x = activations.last().unwrap_or(&normalized);
            let y = layer.forward(x)?;
            y.check_finite(&format!("layer {l} activations (numerical overflow)"))?;
            activations.push(y);
        }
        let group = activations.last().expect("nonempty unit");
        let goodness = (0..group.rows())
            .map(|i| mean_square(group.row(i)))
            .collect::<Result<Vec<_>>>()?;
        if let Some(i) = goodness.iter().position(|g| !g.is_finite()) {
            return Err(Error::non_finite(format!(
                "goodness of sample {i} (numerical overflow)"
            )));
        }
        Ok(UnitBatchTrace {
            normalized,
            activations,
            goodness,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }
}
