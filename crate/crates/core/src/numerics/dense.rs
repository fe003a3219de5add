use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{gemm, MatView, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// Fully connected layer `y = act(W x + b)` with `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

/// Parameter (and optionally input) gradients of one dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Tensor,
    pub bias: Tensor,
    pub input: Option<Tensor>,
}

impl DenseLayer {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.rows()] {
            return Err(Error::Shape {
                op: "DenseLayer::new",
                left: weight.shape().to_vec(),
                right: bias.shape().to_vec(),
            });
        }
        Ok(DenseLayer {
            weight,
            bias,
            activation,
        })
    }

    pub fn zeros(in_width: usize, out_width: usize, activation: Activation) -> Self {
        DenseLayer {
            weight: Tensor::zeros(vec![out_width, in_width]),
            bias: Tensor::zeros(vec![out_width]),
            activation,
        }
    }

    pub fn in_width(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_width(&self) -> usize {
        self.weight.rows()
    }

    /// Forward pass over a batch `x` of shape `n x in_width`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape().len() != 2 || x.cols() != self.in_width() {
            return Err(Error::Shape {
                op: "dense forward",
                left: x.shape().to_vec(),
                right: self.weight.shape().to_vec(),
            });
        }
        let (n, out) = (x.rows(), self.out_width());
        let mut y = Tensor::zeros(vec![n, out]);
        gemm(
            MatView::row_major(x.data(), n, self.in_width()),
            MatView::row_major(self.weight.data(), out, self.in_width()).t(),
            y.data_mut(),
            false,
        );
        let bias = self.bias.data();
        let relu = self.activation == Activation::Relu;
        for row in y.data_mut().chunks_mut(out.max(1)) {
            for (v, b) in row.iter_mut().zip(bias) {
                *v += b;
                if relu && *v <= 0.0 {
                    *v = 0.0;
                }
            }
        }
        Ok(y)
    }

    pub fn forward_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let xt = Tensor::new(vec![1, x.len()], x.to_vec())?;
        Ok(self.forward(&xt)?.into_data())
    }

    /// Backward pass for a batch.
    ///
    /// `output` is this layer's forward output on `input` (it supplies the
    /// ReLU mask), `grad_output` is dLoss/dOutput. Parameter gradients are
    /// summed over the batch.
    pub fn backward(
        &self,
        input: &Tensor,
        output: &Tensor,
        grad_output: &Tensor,
        want_input_grad: bool,
    ) -> Result<DenseGrads> {
        let (n, inw, out) = (input.rows(), self.in_width(), self.out_width());
        if input.cols() != inw
            || output.shape() != [n, out]
            || grad_output.shape() != output.shape()
        {
            return Err(Error::Shape {
                op: "dense backward",
                left: output.shape().to_vec(),
                right: grad_output.shape().to_vec(),
            });
        }
        let mut dz = grad_output.clone();
        if self.activation == Activation::Relu {
            for (g, &y) in dz.data_mut().iter_mut().zip(output.data()) {
                if y <= 0.0 {
                    *g = 0.0;
                }
            }
        }

        let mut weight = Tensor::zeros(vec![out, inw]);
        gemm(
            MatView::row_major(dz.data(), n, out).t(),
            MatView::row_major(input.data(), n, inw),
            weight.data_mut(),
            false,
        );

        let mut bias = vec![0.0; out];
        for row in dz.data().chunks(out.max(1)) {
            for (b, g) in bias.iter_mut().zip(row) {
                *b += g;
            }
        }

        let input_grad = if want_input_grad {
            let mut dx = Tensor::zeros(vec![n, inw]);
            gemm(
                MatView::row_major(dz.data(), n, out),
                MatView::row_major(self.weight.data(), out, inw),
                dx.data_mut(),
                false,
            );
            Some(dx)
        } else {
            None
        };

        Ok(DenseGrads {
            weight,
            bias: Tensor::new(vec![out], bias)?,
            input: input_grad,
        })
    }
}
