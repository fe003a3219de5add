use rand::Rng;

use crate::error::{Error, Result};

use super::{he_uniform_init, Tensor};

/// 2D cross-correlation over a single `channels x height x width` input.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2DLayer {
    /// `out_channels x in_channels x kh x kw`
    pub kernels: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2DGrads {
    pub kernels: Tensor,
    pub bias: Tensor,
    pub input: Tensor,
}

impl Conv2DLayer {
    pub fn new(kernels: Tensor, bias: Tensor, stride: usize, padding: usize) -> Result<Self> {
        if kernels.shape().len() != 4 || bias.shape() != [kernels.shape()[0]] || stride == 0 {
            return Err(Error::Shape {
                op: "Conv2DLayer::new",
                left: kernels.shape().to_vec(),
                right: bias.shape().to_vec(),
            });
        }
        Ok(Conv2DLayer {
            kernels,
            bias,
            stride,
            padding,
        })
    }

    /// He-uniform kernels with fan-in `in_channels * kh * kw`, zero bias.
    pub fn init<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let fan_in = in_channels * kernel.0 * kernel.1;
        let k = he_uniform_init(fan_in, out_channels, rng)
            .reshape(vec![out_channels, in_channels, kernel.0, kernel.1])?;
        Conv2DLayer::new(k, Tensor::zeros(vec![out_channels]), stride, padding)
    }

    fn dims(&self) -> (usize, usize, usize, usize) {
        let s = self.kernels.shape();
        (s[0], s[1], s[2], s[3])
    }

    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        let (_, _, kh, kw) = self.dims();
        let span = |n: usize, k: usize| -> Option<usize> {
            let padded = n + 2 * self.padding;
            (padded >= k).then(|| (padded - k) / self.stride + 1)
        };
        match (span(height, kh), span(width, kw)) {
            (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok((oh, ow)),
            _ => Err(Error::Shape {
                op: "conv2d output dims",
                left: vec![height, width],
                right: vec![kh, kw],
            }),
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize, usize, usize)> {
        let (_, cin, _, _) = self.dims();
        if x.shape().len() != 3 || x.shape()[0] != cin {
            return Err(Error::Shape {
                op: "conv2d input",
                left: x.shape().to_vec(),
                right: self.kernels.shape().to_vec(),
            });
        }
        let (h, w) = (x.shape()[1], x.shape()[2]);
        let (oh, ow) = self.output_dims(h, w)?;
        Ok((h, w, oh, ow))
    }

    /// Input coordinate for output position `o` and kernel tap `k`, if inside.
    fn source(&self, o: usize, k: usize, extent: usize) -> Option<usize> {
        (o * self.stride + k)
            .checked_sub(self.padding)
            .filter(|&i| i < extent)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (h, w, oh, ow) = self.check_input(x)?;
        let (cout, cin, kh, kw) = self.dims();
        let (k, xd) = (self.kernels.data(), x.data());
        let mut out = vec![0.0; cout * oh * ow];
        for o in 0..cout {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = self.bias.data()[o];
                    for c in 0..cin {
                        for ki in 0..kh {
                            let Some(iy) = self.source(y, ki, h) else { continue };
                            for kj in 0..kw {
                                let Some(ix) = self.source(xo, kj, w) else { continue };
                                acc += k[((o * cin + c) * kh + ki) * kw + kj]
                                    * xd[(c * h + iy) * w + ix];
                            }
                        }
                    }
                    out[(o * oh + y) * ow + xo] = acc;
                }
            }
        }
        Tensor::new(vec![cout, oh, ow], out)
    }

    pub fn backward(&self, x: &Tensor, grad_output: &Tensor) -> Result<Conv2DGrads> {
        let (h, w, oh, ow) = self.check_input(x)?;
        let (cout, cin, kh, kw) = self.dims();
        if grad_output.shape() != [cout, oh, ow] {
            return Err(Error::Shape {
                op: "conv2d backward",
                left: grad_output.shape().to_vec(),
                right: vec![cout, oh, ow],
            });
        }
        let (k, xd, gd) = (self.kernels.data(), x.data(), grad_output.data());
        let mut dk = vec![0.0; k.len()];
        let mut db = vec![0.0; cout];
        let mut dx = vec![0.0; xd.len()];
        for o in 0..cout {
            for y in 0..oh {
                for xo in 0..ow {
                    let g = gd[(o * oh + y) * ow + xo];
                    db[o] += g;
                    for c in 0..cin {
                        for ki in 0..kh {
                            let Some(iy) = self.source(y, ki, h) else { continue };
                            for kj in 0..kw {
                                let Some(ix) = self.source(xo, kj, w) else { continue };
                                let kidx = ((o * cin + c) * kh + ki) * kw + kj;
                                let xidx = (c * h + iy) * w + ix;
                                dk[kidx] += g * xd[xidx];
                                dx[xidx] += g * k[kidx];
                            }
                        }
                    }
                }
            }
        }
        Ok(Conv2DGrads {
            kernels: Tensor::new(self.kernels.shape().to_vec(), dk)?,
            bias: Tensor::new(vec![cout], db)?,
            input: Tensor::new(x.shape().to_vec(), dx)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, max_relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_by_one_identity() {
        let layer = Conv2DLayer::new(
            Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap(),
            Tensor::zeros(vec![1]),
            1,
            0,
        )
        .unwrap();
        let x = Tensor::new(vec![1, 3, 2], vec![1.0, -2.0, 3.0, 4.5, 0.0, 6.0]).unwrap();
        assert_eq!(layer.forward(&x).unwrap(), x);
    }

    #[test]
    fn ones_kernel_sums_windows() {
        let layer = Conv2DLayer::new(
            Tensor::new(vec![1, 1, 3, 3], vec![1.0; 9]).unwrap(),
            Tensor::zeros(vec![1]),
            1,
            0,
        )
        .unwrap();
        let x = Tensor::new(vec![1, 4, 4], (1..=16).map(f64::from).collect()).unwrap();
        assert_eq!(layer.forward(&x).unwrap().data(), &[54.0, 63.0, 90.0, 99.0]);
    }

    #[test]
    fn output_dims_formula() {
        let layer = Conv2DLayer::init(1, 1, (3, 3), 2, 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        // floor((5 + 2 - 3) / 2) + 1 = 3
        assert_eq!(layer.output_dims(5, 5).unwrap(), (3, 3));
        assert!(layer.output_dims(0, 0).is_err());
        let big = Conv2DLayer::init(1, 1, (5, 5), 1, 0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(big.output_dims(3, 3).is_err());
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let layer = Conv2DLayer::init(2, 1, (2, 2), 1, 0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(layer.forward(&Tensor::zeros(vec![3, 4, 4])).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..10 {
            let (stride, padding) = (1 + trial % 2, trial % 2);
            let mut layer = Conv2DLayer::init(2, 3, (3, 2), stride, padding, &mut rng).unwrap();
            layer.bias = crate::numerics::he_uniform_init(1, 3, &mut rng).reshape(vec![3]).unwrap();
            let x = crate::numerics::he_uniform_init(1, 2 * 5 * 4, &mut rng)
                .reshape(vec![2, 5, 4])
                .unwrap();
            // smooth scalar head: half the sum of squares
            let head = |y: &Tensor| 0.5 * y.data().iter().map(|v| v * v).sum::<f64>();
            let y = layer.forward(&x).unwrap();
            let grads = layer.backward(&x, &y).unwrap();

            let nk = finite_diff_grad(|p| {
                let mut l = layer.clone();
                l.kernels.data_mut().copy_from_slice(p);
                head(&l.forward(&x).unwrap())
            }, &layer.kernels, 1e-4).unwrap();
            let nb = finite_diff_grad(|p| {
                let mut l = layer.clone();
                l.bias.data_mut().copy_from_slice(p);
                head(&l.forward(&x).unwrap())
            }, &layer.bias, 1e-4).unwrap();
            let nx = finite_diff_grad(|p| {
                let xx = Tensor::new(x.shape().to_vec(), p.to_vec()).unwrap();
                head(&layer.forward(&xx).unwrap())
            }, &x, 1e-4).unwrap();
            assert!(max_relative_error(&grads.kernels, &nk) < 1e-4);
            assert!(max_relative_error(&grads.bias, &nb) < 1e-4);
            assert!(max_relative_error(&grads.input, &nx) < 1e-4);
        }
    }
}
