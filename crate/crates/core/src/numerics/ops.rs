use crate::error::{Error, Result};

use super::Tensor;

/// Guard against dividing by the norm of an all-zero input.
pub const NORMALIZE_EPS: f64 = 1e-8;

/// ReLU output together with the mask used by the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluOutput {
    pub value: Vec<f64>,
    /// `x > 0` per element. The derivative at exactly zero is taken as 0.
    pub mask: Vec<bool>,
}

pub fn relu(x: &[f64]) -> ReluOutput {
    let mask: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
    let value = x
        .iter()
        .zip(&mask)
        .map(|(&v, &m)| if m { v } else { 0.0 })
        .collect();
    ReluOutput { value, mask }
}

pub fn relu_backward(mask: &[bool], upstream: &[f64]) -> Result<Vec<f64>> {
    if mask.len() != upstream.len() {
        return Err(Error::Shape {
            op: "relu_backward",
            left: vec![mask.len()],
            right: vec![upstream.len()],
        });
    }
    Ok(mask
        .iter()
        .zip(upstream)
        .map(|(&m, &g)| if m { g } else { 0.0 })
        .collect())
}

/// `v / max(|v|, eps)`.
pub fn l2_normalize(v: &[f64], eps: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    normalize_in_place(&mut out, eps);
    out
}

pub(crate) fn normalize_in_place(v: &mut [f64], eps: f64) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = norm.max(eps);
    v.iter_mut().for_each(|x| *x /= denom);
}

/// Normalizes every row of a matrix independently.
pub fn l2_normalize_rows(x: &Tensor, eps: f64) -> Tensor {
    let mut out = x.clone();
    let cols = out.cols();
    if cols > 0 {
        out.data_mut()
            .chunks_mut(cols)
            .for_each(|row| normalize_in_place(row, eps));
    }
    out
}

/// `(sum v_i^2) / len(v)`.
pub fn mean_square(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Domain("mean_square of an empty vector".into()));
    }
    Ok(v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64)
}
