use crate::error::{Error, Result};

use super::Tensor;

/// Denominator floor for [`relative_error`]; below it the comparison is
/// effectively absolute. Central differences at h=1e-4 on O(1) losses carry
/// roughly 1e-12 of rounding noise, well under this floor times 1e-4.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// Central-difference gradient of `f` at `params`, one coordinate at a time.
pub fn finite_diff_grad<F>(mut f: F, params: &Tensor, h: f64) -> Result<Tensor>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut point = params.data().to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let orig = point[i];
        point[i] = orig + h;
        let plus = f(&point);
        point[i] = orig - h;
        let minus = f(&point);
        point[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::non_finite(format!(
                "finite difference at parameter {i}: f(+h)={plus}, f(-h)={minus}"
            )));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Tensor::new(params.shape().to_vec(), grad)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Worst elementwise [`relative_error`]; shapes must match.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape(), "gradient shapes differ");
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let p = Tensor::vector(vec![3.0]).unwrap();
        let g = finite_diff_grad(|w| w[0] * w[0], &p, 1e-4).unwrap();
        assert!((g.data()[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let p = Tensor::vector(vec![1.0, -2.0, 0.5]).unwrap();
        let g = finite_diff_grad(|_| 4.2, &p, 1e-4).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_finite_is_reported() {
        let p = Tensor::vector(vec![0.0]).unwrap();
        let err = finite_diff_grad(|w| 1.0 / w[0].abs().min(0.0), &p, 1e-4).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }
}
