/// `ln(1 + e^x)` via `max(x, 0) + ln(1 + e^-|x|)`, finite for any finite `x`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Local loss of one positive/negative goodness pair:
/// `softplus(theta - g_pos) + softplus(g_neg - theta)`.
pub fn unit_loss(g_pos: f64, g_neg: f64, theta: f64) -> f64 {
    softplus(theta - g_pos) + softplus(g_neg - theta)
}

/// `(dL/dg_pos, dL/dg_neg)` of [`unit_loss`].
pub fn unit_loss_partials(g_pos: f64, g_neg: f64, theta: f64) -> (f64, f64) {
    (-sigmoid(theta - g_pos), sigmoid(g_neg - theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, Tensor};

    #[test]
    fn balanced_pair_is_two_ln_two() {
        assert!((unit_loss(1.5, 1.5, 1.5) - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!((unit_loss(1.5, 1.5, 1.5) - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn approaches_floor() {
        let theta = 1.5;
        let floor = softplus(-theta);
        let far = unit_loss(1e6, 0.0, theta);
        assert!((far - floor).abs() < 1e-12);
        assert!(unit_loss(10.0, 0.0, theta) > far);
    }

    #[test]
    fn overflow_safe() {
        assert_eq!(softplus(1e308), 1e308);
        assert_eq!(softplus(-1e308), 0.0);
        assert!(unit_loss(-1e300, 1e300, 1.5).is_finite());
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }

    #[test]
    fn partials_match_finite_differences() {
        for &(gp, gn) in &[(0.0, 0.0), (1.2, 2.5), (3.0, 0.4), (1.5, 1.5), (7.0, -2.0)] {
            let (dp, dn) = unit_loss_partials(gp, gn, 1.5);
            let p = Tensor::vector(vec![gp, gn]).unwrap();
            let num = finite_diff_grad(|v| unit_loss(v[0], v[1], 1.5), &p, 1e-4).unwrap();
            assert!((dp - num.data()[0]).abs() < 1e-6);
            assert!((dn - num.data()[1]).abs() < 1e-6);
            assert!((dp + sigmoid(1.5 - gp)).abs() < 1e-15);
        }
    }

    #[test]
    fn monotone_on_grid() {
        let theta = 1.5;
        let grid: Vec<f64> = (0..41).map(|i| i as f64 * 0.25 - 2.0).collect();
        for &gn in &grid {
            for w in grid.windows(2) {
                assert!(unit_loss(w[1], gn, theta) <= unit_loss(w[0], gn, theta));
                assert!(unit_loss(gn, w[1], theta) >= unit_loss(gn, w[0], theta));
            }
        }
    }
}
