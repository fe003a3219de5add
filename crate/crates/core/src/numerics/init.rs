use rand::distr::{Distribution, Uniform};
use rand::Rng;

use super::Tensor;

/// He-uniform weights, `fan_out x fan_in`, drawn from `[-sqrt(6/fan_in), sqrt(6/fan_in)]`.
pub fn he_uniform_init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    assert!(fan_in >= 1 && fan_out >= 1, "he_uniform_init needs positive fans");
    let limit = (6.0 / fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite positive limit");
    let data = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
    Tensor::matrix(fan_out, fan_in, data).expect("uniform samples are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn within_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = he_uniform_init(24, 7, &mut rng);
        assert_eq!(w.shape(), &[7, 24]);
        let limit = (6.0f64 / 24.0).sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= limit));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = he_uniform_init(10, 10, &mut ChaCha8Rng::seed_from_u64(5));
        let b = he_uniform_init(10, 10, &mut ChaCha8Rng::seed_from_u64(5));
        let c = he_uniform_init(10, 10, &mut ChaCha8Rng::seed_from_u64(6));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sample_mean_near_zero() {
        // U(-a, a) has sigma = a / sqrt(3); the mean of N draws has sigma / sqrt(N)
        let fan_in = 50;
        let w = he_uniform_init(fan_in, 200, &mut ChaCha8Rng::seed_from_u64(9));
        let n = w.len() as f64;
        assert_eq!(n, 1e4);
        let mean = w.data().iter().sum::<f64>() / n;
        let a = (6.0 / fan_in as f64).sqrt();
        let sigma_mean = a / 3f64.sqrt() / n.sqrt();
        assert!(mean.abs() < 3.0 * sigma_mean, "mean {mean}");
    }
}
