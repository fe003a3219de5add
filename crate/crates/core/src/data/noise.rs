//! Four-type training-set corruption: clean, Gaussian overlay, pixel dropout,
//! and pure Gaussian noise with a random label.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;

use super::{LabeledImage, TrainingSet, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionKind {
    Clean,
    GaussianOverlay,
    PixelDropout,
    PureNoise,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 4] = [
        CorruptionKind::Clean,
        CorruptionKind::GaussianOverlay,
        CorruptionKind::PixelDropout,
        CorruptionKind::PureNoise,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseProfile {
    /// Fractions of the set assigned to each kind, in [`CorruptionKind::ALL`] order.
    pub fractions: [f64; 4],
    pub gaussian_sigma: f64,
    pub dropout_max_fraction: f64,
    pub pure_noise_mean: f64,
    pub pure_noise_sigma: f64,
    /// Corruption seed. When absent the trainer derives one from its master seed.
    pub seed: Option<u64>,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        NoiseProfile {
            fractions: [0.25; 4],
            gaussian_sigma: 0.3,
            dropout_max_fraction: 0.5,
            pure_noise_mean: 0.5,
            pure_noise_sigma: 0.5,
            seed: None,
        }
    }
}

impl NoiseProfile {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config(format!(
                "noise fractions must lie in [0, 1], got {:?}",
                self.fractions
            )));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("noise fractions sum to {sum}, expected 1")));
        }
        for (name, v) in [
            ("gaussian_sigma", self.gaussian_sigma),
            ("pure_noise_sigma", self.pure_noise_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.dropout_max_fraction) {
            return Err(Error::Config(format!(
                "dropout_max_fraction must lie in [0, 1], got {}",
                self.dropout_max_fraction
            )));
        }
        if !self.pure_noise_mean.is_finite() {
            return Err(Error::Config("pure_noise_mean must be finite".into()));
        }
        Ok(())
    }

    /// Per-kind counts for `n` images using largest-remainder rounding.
    /// Ties in the remainder go to the earlier kind.
    pub fn counts(&self, n: usize) -> [usize; 4] {
        let exact: Vec<f64> = self.fractions.iter().map(|f| f * n as f64).collect();
        let mut counts = [0usize; 4];
        for (c, e) in counts.iter_mut().zip(&exact) {
            *c = e.floor() as usize;
        }
        let mut left = n - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for k in order {
            if left == 0 {
                break;
            }
            counts[k] += 1;
            left -= 1;
        }
        counts
    }
}

/// A corrupted training set together with the kind applied to each image.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedSet {
    pub set: TrainingSet,
    pub kinds: Vec<CorruptionKind>,
}

/// Assigns each image a corruption kind by a seeded shuffle followed by a
/// contiguous split, then corrupts every image with its own RNG stream so the
/// result does not depend on thread count.
pub fn corrupt_dataset(set: &TrainingSet, profile: &NoiseProfile) -> Result<CorruptedSet> {
    profile.validate()?;
    let seed = profile.seed.unwrap_or(0);
    let n = set.len();
    let counts = profile.counts(n);

    let mut order: Vec<usize> = (0..n).collect();
    let mut assign_rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut assign_rng);
    let mut kinds = vec![CorruptionKind::Clean; n];
    let mut start = 0;
    for (kind, &count) in CorruptionKind::ALL.iter().zip(&counts) {
        for &i in &order[start..start + count] {
            kinds[i] = *kind;
        }
        start += count;
    }

    let overlay = Normal::new(0.0, profile.gaussian_sigma)
        .map_err(|e| Error::Config(format!("gaussian_sigma: {e}")))?;
    let pure = Normal::new(profile.pure_noise_mean, profile.pure_noise_sigma)
        .map_err(|e| Error::Config(format!("pure_noise_sigma: {e}")))?;

    let images = parallel::map_range(n, |i| {
        let src = &set.images()[i];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        match kinds[i] {
            CorruptionKind::Clean => src.clone(),
            CorruptionKind::GaussianOverlay => LabeledImage {
                pixels: src
                    .pixels
                    .iter()
                    .map(|&p| (p + overlay.sample(&mut rng)).clamp(0.0, 1.0))
                    .collect(),
                label: src.label,
            },
            CorruptionKind::PixelDropout => {
                let len = src.pixels.len();
                let max_k = (profile.dropout_max_fraction * len as f64).floor() as usize;
                let k = rng.random_range(0..=max_k);
                let mut pixels = src.pixels.clone();
                for j in index::sample(&mut rng, len, k) {
                    pixels[j] = 0.0;
                }
                LabeledImage { pixels, label: src.label }
            }
            CorruptionKind::PureNoise => LabeledImage {
                pixels: (0..src.pixels.len())
                    .map(|_| pure.sample(&mut rng).clamp(0.0, 1.0))
                    .collect(),
                label: rng.random_range(0..NUM_CLASSES as u8),
            },
        }
    });
    Ok(CorruptedSet {
        set: TrainingSet::new(images),
        kinds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 99% quantile of the chi-square distribution with 9 degrees of freedom.
    const CHI2_99_DOF9: f64 = 21.666;

    fn synthetic(n: usize) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        TrainingSet::new(
            (0..n)
                .map(|i| LabeledImage {
                    pixels: (0..784).map(|_| rng.random::<f64>()).collect(),
                    label: (i % 10) as u8,
                })
                .collect(),
        )
    }

    fn seeded(seed: u64) -> NoiseProfile {
        NoiseProfile {
            seed: Some(seed),
            ..NoiseProfile::default()
        }
    }

    #[test]
    fn default_profile_gives_exact_quarters() {
        let out = corrupt_dataset(&synthetic(1000), &seeded(5)).unwrap();
        for kind in CorruptionKind::ALL {
            assert_eq!(out.kinds.iter().filter(|&&k| k == kind).count(), 250, "{kind:?}");
        }
    }

    #[test]
    fn largest_remainder_counts() {
        let p = NoiseProfile {
            fractions: [0.1, 0.2, 0.3, 0.4],
            ..NoiseProfile::default()
        };
        assert_eq!(p.counts(7), [1, 1, 2, 3]);
        assert_eq!(p.counts(7).iter().sum::<usize>(), 7);
        assert_eq!(NoiseProfile::default().counts(10), [3, 3, 2, 2]);
    }

    #[test]
    fn clean_subset_is_bitwise_identical_and_pixels_in_range() {
        let src = synthetic(400);
        let out = corrupt_dataset(&src, &seeded(11)).unwrap();
        for (i, kind) in out.kinds.iter().enumerate() {
            let (a, b) = (&src.images()[i], &out.set.images()[i]);
            assert!(b.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
            assert!(b.label < 10);
            match kind {
                CorruptionKind::Clean => assert_eq!(a, b),
                CorruptionKind::GaussianOverlay | CorruptionKind::PixelDropout => {
                    assert_eq!(a.label, b.label)
                }
                CorruptionKind::PureNoise => {}
            }
        }
    }

    #[test]
    fn dropout_only_zeroes_pixels() {
        let src = synthetic(200);
        let out = corrupt_dataset(&src, &seeded(3)).unwrap();
        for (i, kind) in out.kinds.iter().enumerate() {
            if *kind == CorruptionKind::PixelDropout {
                let (a, b) = (&src.images()[i].pixels, &out.set.images()[i].pixels);
                let zeroed = a.iter().zip(b).filter(|(x, y)| x != y).count();
                assert!(zeroed <= 392);
                assert!(a.iter().zip(b).all(|(x, y)| x == y || *y == 0.0));
            }
        }
    }

    #[test]
    fn pure_noise_labels_are_uniform() {
        let p = NoiseProfile {
            fractions: [0.0, 0.0, 0.0, 1.0],
            ..seeded(99)
        };
        let src = TrainingSet::new(
            (0..20_000)
                .map(|_| LabeledImage { pixels: vec![0.0; 16], label: 0 })
                .collect(),
        );
        let out = corrupt_dataset(&src, &p).unwrap();
        let mut counts = [0f64; 10];
        for img in out.set.images() {
            counts[img.label as usize] += 1.0;
        }
        let expected = 2000.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        assert!(chi2 < CHI2_99_DOF9, "chi2 = {chi2}");
    }

    #[test]
    fn deterministic_and_independent_of_parallelism() {
        let src = synthetic(300);
        let a = corrupt_dataset(&src, &seeded(8)).unwrap();
        parallel::force_sequential(true);
        let b = corrupt_dataset(&src, &seeded(8)).unwrap();
        parallel::force_sequential(false);
        assert_eq!(a, b);
        let c = corrupt_dataset(&src, &seeded(9)).unwrap();
        assert_ne!(a.kinds, c.kinds);
    }

    #[test]
    fn invalid_fractions_rejected() {
        let p = NoiseProfile {
            fractions: [0.5, 0.5, 0.5, 0.0],
            ..NoiseProfile::default()
        };
        assert!(corrupt_dataset(&synthetic(4), &p).is_err());
        let p = NoiseProfile {
            fractions: [1.2, -0.2, 0.0, 0.0],
            ..NoiseProfile::default()
        };
        assert!(p.validate().is_err());
    }
}
