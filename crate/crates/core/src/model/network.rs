use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{he_uniform_init, Activation, DenseLayer, Tensor};
use crate::seeds::{derive_seed, SeedStream};

use super::{ArchSpec, HiddenUnit, UnitBatchTrace};

/// Goodness threshold used throughout training and in `p_positive`.
pub const DEFAULT_THETA: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct IntFFModel {
    pub arch: ArchSpec,
    pub theta: f64,
    pub seed: u64,
    pub units: Vec<HiddenUnit>,
    /// Linear softmax head for the backprop baseline.
    pub bp_head: Option<DenseLayer>,
}

/// Single-sample activations of one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitTrace {
    pub normalized_input: Vec<f64>,
    pub interior: Vec<Vec<f64>>,
    pub group: Vec<f64>,
    pub goodness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub units: Vec<UnitTrace>,
}

impl ForwardTrace {
    pub fn goodness(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.goodness).collect()
    }
}

/// Batch activations of every unit.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchTrace {
    pub units: Vec<UnitBatchTrace>,
}

impl BatchTrace {
    /// Sum of unit goodness values for sample `i`.
    pub fn goodness_total(&self, i: usize) -> f64 {
        self.units.iter().map(|u| u.goodness[i]).sum()
    }
}

/// Sum of the per-unit goodness values; interior activations do not enter.
pub fn goodness_total(trace: &ForwardTrace) -> f64 {
    trace.units.iter().map(|u| u.goodness).sum()
}

/// `sigma(goodness - theta)`.
pub fn p_positive(goodness: f64, theta: f64) -> f64 {
    1.0 / (1.0 + (theta - goodness).exp())
}

impl IntFFModel {
    /// Builds a model with He-uniform weights and zero biases. The initial
    /// parameters depend only on `arch` and `seed`.
    pub fn build(arch: ArchSpec, theta: f64, seed: u64) -> Result<Self> {
        arch.validate(usize::MAX)?;
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Domain(format!("theta must be positive, got {theta}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SeedStream::Init));
        let units = arch
            .units
            .iter()
            .enumerate()
            .map(|(k, spec)| HiddenUnit::init(arch.unit_input_width(k), spec, &mut rng))
            .collect();
        let bp_head = arch.bp_head_width.map(|classes| {
            let fan_in = arch.units.last().expect("validated").group_width();
            DenseLayer {
                weight: he_uniform_init(fan_in, classes, &mut rng),
                bias: Tensor::zeros(vec![classes]),
                activation: Activation::Identity,
            }
        });
        Ok(IntFFModel {
            arch,
            theta,
            seed,
            units,
            bp_head,
        })
    }

    pub fn input_width(&self) -> usize {
        self.arch.input_width
    }

    /// Runs every unit over a batch `n x input_width`. Each unit receives the
    /// previous unit's raw selected-group activations and normalizes them.
    pub fn forward_batch(&self, x: &Tensor) -> Result<BatchTrace> {
        let mut units: Vec<UnitBatchTrace> = Vec::with_capacity(self.units.len());
        for (k, unit) in self.units.iter().enumerate() {
            let input = units.last().map_or(x, |t| t.group());
            let trace = unit.forward_batch(input).map_err(|e| match e {
                Error::NonFinite { context } => Error::non_finite(format!("unit {k} {context}")),
                other => other,
            })?;
            units.push(trace);
        }
        Ok(BatchTrace { units })
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        if x.len() != self.input_width() {
            return Err(Error::Shape {
                op: "model forward",
                left: vec![x.len()],
                right: vec![self.input_width()],
            });
        }
        let batch = self.forward_batch(&Tensor::new(vec![1, x.len()], x.to_vec())?)?;
        let units = batch
            .units
            .into_iter()
            .map(|u| {
                let depth = u.activations.len();
                let mut acts: Vec<Vec<f64>> =
                    u.activations.into_iter().map(Tensor::into_data).collect();
                let group = acts.pop().expect("nonempty");
                debug_assert_eq!(acts.len(), depth - 1);
                UnitTrace {
                    normalized_input: u.normalized.into_data(),
                    interior: acts,
                    group,
                    goodness: u.goodness[0],
                }
            })
            .collect();
        Ok(ForwardTrace { units })
    }

    pub fn parameter_count(&self) -> usize {
        self.units.iter().map(HiddenUnit::parameter_count).sum::<usize>()
            + self
                .bp_head
                .as_ref()
                .map_or(0, |h| h.weight.len() + h.bias.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_arch;
    use crate::numerics::mean_square;

    fn zero_model(arch: &str) -> IntFFModel {
        let mut m = IntFFModel::build(parse_arch(arch).unwrap(), DEFAULT_THETA, 0).unwrap();
        for u in &mut m.units {
            for l in &mut u.layers {
                l.weight.data_mut().fill(0.0);
            }
        }
        m
    }

    fn hand_model(weights: &[[f64; 4]]) -> IntFFModel {
        let mut m = zero_model("2,2,2");
        for (unit, w) in m.units.iter_mut().zip(weights) {
            unit.layers[0].weight.data_mut().copy_from_slice(w);
        }
        m
    }

    #[test]
    fn build_is_deterministic_and_structural() {
        let arch = parse_arch("784,(100,50),(30,10)").unwrap();
        let a = IntFFModel::build(arch.clone(), 1.5, 42).unwrap();
        let b = IntFFModel::build(arch.clone(), 1.5, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.units.len(), arch.units.len());
        let shapes: Vec<Vec<(usize, usize)>> = a
            .units
            .iter()
            .map(|u| u.layers.iter().map(|l| (l.in_width(), l.out_width())).collect())
            .collect();
        assert_eq!(shapes, vec![vec![(784, 100), (100, 50)], vec![(50, 30), (30, 10)]]);
        assert_ne!(a, IntFFModel::build(arch, 1.5, 43).unwrap());
    }

    #[test]
    fn rejects_non_positive_theta() {
        let arch = parse_arch("4,2").unwrap();
        assert!(IntFFModel::build(arch.clone(), 0.0, 0).is_err());
        assert!(IntFFModel::build(arch, -1.0, 0).is_err());
    }

    #[test]
    fn zero_input_gives_zero_goodness() {
        let m = IntFFModel::build(parse_arch("6,(4,3),2").unwrap(), 1.5, 1).unwrap();
        let t = m.forward(&[0.0; 6]).unwrap();
        assert_eq!(t.units[0].group, vec![0.0; 3]);
        assert_eq!(goodness_total(&t), 0.0);
    }

    #[test]
    fn zero_weight_model_has_zero_goodness() {
        let m = zero_model("5,(4,3),(3,2)");
        let t = m.forward(&[0.3, -1.0, 2.0, 0.5, 1.0]).unwrap();
        assert!(t.goodness().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn identity_unit_normalizes_then_passes_through() {
        let m = hand_model(&[[1.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 1.0]]);
        let t = m.forward(&[3.0, 4.0]).unwrap();
        assert!((t.units[0].group[0] - 0.6).abs() < 1e-15);
        assert!((t.units[0].group[1] - 0.8).abs() < 1e-15);
        // scale invariance
        assert_eq!(m.forward(&[30.0, 40.0]).unwrap(), t);
    }

    #[test]
    fn two_singleton_units_by_hand() {
        // unit 0: W = [[1, 1], [2, -1]] on [0.6, 0.8] -> relu([1.4, 0.4]) = [1.4, 0.4]
        //   goodness = (1.96 + 0.16) / 2 = 1.06
        // unit 1: normalize [1.4, 0.4] (norm sqrt(2.12)); W = [[1, 0], [-1, 2]]
        //   -> [1.4, -1.4 + 0.8] / sqrt(2.12) -> relu -> [1.4 / sqrt(2.12), 0]
        //   goodness = (1.96 / 2.12) / 2
        let m = hand_model(&[[1.0, 1.0, 2.0, -1.0], [1.0, 0.0, -1.0, 2.0]]);
        let t = m.forward(&[3.0, 4.0]).unwrap();
        assert!((t.units[0].goodness - 1.06).abs() < 1e-14);
        assert!((t.units[1].goodness - 1.96 / 2.12 / 2.0).abs() < 1e-14);
        assert!((goodness_total(&t) - (1.06 + 1.96 / 4.24)).abs() < 1e-14);
    }

    #[test]
    fn trace_goodness_matches_group_mean_square() {
        let m = IntFFModel::build(parse_arch("12,(8,6),(5,4),3").unwrap(), 1.5, 9).unwrap();
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let t = m.forward(&x).unwrap();
        for u in &t.units {
            assert!((mean_square(&u.group).unwrap() - u.goodness).abs() <= 1e-12);
        }
        assert_eq!(t.units[0].interior.len(), 1);
        assert_eq!(t.units[2].interior.len(), 0);
    }

    #[test]
    fn goodness_total_ignores_interior() {
        let m = IntFFModel::build(parse_arch("12,(8,6),(5,4)").unwrap(), 1.5, 2).unwrap();
        let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let mut t = m.forward(&x).unwrap();
        let before = goodness_total(&t);
        for u in &mut t.units {
            u.interior.iter_mut().for_each(|a| a.fill(0.0));
        }
        assert_eq!(goodness_total(&t), before);
        let sum: f64 = [2.5, 1.5].iter().sum();
        assert_eq!(sum, 4.0);
    }

    #[test]
    fn input_width_mismatch() {
        let m = zero_model("5,3");
        assert!(matches!(m.forward(&[1.0; 4]), Err(Error::Shape { .. })));
    }

    #[test]
    fn overflow_is_reported() {
        let mut m = zero_model("2,2,2");
        m.units[0].layers[0].weight.data_mut().fill(1e300);
        m.units[0].layers[0].bias.data_mut().fill(1e300);
        m.units[1].layers[0].weight.data_mut().fill(1.0);
        // unit 0 group ~ 2e300 is finite, but its mean square overflows
        let err = m.forward(&[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    }

    #[test]
    fn p_positive_values() {
        assert_eq!(p_positive(1.5, 1.5), 0.5);
        assert!((p_positive(0.0, 1.5) - 0.182_425_523_806_356_2).abs() < 1e-12);
        assert!(p_positive(2.0, 1.5) > p_positive(1.9, 1.5));
    }

    #[test]
    fn singleton_units_match_plain_layer_stack() {
        let m = IntFFModel::build(parse_arch("10,7,5,3").unwrap(), 1.5, 4).unwrap();
        let x: Vec<f64> = (0..10).map(|i| (i as f64).cos()).collect();
        let t = m.forward(&x).unwrap();
        let mut h = x.clone();
        for (u, tu) in m.units.iter().zip(&t.units) {
            let n = crate::numerics::l2_normalize(&h, crate::numerics::NORMALIZE_EPS);
            h = u.layers[0].forward_vec(&n).unwrap();
            assert_eq!(h, tu.group);
        }
    }
}
