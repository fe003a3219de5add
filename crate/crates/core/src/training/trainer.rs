//! The full training loop shared by IntFF, FF, and the BP baseline.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{
    corrupt_dataset, make_batches, overlay_into, sample_negative_label, LabeledImage, Overlay,
    TrainingSet, NUM_CLASSES,
};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::model::{parse_arch, IntFFModel};
use crate::numerics::Tensor;
use crate::seeds::{derive_seed, SeedStream};

use super::{
    train_bp_step, train_step_intff, AdamConfig, Algorithm, EarlyStopController,
    EarlyStopDecision, MetricsLog, MetricsRow, OptimizerState, TrainConfig,
};

/// What one finished epoch looked like.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    /// Sample-weighted mean loss per unit (a single entry for BP).
    pub unit_losses: Vec<f64>,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: IntFFModel,
    pub log: MetricsLog,
    pub epochs_run: usize,
    /// Epoch whose parameters were kept when early stopping is enabled.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

pub fn train(config: &TrainConfig, data: &TrainingSet) -> Result<TrainOutcome> {
    train_with_progress(config, data, |_| {})
}

/// Builds the model described by `config`, checking the algorithm's
/// architectural requirements.
pub fn build_model(config: &TrainConfig) -> Result<IntFFModel> {
    let mut arch = parse_arch(&config.arch)?;
    match config.algorithm {
        Algorithm::IntFF => {}
        Algorithm::FF => {
            if !arch.all_singleton() {
                return Err(Error::Config(format!(
                    "algorithm ff needs single-layer units, got arch {}",
                    config.arch
                )));
            }
        }
        Algorithm::BP => arch = arch.with_bp_head(NUM_CLASSES)?,
    }
    IntFFModel::build(arch, config.theta, config.seed)
}

fn at_batch(epoch: usize, batch: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { context } => Error::NonFinite {
            context: format!("epoch {epoch} batch {batch}: {context}"),
        },
        other => other,
    }
}

/// Splits off a seeded validation share.
fn split(images: Vec<LabeledImage>, fraction: f64, seed: u64) -> (Vec<LabeledImage>, Vec<LabeledImage>) {
    let n_val = (images.len() as f64 * fraction).round() as usize;
    if n_val == 0 {
        return (images, Vec::new());
    }
    let mut order: Vec<usize> = (0..images.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut slots: Vec<Option<LabeledImage>> = images.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<LabeledImage> {
        idx.iter().map(|&i| slots[i].take().expect("each index once")).collect()
    };
    let val = take(&order[..n_val]);
    let train = take(&order[n_val..]);
    (train, val)
}

/// Runs the training loop, calling `progress` after every epoch.
///
/// Order of operations: optional corruption of the whole training split,
/// validation split, then epochs of shuffled batches. IntFF and FF batches
/// pair each image's true-label overlay with a wrong-label overlay; BP batches
/// feed raw pixels with their labels.
pub fn train_with_progress(
    config: &TrainConfig,
    data: &TrainingSet,
    mut progress: impl FnMut(&EpochSummary),
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut model = build_model(config)?;
    if data.is_empty() {
        return Err(Error::Domain("training set is empty".into()));
    }
    let width = model.input_width();
    if let Some(bad) = data.images().iter().find(|i| i.pixels.len() != width) {
        return Err(Error::Shape {
            op: "train",
            left: vec![bad.pixels.len()],
            right: vec![width],
        });
    }

    let images = match &config.noise_profile {
        Some(profile) => {
            let mut profile = profile.clone();
            profile.seed.get_or_insert(derive_seed(config.seed, SeedStream::Noise));
            corrupt_dataset(data, &profile)?.set.into_images()
        }
        None => data.images().to_vec(),
    };
    let (train_set, val_set) = split(
        images,
        config.validation_fraction,
        derive_seed(config.seed, SeedStream::Split),
    );
    if train_set.is_empty() {
        return Err(Error::Domain("no training images left after the validation split".into()));
    }

    let adam = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    let mut opt = OptimizerState::new(&model, adam);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, SeedStream::Shuffle));
    let mut neg_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, SeedStream::Negatives));
    let mut stopper = config
        .early_stopping
        .as_ref()
        .filter(|_| !val_set.is_empty())
        .map(|es| EarlyStopController::<IntFFModel>::new(es.patience, es.min_delta));

    let loss_slots = match config.algorithm {
        Algorithm::BP => 1,
        _ => model.units.len(),
    };
    let mut log = MetricsLog::default();
    let mut epochs_run = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.epochs {
        let mut sums = vec![0.0; loss_slots];
        let batches = make_batches(train_set.len(), config.batch_size, &mut shuffle_rng)?;
        for (b, batch) in batches.iter().enumerate() {
            let rows = batch.len();
            let losses = match config.algorithm {
                Algorithm::BP => {
                    let mut x = Tensor::zeros(vec![rows, width]);
                    let mut labels = Vec::with_capacity(rows);
                    for (r, &i) in batch.iter().enumerate() {
                        x.row_mut(r).copy_from_slice(&train_set[i].pixels);
                        labels.push(train_set[i].label);
                    }
                    vec![train_bp_step(&mut model, &x, &labels, &mut opt)
                        .map_err(|e| at_batch(epoch, b, e))?]
                }
                Algorithm::IntFF | Algorithm::FF => {
                    let mut pos = Tensor::zeros(vec![rows, width]);
                    let mut neg = Tensor::zeros(vec![rows, width]);
                    for (r, &i) in batch.iter().enumerate() {
                        let img = &train_set[i];
                        overlay_into(&img.pixels, Overlay::Label(img.label), pos.row_mut(r))?;
                        let wrong = sample_negative_label(img.label, &mut neg_rng);
                        overlay_into(&img.pixels, Overlay::Label(wrong), neg.row_mut(r))?;
                    }
                    train_step_intff(&mut model, &pos, &neg, &mut opt, config.schedule)
                        .map_err(|e| at_batch(epoch, b, e))?
                }
            };
            for (s, l) in sums.iter_mut().zip(&losses) {
                *s += l * rows as f64;
            }
        }
        let unit_losses: Vec<f64> = sums.iter().map(|s| s / train_set.len() as f64).collect();
        for (unit, &loss) in unit_losses.iter().enumerate() {
            log.rows.push(MetricsRow::TrainLoss { epoch, unit, loss });
        }
        let validation_accuracy = if val_set.is_empty() {
            None
        } else {
            Some(evaluate(&model, &val_set)?.accuracy)
        };
        if let Some(accuracy) = validation_accuracy {
            log.rows.push(MetricsRow::Validation { epoch, accuracy });
        }
        epochs_run = epoch;
        progress(&EpochSummary {
            epoch,
            unit_losses,
            validation_accuracy,
        });

        if let (Some(ctl), Some(acc)) = (stopper.as_mut(), validation_accuracy) {
            if let EarlyStopDecision::Stop { best, .. } = ctl.update(epoch, acc, || model.clone()) {
                model = best;
                stopped_early = true;
                break;
            }
        }
    }

    let mut best_epoch = None;
    if let Some(ctl) = &stopper {
        if let Some((best, _, epoch)) = ctl.best() {
            if !stopped_early {
                model = best.clone();
            }
            best_epoch = Some(epoch);
        }
    }
    Ok(TrainOutcome {
        model,
        log,
        epochs_run,
        best_epoch,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::NoiseProfile;
    use crate::training::{EarlyStopping, UpdateSchedule};
    use rand::Rng;

    /// Tiny synthetic task: each class lights up its own block of pixels.
    fn blocks(n: usize, seed: u64) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TrainingSet::new(
            (0..n)
                .map(|_| {
                    let label = rng.random_range(0..10u8);
                    let mut pixels: Vec<f64> = (0..60).map(|_| rng.random::<f64>() * 0.3).collect();
                    for j in 0..5 {
                        pixels[10 + 5 * label as usize + j] = 1.0;
                    }
                    LabeledImage { pixels, label }
                })
                .collect(),
        )
    }

    fn small(algorithm: Algorithm, arch: &str) -> TrainConfig {
        TrainConfig {
            algorithm,
            arch: arch.into(),
            epochs: 3,
            batch_size: 16,
            lr: 3e-3,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn log_shape_and_determinism() {
        let data = blocks(300, 1);
        let cfg = small(Algorithm::IntFF, "60,(20,10),(8)");
        let a = train(&cfg, &data).unwrap();
        let b = train(&cfg, &data).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.log.to_csv(), b.log.to_csv());
        assert_eq!(a.log.rows.len(), 3 * 2 + 3);
        assert_eq!(a.epochs_run, 3);
    }

    #[test]
    fn intff_and_ff_agree_on_singleton_arch() {
        let data = blocks(200, 2);
        let a = train(&small(Algorithm::IntFF, "60,12,8,6"), &data).unwrap();
        let b = train(&small(Algorithm::FF, "60,12,8,6"), &data).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn ff_rejects_grouped_arch() {
        let err = train(&small(Algorithm::FF, "60,(12,8)"), &blocks(20, 3)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn schedules_both_train() {
        let data = blocks(200, 4);
        let mut cfg = small(Algorithm::IntFF, "60,(16,8),(8,6)");
        cfg.schedule = UpdateSchedule::PerUnit;
        let out = train(&cfg, &data).unwrap();
        assert!(out.log.unit_losses(3).iter().all(|l| l.is_finite()));
    }

    #[test]
    fn bp_learns_block_task() {
        let data = blocks(600, 5);
        let mut cfg = small(Algorithm::BP, "60,32,16");
        cfg.epochs = 8;
        let out = train(&cfg, &data).unwrap();
        assert_eq!(out.log.unit_losses(1).len(), 1);
        assert!(out.log.validation_accuracy(8).unwrap() > 0.8);
    }

    #[test]
    fn intff_losses_fall_on_block_task() {
        let data = blocks(600, 6);
        let mut cfg = small(Algorithm::IntFF, "60,(32,16),(16,8)");
        cfg.epochs = 5;
        let out = train(&cfg, &data).unwrap();
        let (first, last) = (out.log.unit_losses(1), out.log.unit_losses(5));
        for (f, l) in first.iter().zip(&last) {
            assert!(l < f, "{first:?} -> {last:?}");
        }
    }

    #[test]
    fn early_stopping_restores_best_epoch() {
        let data = blocks(300, 7);
        let mut cfg = small(Algorithm::IntFF, "60,(16),(8)");
        cfg.epochs = 12;
        cfg.lr = 5e-2;
        cfg.early_stopping = Some(EarlyStopping { patience: 2, min_delta: 0.0 });
        let out = train(&cfg, &data).unwrap();
        let best = out.best_epoch.unwrap();
        let best_acc = out.log.validation_accuracy(best).unwrap();
        let (_, val) = split(data.images().to_vec(), cfg.validation_fraction, derive_seed(cfg.seed, SeedStream::Split));
        let again = evaluate(&out.model, &val).unwrap().accuracy;
        assert_eq!(again, best_acc);
        if out.stopped_early {
            assert_eq!(out.epochs_run, best + 2);
        }
    }

    #[test]
    fn noise_profile_changes_training_but_not_init() {
        let data = blocks(200, 8);
        let clean = small(Algorithm::IntFF, "60,(16),(8)");
        let noisy = TrainConfig {
            noise_profile: Some(NoiseProfile::default()),
            ..clean.clone()
        };
        assert_eq!(build_model(&clean).unwrap(), build_model(&noisy).unwrap());
        let a = train(&clean, &data).unwrap();
        let b = train(&noisy, &data).unwrap();
        assert_ne!(a.model, b.model);
    }

    #[test]
    fn wrong_image_width_rejected() {
        let cfg = small(Algorithm::IntFF, "61,(16),(8)");
        assert!(matches!(train(&cfg, &blocks(20, 9)), Err(Error::Shape { .. })));
    }
}
