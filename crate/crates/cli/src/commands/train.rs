use std::path::{Path, PathBuf};
use std::time::Instant;

use intff::data::{load_training_set, MnistFile, NoiseProfile, TrainingSet};
use intff::eval::emit_metrics_csv;
use intff::model::save_model;
use intff::seeds::{derive_seed, SeedStream};
use intff::training::{train_with_progress, Algorithm, TrainConfig, TrainOutcome, UpdateSchedule};

use crate::error::{CliError, CliResult};
use crate::manifest::{dataset_checksums, manifest_path_for, DatasetRecord, OutputRecord, RunManifest};

use super::{ensure_parent, read_json};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// JSON file with any subset of the training configuration keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replay a run manifest; only output paths may be overridden.
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,
    /// Training algorithm: intff, ff or bp [default: intff].
    #[arg(long = "algo")]
    algorithm: Option<Algorithm>,
    /// Architecture such as "784,(100,50),(30,10)".
    #[arg(long)]
    arch: Option<String>,
    /// Epoch budget [default: 15].
    #[arg(long)]
    epochs: Option<usize>,
    /// Master seed for initialization, shuffling, negatives, noise and the split [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Mini-batch size [default: 64].
    #[arg(long = "batch")]
    batch_size: Option<usize>,
    /// Adam learning rate [default: 0.001].
    #[arg(long)]
    lr: Option<f64>,
    /// Goodness threshold of the local loss [default: 1.5].
    #[arg(long)]
    theta: Option<f64>,
    /// JSON noise profile; corrupts the training split before training.
    #[arg(long)]
    noise_profile: Option<PathBuf>,
    /// When unit parameters are updated: per-batch or per-unit [default: per-batch].
    #[arg(long)]
    schedule: Option<UpdateSchedule>,
    /// Enables early stopping with this patience (epochs).
    #[arg(long)]
    patience: Option<usize>,
    /// Smallest validation-accuracy gain that counts as an improvement [default: 0].
    #[arg(long)]
    min_delta: Option<f64>,
    /// Share of the training split held out for validation [default: 0.1].
    #[arg(long)]
    validation_fraction: Option<f64>,
    /// Directory with the MNIST training files.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Use only the first N training images.
    #[arg(long)]
    limit: Option<usize>,
    /// Model output path [default: model.json]; the manifest is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the per-epoch metrics CSV here.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Suppress per-epoch progress lines.
    #[arg(long)]
    quiet: bool,
}

impl Args {
    fn config_flags_set(&self) -> Vec<&'static str> {
        let mut set = Vec::new();
        let mut check = |on: bool, name| {
            if on {
                set.push(name)
            }
        };
        check(self.algorithm.is_some(), "--algo");
        check(self.arch.is_some(), "--arch");
        check(self.epochs.is_some(), "--epochs");
        check(self.seed.is_some(), "--seed");
        check(self.batch_size.is_some(), "--batch");
        check(self.lr.is_some(), "--lr");
        check(self.theta.is_some(), "--theta");
        check(self.noise_profile.is_some(), "--noise-profile");
        check(self.schedule.is_some(), "--schedule");
        check(self.patience.is_some(), "--patience");
        check(self.min_delta.is_some(), "--min-delta");
        check(self.validation_fraction.is_some(), "--validation-fraction");
        check(self.limit.is_some(), "--limit");
        set
    }

    /// Defaults, then the config file, then flags.
    fn resolve_config(&self) -> CliResult<TrainConfig> {
        let mut c: TrainConfig = match &self.config {
            Some(path) => read_json(path, "config")?,
            None => TrainConfig::default(),
        };
        if let Some(v) = self.algorithm {
            c.algorithm = v;
        }
        if let Some(v) = &self.arch {
            c.arch = v.clone();
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.lr {
            c.lr = v;
        }
        if let Some(v) = self.theta {
            c.theta = v;
        }
        if let Some(v) = self.schedule {
            c.schedule = v;
        }
        if let Some(v) = self.validation_fraction {
            c.validation_fraction = v;
        }
        if self.patience.is_some() || self.min_delta.is_some() {
            let mut es = c.early_stopping.unwrap_or_default();
            if let Some(p) = self.patience {
                es.patience = p;
            }
            if let Some(d) = self.min_delta {
                es.min_delta = d;
            }
            c.early_stopping = Some(es);
        }
        if let Some(path) = &self.noise_profile {
            c.noise_profile = Some(read_json::<NoiseProfile>(path, "noise profile")?);
        }
        Ok(c)
    }
}

/// Fills in every value the trainer would otherwise pick implicitly.
pub(crate) fn materialize(mut config: TrainConfig) -> CliResult<TrainConfig> {
    let noise_seed = derive_seed(config.seed, SeedStream::Noise);
    if let Some(p) = config.noise_profile.as_mut() {
        p.seed.get_or_insert(noise_seed);
    }
    config.arch = intff::model::parse_arch(&config.arch)?.to_string();
    config.validate()?;
    Ok(config)
}

pub(crate) fn load_train(dir: &Path, limit: Option<usize>) -> CliResult<TrainingSet> {
    let set = load_training_set(dir)?;
    Ok(match limit {
        Some(n) => set.truncated(n),
        None => set,
    })
}

pub(crate) fn progress_printer(quiet: bool, label: String) -> impl FnMut(&intff::training::EpochSummary) {
    move |s| {
        if quiet {
            return;
        }
        let losses: Vec<String> = s.unit_losses.iter().map(|l| format!("{l:.5}")).collect();
        match s.validation_accuracy {
            Some(a) => println!("{label}epoch {:>3}  loss [{}]  val_acc {:.4}", s.epoch, losses.join(", "), a),
            None => println!("{label}epoch {:>3}  loss [{}]", s.epoch, losses.join(", ")),
        }
    }
}

pub(crate) fn train_checked(
    config: &TrainConfig,
    data: &TrainingSet,
    progress: impl FnMut(&intff::training::EpochSummary),
) -> CliResult<TrainOutcome> {
    train_with_progress(config, data, progress).map_err(CliError::from)
}

const TRAIN_FILES: [MnistFile; 2] = [MnistFile::TrainImages, MnistFile::TrainLabels];

pub fn run(args: Args) -> CliResult {
    let (config, data_dir, limit, model_path, metrics_path) = match &args.manifest {
        Some(path) => {
            let flags = args.config_flags_set();
            if !flags.is_empty() {
                return Err(CliError::config(format!(
                    "{} cannot be combined with --manifest",
                    flags.join(", ")
                )));
            }
            let m = RunManifest::load(path)?;
            let dir = args.data_dir.clone().unwrap_or(m.dataset.dir.clone());
            let sums = dataset_checksums(&dir, &TRAIN_FILES)?;
            if sums != m.dataset.sha256 {
                return Err(CliError::data(format!(
                    "training files in {} do not match the manifest checksums",
                    dir.display()
                )));
            }
            let model = args.out.clone().unwrap_or(m.outputs.model.clone());
            let metrics = args.metrics.clone().or(m.outputs.metrics.clone());
            (materialize(m.config)?, dir, m.dataset.limit, model, metrics)
        }
        None => {
            let config = materialize(args.resolve_config()?)?;
            let dir = args.data_dir.clone().unwrap_or_else(crate::default_data_dir);
            let model = args.out.clone().unwrap_or_else(|| PathBuf::from("model.json"));
            (config, dir, args.limit, model, args.metrics.clone())
        }
    };

    let data = load_train(&data_dir, limit)?;
    let checksums = dataset_checksums(&data_dir, &TRAIN_FILES)?;
    let started = Instant::now();
    let outcome = train_checked(&config, &data, progress_printer(args.quiet, String::new()))?;
    let elapsed = started.elapsed().as_secs_f64();

    ensure_parent(&model_path)?;
    save_model(&outcome.model, &model_path)?;
    if let Some(path) = &metrics_path {
        ensure_parent(path)?;
        emit_metrics_csv(&outcome.log, path)?;
    }
    let manifest = RunManifest::new(
        config.clone(),
        DatasetRecord {
            dir: data_dir,
            limit,
            sha256: checksums,
        },
        OutputRecord {
            model: model_path.clone(),
            metrics: metrics_path,
        },
    );
    let manifest_path = manifest_path_for(&model_path);
    manifest.save(&manifest_path)?;

    let mut summary = format!(
        "trained {} {} for {} epochs in {elapsed:.1}s",
        config.algorithm, config.arch, outcome.epochs_run
    );
    if let Some(best) = outcome.best_epoch {
        summary.push_str(&format!(", kept epoch {best}"));
    }
    println!("{summary}");
    println!("model: {}", model_path.display());
    println!("manifest: {}", manifest_path.display());
    Ok(())
}
