use std::path::PathBuf;

use intff::data::load_test_set;
use intff::eval::{emit_report_csv, evaluate, train_readout, ReadoutConfig};
use intff::model::load_model;

use crate::error::CliResult;

use super::ensure_parent;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Directory with the MNIST test files.
    #[arg(long)]
    test_dir: Option<PathBuf>,
    /// Write a `metric,value` report with a confusion block here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Evaluate only the first N test images.
    #[arg(long)]
    limit: Option<usize>,
    /// Also train a softmax readout on frozen features from this training directory.
    #[arg(long)]
    readout_train_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    readout_epochs: usize,
    /// Use only the first N training images for the readout.
    #[arg(long)]
    readout_limit: Option<usize>,
}

pub fn run(args: Args) -> CliResult {
    let model = load_model(&args.model)?;
    let dir = args.test_dir.clone().unwrap_or_else(crate::default_data_dir);
    let mut test = load_test_set(&dir)?;
    if let Some(n) = args.limit {
        test = test.truncated(n);
    }
    let report = evaluate(&model, test.images())?;
    println!(
        "accuracy {:.4} ({}/{}), error rate {:.4}",
        report.accuracy,
        report.correct(),
        report.samples,
        report.error_rate
    );
    if let Some(path) = &args.report {
        ensure_parent(path)?;
        emit_report_csv(&report, path)?;
    }
    if let Some(train_dir) = &args.readout_train_dir {
        let train = super::train::load_train(train_dir, args.readout_limit)?;
        let config = ReadoutConfig {
            epochs: args.readout_epochs,
            seed: model.seed,
            ..ReadoutConfig::default()
        };
        let readout = train_readout(&model, train.images(), &config)?;
        let r = readout.evaluate(&model, test.images())?;
        println!("readout accuracy {:.4} ({}/{})", r.accuracy, r.correct(), r.samples);
    }
    Ok(())
}
