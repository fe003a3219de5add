use std::fs;
use std::path::PathBuf;

use intff::data::{
    corrupt_dataset, write_idx_images, write_idx_labels, CorruptionKind, MnistFile, NoiseProfile,
    IMAGE_SIDE,
};

use crate::error::{CliError, CliResult};

use super::read_json;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory with the MNIST files to corrupt.
    #[arg(long = "in")]
    input: PathBuf,
    /// JSON noise profile; defaults apply when omitted.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Overrides the profile's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the corrupted training files and a copy of the test files.
    #[arg(long)]
    out: PathBuf,
    /// Corrupt only the first N training images.
    #[arg(long)]
    limit: Option<usize>,
}

/// Corrupts the training split; the test files are copied unchanged so the
/// output directory is a complete dataset.
pub fn run(args: Args) -> CliResult {
    let mut profile: NoiseProfile = match &args.profile {
        Some(p) => read_json(p, "noise profile")?,
        None => NoiseProfile::default(),
    };
    if let Some(s) = args.seed {
        profile.seed = Some(s);
    }
    profile.seed.get_or_insert(0);
    profile.validate()?;
    let train = super::train::load_train(&args.input, args.limit)?;
    let out = corrupt_dataset(&train, &profile)?;

    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", args.out.display())))?;
    let pixels: Vec<Vec<f64>> = out.set.images().iter().map(|i| i.pixels.clone()).collect();
    let labels: Vec<u8> = out.set.images().iter().map(|i| i.label).collect();
    write_idx_images(&args.out.join(MnistFile::TrainImages.file_name()), &pixels, IMAGE_SIDE, IMAGE_SIDE)?;
    write_idx_labels(&args.out.join(MnistFile::TrainLabels.file_name()), &labels)?;
    for f in [MnistFile::TestImages, MnistFile::TestLabels] {
        let src = args.input.join(f.file_name());
        if src.exists() {
            fs::copy(&src, args.out.join(f.file_name()))
                .map_err(|e| CliError::data(format!("cannot copy {}: {e}", src.display())))?;
        }
    }
    let counts: Vec<String> = CorruptionKind::ALL
        .iter()
        .map(|k| format!("{k:?}={}", out.kinds.iter().filter(|x| *x == k).count()))
        .collect();
    println!("corrupted {} images ({})", out.kinds.len(), counts.join(", "));
    println!("written to {}", args.out.display());
    Ok(())
}
