use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use intff::data::{load_test_set, NoiseProfile};
use intff::eval::evaluate;
use intff::model::parse_arch;
use intff::training::{Algorithm, EarlyStopping, TrainConfig};

use crate::error::{CliError, CliResult};

use super::ensure_parent;
use super::read_json;
use super::train::{load_train, materialize, progress_printer, train_checked};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Clean data, fixed epoch budget, training time column.
    Clean,
    /// Corrupted training split and early stopping.
    Noisy,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum, default_value_t = Preset::Noisy)]
    preset: Preset,
    /// Directory with the MNIST training files.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Test directory; defaults to the data directory.
    #[arg(long)]
    test_dir: Option<PathBuf>,
    /// Master seed shared by all three runs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Epoch budget (15 for the clean preset, 30 for the noisy one).
    #[arg(long)]
    epochs: Option<usize>,
    /// Early-stopping patience (noisy preset default 5).
    #[arg(long)]
    patience: Option<usize>,
    /// IntFF architecture override.
    #[arg(long)]
    intff_arch: Option<String>,
    /// FF architecture override; must use single-layer units.
    #[arg(long)]
    ff_arch: Option<String>,
    /// BP architecture override; a 10-way head is appended.
    #[arg(long)]
    bp_arch: Option<String>,
    /// Noise profile for the noisy preset; defaults to 25% of each corruption type.
    #[arg(long)]
    noise_profile: Option<PathBuf>,
    /// Use only the first N training images.
    #[arg(long)]
    limit: Option<usize>,
    /// Evaluate only the first N test images.
    #[arg(long)]
    test_limit: Option<usize>,
    /// Write the table as CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress per-epoch progress lines.
    #[arg(long)]
    quiet: bool,
}

struct Row {
    algorithm: Algorithm,
    size: String,
    seconds: f64,
    accuracy: f64,
}

fn network_size(algorithm: Algorithm, arch: &str) -> CliResult<String> {
    let spec = parse_arch(arch)?;
    Ok(match algorithm {
        Algorithm::BP => format!("({spec},10)"),
        _ => format!("({spec})"),
    })
}

fn label(a: Algorithm) -> &'static str {
    match a {
        Algorithm::IntFF => "IntFF",
        Algorithm::FF => "FF",
        Algorithm::BP => "BP",
    }
}

pub fn run(args: Args) -> CliResult {
    let (default_archs, epochs, patience, noise) = match args.preset {
        Preset::Clean => (
            ["784,(100,50),(30,10)", "784,100,50,30,10", "784,100,50,30,10"],
            args.epochs.unwrap_or(15),
            args.patience,
            None,
        ),
        Preset::Noisy => (
            ["784,(100,100),(100,100)", "784,100,100,100,100", "784,100,100,100,100"],
            args.epochs.unwrap_or(30),
            Some(args.patience.unwrap_or(5)),
            Some(match &args.noise_profile {
                Some(p) => read_json::<NoiseProfile>(p, "noise profile")?,
                None => NoiseProfile::default(),
            }),
        ),
    };
    let archs = [
        args.intff_arch.clone().unwrap_or(default_archs[0].into()),
        args.ff_arch.clone().unwrap_or(default_archs[1].into()),
        args.bp_arch.clone().unwrap_or(default_archs[2].into()),
    ];
    let data_dir = args.data_dir.clone().unwrap_or_else(crate::default_data_dir);
    let test_dir = args.test_dir.clone().unwrap_or(data_dir.clone());
    let train = load_train(&data_dir, args.limit)?;
    let mut test = load_test_set(&test_dir)?;
    if let Some(n) = args.test_limit {
        test = test.truncated(n);
    }

    let mut rows = Vec::new();
    for (algorithm, arch) in [Algorithm::IntFF, Algorithm::FF, Algorithm::BP].into_iter().zip(&archs) {
        let config = materialize(TrainConfig {
            algorithm,
            arch: arch.clone(),
            epochs,
            seed: args.seed,
            early_stopping: patience.map(|patience| EarlyStopping { patience, min_delta: 0.0 }),
            noise_profile: noise.clone(),
            ..TrainConfig::default()
        })?;
        let started = Instant::now();
        let prefix = format!("{:<5} ", label(algorithm));
        let outcome = train_checked(&config, &train, progress_printer(args.quiet, prefix))?;
        let seconds = started.elapsed().as_secs_f64();
        let accuracy = evaluate(&outcome.model, test.images())?.accuracy;
        rows.push(Row {
            algorithm,
            size: network_size(algorithm, &config.arch)?,
            seconds,
            accuracy,
        });
    }

    let with_time = args.preset == Preset::Clean;
    let mut csv = String::from("algorithm,network_type,network_size");
    csv.push_str(if with_time { ",training_time,testing_accuracy\n" } else { ",testing_accuracy\n" });
    for r in &rows {
        let _ = write!(csv, "{},Dense,\"{}\"", label(r.algorithm), r.size);
        if with_time {
            let _ = write!(csv, ",{:.0}s", r.seconds);
        }
        let _ = writeln!(csv, ",{:.2}%", r.accuracy * 100.0);
    }
    println!();
    println!("{:<6} {:<8} {:<36} {}", "Algo", "Type", "Network Size", if with_time { "Time     Accuracy" } else { "Accuracy" });
    for r in &rows {
        let time = if with_time { format!("{:>6.0}s  ", r.seconds) } else { String::new() };
        println!("{:<6} {:<8} {:<36} {time}{:.2}%", label(r.algorithm), "Dense", r.size, r.accuracy * 100.0);
    }
    if let Some(path) = &args.out {
        ensure_parent(path)?;
        fs::write(path, csv).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}
