use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use intff::data::{MnistFile, MNIST_SHA256};

use crate::error::{CliError, CliResult};
use crate::manifest::{sha256_bytes, sha256_file};

pub const DEFAULT_MIRROR: &str = "https://ossci-datasets.s3.amazonaws.com/mnist";
const MAX_DOWNLOAD: u64 = 64 << 20;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Destination directory.
    #[arg(long, default_value = "data/mnist")]
    out: PathBuf,
    /// Base URL serving `<file>.gz`; falls back to the mirror environment variable.
    #[arg(long)]
    mirror: Option<String>,
    /// Copy from a local directory (raw or `.gz` files) instead of downloading.
    #[arg(long, conflicts_with = "mirror")]
    from: Option<PathBuf>,
}

fn gunzip(bytes: &[u8], what: &str) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    GzDecoder::new(bytes)
        .read_to_end(&mut out)
        .map_err(|e| CliError::data(format!("{what}: not a valid gzip stream: {e}")))?;
    Ok(out)
}

fn download(url: &str) -> CliResult<Vec<u8>> {
    let mut resp = ureq::get(url)
        .call()
        .map_err(|e| CliError::data(format!("download {url} failed: {e}")))?;
    resp.body_mut()
        .with_config()
        .limit(MAX_DOWNLOAD)
        .read_to_vec()
        .map_err(|e| CliError::data(format!("download {url} failed: {e}")))
}

fn from_local(dir: &Path, name: &str) -> CliResult<Vec<u8>> {
    let raw = dir.join(name);
    if raw.exists() {
        return fs::read(&raw).map_err(|e| CliError::data(format!("cannot read {}: {e}", raw.display())));
    }
    let gz = dir.join(format!("{name}.gz"));
    let bytes = fs::read(&gz).map_err(|e| CliError::data(format!("cannot read {}: {e}", gz.display())))?;
    gunzip(&bytes, &gz.display().to_string())
}

pub fn run(args: Args) -> CliResult {
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", args.out.display())))?;
    let mirror = args
        .mirror
        .clone()
        .or_else(|| std::env::var(crate::MIRROR_ENV).ok())
        .unwrap_or_else(|| DEFAULT_MIRROR.to_string());
    for (file, expected) in MnistFile::ALL.iter().zip(MNIST_SHA256) {
        let name = file.file_name();
        let dest = args.out.join(name);
        if dest.exists() && sha256_file(&dest)? == expected {
            println!("{name}: present, checksum ok");
            continue;
        }
        let bytes = match &args.from {
            Some(dir) => from_local(dir, name)?,
            None => {
                let url = format!("{}/{name}.gz", mirror.trim_end_matches('/'));
                gunzip(&download(&url)?, &url)?
            }
        };
        let actual = sha256_bytes(&bytes);
        if actual != expected {
            return Err(CliError::data(format!(
                "{name}: checksum {actual} does not match expected {expected}"
            )));
        }
        fs::write(&dest, &bytes)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", dest.display())))?;
        println!("{name}: fetched, checksum ok");
    }
    Ok(())
}
