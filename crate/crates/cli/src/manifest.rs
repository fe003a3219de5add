use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use intff::data::MnistFile;
use intff::seeds::{derive_seed, SeedStream};
use intff::training::TrainConfig;

use crate::error::{CliError, CliResult};

pub const TOOL_VERSION: &str = concat!("intff ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub dir: PathBuf,
    /// Only the first `limit` training images were used.
    pub limit: Option<usize>,
    pub sha256: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputRecord {
    pub model: PathBuf,
    pub metrics: Option<PathBuf>,
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    /// Fully resolved configuration, including the noise seed when corruption is on.
    pub config: TrainConfig,
    /// Per-subsystem seeds derived from the master seed.
    pub seeds: BTreeMap<String, u64>,
    pub dataset: DatasetRecord,
    pub outputs: OutputRecord,
}

impl RunManifest {
    pub fn new(config: TrainConfig, dataset: DatasetRecord, outputs: OutputRecord) -> Self {
        let mut seeds: BTreeMap<String, u64> = SeedStream::ALL
            .iter()
            .map(|&s| (s.name().to_string(), derive_seed(config.seed, s)))
            .collect();
        if let Some(seed) = config.noise_profile.as_ref().and_then(|p| p.seed) {
            seeds.insert(SeedStream::Noise.name().to_string(), seed);
        }
        RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            config,
            seeds,
            dataset,
            outputs,
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("manifest {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> CliResult {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n")
            .map_err(|e| CliError::data(format!("cannot write manifest {}: {e}", path.display())))
    }
}

/// `dir/model.json` becomes `dir/model.manifest.json`.
pub fn manifest_path_for(model: &Path) -> PathBuf {
    let stem = model
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    model.with_file_name(format!("{stem}.manifest.json"))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut file = fs::File::open(path)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file
            .read(&mut buf)
            .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of the given dataset files that exist in `dir`, keyed by file name.
pub fn dataset_checksums(dir: &Path, files: &[MnistFile]) -> CliResult<BTreeMap<String, String>> {
    files
        .iter()
        .map(|f| Ok((f.file_name().to_string(), sha256_file(&dir.join(f.file_name()))?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_path_sits_next_to_model() {
        assert_eq!(manifest_path_for(Path::new("out/m.json")), PathBuf::from("out/m.manifest.json"));
        assert_eq!(manifest_path_for(Path::new("model")), PathBuf::from("model.manifest.json"));
    }

    #[test]
    fn sha256_of_known_string() {
        assert_eq!(
            sha256_bytes(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn seeds_cover_every_stream() {
        let m = RunManifest::new(
            TrainConfig::default(),
            DatasetRecord { dir: "d".into(), limit: None, sha256: BTreeMap::new() },
            OutputRecord { model: "m.json".into(), metrics: None },
        );
        assert_eq!(m.seeds.len(), SeedStream::ALL.len());
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<RunManifest>(&text).unwrap(), m);
    }
}
