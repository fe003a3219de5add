//! Big-endian IDX container: a 4-byte magic, one u32 per dimension, then u8
//! payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{LabeledImage, TestSet, TrainingSet, NUM_CLASSES};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnistFile {
    TrainImages,
    TrainLabels,
    TestImages,
    TestLabels,
}

impl MnistFile {
    pub const ALL: [MnistFile; 4] = [
        MnistFile::TrainImages,
        MnistFile::TrainLabels,
        MnistFile::TestImages,
        MnistFile::TestLabels,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            MnistFile::TrainImages => "train-images-idx3-ubyte",
            MnistFile::TrainLabels => "train-labels-idx1-ubyte",
            MnistFile::TestImages => "t10k-images-idx3-ubyte",
            MnistFile::TestLabels => "t10k-labels-idx1-ubyte",
        }
    }
}

/// SHA-256 of the four uncompressed canonical MNIST files, in [`MnistFile::ALL`] order.
pub const MNIST_SHA256: [&str; 4] = [
    "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db",
    "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5",
    "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7",
    "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2",
];

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::data(path, e.to_string()))
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::data(path, "truncated header"))
}

/// Parses an image file, scaling bytes by 1/255.
pub fn load_idx_images(path: &Path) -> Result<Vec<Vec<f64>>> {
    let bytes = read(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::data(path, format!("bad image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")));
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let size = rows * cols;
    if size == 0 {
        return Err(Error::data(path, "zero image dimensions"));
    }
    let payload = &bytes[16..];
    if payload.len() != count * size {
        return Err(Error::data(
            path,
            format!("payload has {} bytes, header promises {count} x {rows} x {cols}", payload.len()),
        ));
    }
    Ok(payload
        .chunks_exact(size)
        .map(|img| img.iter().map(|&b| f64::from(b) / 255.0).collect())
        .collect())
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != LABEL_MAGIC {
        return Err(Error::data(path, format!("bad label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}")));
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let payload = &bytes[8..];
    if payload.len() != count {
        return Err(Error::data(
            path,
            format!("payload has {} labels, header promises {count}", payload.len()),
        ));
    }
    if let Some(i) = payload.iter().position(|&l| l as usize >= NUM_CLASSES) {
        return Err(Error::data(path, format!("label {} at index {i} out of range 0..9", payload[i])));
    }
    Ok(payload.to_vec())
}

fn load_pair(dir: &Path, images: MnistFile, labels: MnistFile) -> Result<Vec<LabeledImage>> {
    let ipath = dir.join(images.file_name());
    let lpath = dir.join(labels.file_name());
    let pixels = load_idx_images(&ipath)?;
    let labels = load_idx_labels(&lpath)?;
    if pixels.len() != labels.len() {
        return Err(Error::data(
            &lpath,
            format!("{} labels for {} images in {}", labels.len(), pixels.len(), ipath.display()),
        ));
    }
    Ok(pixels
        .into_iter()
        .zip(labels)
        .map(|(pixels, label)| LabeledImage { pixels, label })
        .collect())
}

pub fn load_training_set(dir: &Path) -> Result<TrainingSet> {
    load_pair(dir, MnistFile::TrainImages, MnistFile::TrainLabels).map(TrainingSet::new)
}

pub fn load_test_set(dir: &Path) -> Result<TestSet> {
    load_pair(dir, MnistFile::TestImages, MnistFile::TestLabels).map(TestSet::new)
}

/// Writes square images back to IDX, rounding pixels to the nearest byte.
pub fn write_idx_images(path: &Path, images: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGE_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        if img.len() != rows * cols {
            return Err(Error::Shape {
                op: "write_idx_images",
                left: vec![img.len()],
                right: vec![rows, cols],
            });
        }
        out.extend(img.iter().map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_fixture(count: u32, payload: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IMAGE_MAGIC, count, 2, 2] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(payload);
        b
    }

    #[test]
    fn crafted_images_scale_by_255() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img");
        fs::write(&p, image_fixture(2, &[0, 1, 128, 255, 10, 20, 30, 40])).unwrap();
        let imgs = load_idx_images(&p).unwrap();
        assert_eq!(imgs.len(), 2);
        assert_eq!(imgs[0], vec![0.0, 1.0 / 255.0, 128.0 / 255.0, 1.0]);
        assert_eq!(imgs[1][3], 40.0 / 255.0);
    }

    #[test]
    fn wrong_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img");
        fs::write(&p, image_fixture(2, &[0; 7])).unwrap();
        assert!(load_idx_images(&p).unwrap_err().to_string().contains("payload"));
        let mut b = image_fixture(1, &[0; 4]);
        b[3] = 0x01;
        fs::write(&p, &b).unwrap();
        assert!(load_idx_images(&p).unwrap_err().to_string().contains("magic"));
        fs::write(&p, [0u8, 0, 8]).unwrap();
        assert!(load_idx_images(&p).is_err());
    }

    #[test]
    fn label_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lab");
        write_idx_labels(&p, &[3, 12, 1]).unwrap();
        let err = load_idx_labels(&p).unwrap_err().to_string();
        assert!(err.contains("label 12"), "{err}");
    }

    #[test]
    fn count_mismatch_names_files() {
        let dir = tempfile::tempdir().unwrap();
        write_idx_images(
            &dir.path().join(MnistFile::TrainImages.file_name()),
            &[vec![0.0; 4], vec![1.0; 4]],
            2,
            2,
        )
        .unwrap();
        write_idx_labels(&dir.path().join(MnistFile::TrainLabels.file_name()), &[1]).unwrap();
        let err = load_training_set(dir.path()).unwrap_err().to_string();
        assert!(err.contains("1 labels for 2 images"), "{err}");
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img");
        let imgs = vec![vec![0.0, 0.5, 1.0, 0.25]];
        write_idx_images(&p, &imgs, 2, 2).unwrap();
        let back = load_idx_images(&p).unwrap();
        assert_eq!(back[0], vec![0.0, 128.0 / 255.0, 1.0, 64.0 / 255.0]);
    }
}
