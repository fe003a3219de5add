//! MNIST ingestion, label overlays, negative-label sampling, training-set
//! corruption, and deterministic batching.

mod batch;
mod idx;
mod negative;
mod noise;
mod overlay;

pub use batch::make_batches;
pub use idx::{
    load_idx_images, load_idx_labels, load_test_set, load_training_set, write_idx_images,
    write_idx_labels, MnistFile, MNIST_SHA256,
};
pub use negative::sample_negative_label;
pub use noise::{corrupt_dataset, CorruptedSet, CorruptionKind, NoiseProfile};
pub use overlay::{overlay_into, overlay_label, Overlay, LABEL_SLOTS, NEUTRAL_INTENSITY};

use crate::error::{Error, Result};

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const NUM_CLASSES: usize = 10;

/// A flattened image with pixels in `[0, 1]` and a digit label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub pixels: Vec<f64>,
    pub label: u8,
}

impl LabeledImage {
    pub fn new(pixels: Vec<f64>, label: u8) -> Result<Self> {
        if label as usize >= NUM_CLASSES {
            return Err(Error::Domain(format!("label {label} out of range 0..9")));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Domain(format!("pixel value {p} outside [0, 1]")));
        }
        Ok(LabeledImage { pixels, label })
    }
}

/// Images used for fitting. Only this type can be corrupted, so the
/// evaluation split always stays authentic.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    images: Vec<LabeledImage>,
}

/// Images used for reporting accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    images: Vec<LabeledImage>,
}

macro_rules! image_set {
    ($ty:ident) => {
        impl $ty {
            pub fn new(images: Vec<LabeledImage>) -> Self {
                $ty { images }
            }

            pub fn images(&self) -> &[LabeledImage] {
                &self.images
            }

            pub fn into_images(self) -> Vec<LabeledImage> {
                self.images
            }

            pub fn len(&self) -> usize {
                self.images.len()
            }

            pub fn is_empty(&self) -> bool {
                self.images.is_empty()
            }

            /// The first `n` images (all of them if `n` is larger).
            pub fn truncated(&self, n: usize) -> Self {
                $ty {
                    images: self.images[..n.min(self.images.len())].to_vec(),
                }
            }
        }
    };
}

image_set!(TrainingSet);
image_set!(TestSet);
