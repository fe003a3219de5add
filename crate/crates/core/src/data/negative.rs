//! Negative labels: a uniformly drawn wrong label for each image.

use rand::Rng;

use super::NUM_CLASSES;

/// Draws uniformly from the nine labels other than `true_label`.
pub fn sample_negative_label<R: Rng + ?Sized>(true_label: u8, rng: &mut R) -> u8 {
    debug_assert!((true_label as usize) < NUM_CLASSES);
    let r = rng.random_range(0..(NUM_CLASSES as u8 - 1));
    if r >= true_label {
        r + 1
    } else {
        r
    }
}
