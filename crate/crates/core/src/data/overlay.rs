//! Label overlay: the first ten pixels carry a one-hot label code.

use crate::error::{Error, Result};

use super::NUM_CLASSES;

/// Number of leading pixels replaced by the label code.
pub const LABEL_SLOTS: usize = NUM_CLASSES;
/// Intensity written to every label slot by the neutral overlay.
pub const NEUTRAL_INTENSITY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overlay {
    Label(u8),
    Neutral,
}

/// Writes `pixels` with the label code into `out`, which must have the same length.
pub fn overlay_into(pixels: &[f64], overlay: Overlay, out: &mut [f64]) -> Result<()> {
    if pixels.len() < LABEL_SLOTS || out.len() != pixels.len() {
        return Err(Error::Shape {
            op: "overlay_label",
            left: vec![pixels.len()],
            right: vec![out.len()],
        });
    }
    out.copy_from_slice(pixels);
    match overlay {
        Overlay::Label(l) if (l as usize) < NUM_CLASSES => {
            out[..LABEL_SLOTS].fill(0.0);
            out[l as usize] = 1.0;
        }
        Overlay::Label(l) => return Err(Error::Domain(format!("label {l} out of range 0..9"))),
        Overlay::Neutral => out[..LABEL_SLOTS].fill(NEUTRAL_INTENSITY),
    }
    Ok(())
}

pub fn overlay_label(pixels: &[f64], overlay: Overlay) -> Result<Vec<f64>> {
    let mut out = vec![0.0; pixels.len()];
    overlay_into(pixels, overlay, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn label_three_is_one_hot() {
        let img = vec![0.5; 784];
        let out = overlay_label(&img, Overlay::Label(3)).unwrap();
        assert_eq!(&out[..10], &[0., 0., 0., 1., 0., 0., 0., 0., 0., 0.]);
        assert!(out[10..].iter().all(|&p| p == 0.5));
    }

    #[test]
    fn neutral_is_all_tenths() {
        let out = overlay_label(&vec![0.9; 784], Overlay::Neutral).unwrap();
        assert!(out[..10].iter().all(|&p| p == 0.1));
    }

    #[test]
    fn out_of_range_label() {
        assert!(overlay_label(&[0.0; 784], Overlay::Label(10)).is_err());
    }

    proptest! {
        #[test]
        fn positive_and_negative_differ_only_in_label_slots(
            img in proptest::collection::vec(0.0f64..=1.0, 784),
            a in 0u8..10, b in 0u8..10,
        ) {
            let pa = overlay_label(&img, Overlay::Label(a)).unwrap();
            let pb = overlay_label(&img, Overlay::Label(b)).unwrap();
            for i in 10..784 {
                prop_assert_eq!(pa[i].to_bits(), img[i].to_bits());
                prop_assert_eq!(pb[i].to_bits(), img[i].to_bits());
            }
        }
    }
}
