use crate::data::{overlay_into, LabeledImage, Overlay, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::model::{goodness_total, IntFFModel};
use crate::numerics::Tensor;
use crate::parallel;
use crate::training::bp_predict;

/// Images per forward batch during a label sweep (each expands to ten rows).
pub const PREDICT_CHUNK: usize = 128;

fn check_width(model: &IntFFModel, len: usize) -> Result<()> {
    if len != model.input_width() {
        return Err(Error::Shape {
            op: "predict",
            left: vec![len],
            right: vec![model.input_width()],
        });
    }
    Ok(())
}

/// Total goodness of each of the ten label overlays of `pixels`.
pub fn label_scores(model: &IntFFModel, pixels: &[f64]) -> Result<[f64; NUM_CLASSES]> {
    check_width(model, pixels.len())?;
    let mut scores = [0.0; NUM_CLASSES];
    let mut x = vec![0.0; pixels.len()];
    for (label, s) in scores.iter_mut().enumerate() {
        overlay_into(pixels, Overlay::Label(label as u8), &mut x)?;
        *s = goodness_total(&model.forward(&x)?);
    }
    Ok(scores)
}

fn argmax_lowest(scores: &[f64]) -> u8 {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best as u8
}

/// Label whose overlay yields the largest total goodness; ties go to the
/// lowest label. Models with a softmax head predict from their logits.
pub fn predict_label(model: &IntFFModel, pixels: &[f64]) -> Result<u8> {
    if model.bp_head.is_some() {
        check_width(model, pixels.len())?;
        let x = Tensor::new(vec![1, pixels.len()], pixels.to_vec())?;
        return Ok(bp_predict(model, &x)?[0]);
    }
    Ok(argmax_lowest(&label_scores(model, pixels)?))
}

fn predict_chunk(model: &IntFFModel, chunk: &[LabeledImage]) -> Result<Vec<u8>> {
    let width = model.input_width();
    for img in chunk {
        check_width(model, img.pixels.len())?;
    }
    if model.bp_head.is_some() {
        let data = chunk.iter().flat_map(|i| i.pixels.iter().copied()).collect();
        return bp_predict(model, &Tensor::new(vec![chunk.len(), width], data)?);
    }
    let rows = chunk.len() * NUM_CLASSES;
    let mut x = Tensor::zeros(vec![rows, width]);
    for (i, img) in chunk.iter().enumerate() {
        for label in 0..NUM_CLASSES {
            let r = i * NUM_CLASSES + label;
            overlay_into(&img.pixels, Overlay::Label(label as u8), x.row_mut(r))?;
        }
    }
    let trace = model.forward_batch(&x)?;
    Ok((0..chunk.len())
        .map(|i| {
            let scores: Vec<f64> = (0..NUM_CLASSES)
                .map(|l| trace.goodness_total(i * NUM_CLASSES + l))
                .collect();
            argmax_lowest(&scores)
        })
        .collect())
}

/// Batched label sweep over many images, parallel across chunks.
pub fn predict_labels(model: &IntFFModel, images: &[LabeledImage]) -> Result<Vec<u8>> {
    let chunks: Vec<&[LabeledImage]> = images.chunks(PREDICT_CHUNK).collect();
    let per_chunk = parallel::map_slice(&chunks, |c| predict_chunk(model, c));
    let mut out = Vec::with_capacity(images.len());
    for p in per_chunk {
        out.extend(p?);
    }
    Ok(out)
}
