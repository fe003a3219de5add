use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{LabeledImage, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::model::IntFFModel;
use crate::training::MetricsLog;

use super::predict_labels;

const CONFUSION_MARKER: &str = "# confusion";

/// Accuracy summary with a confusion matrix indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub error_rate: f64,
    pub confusion: [[u64; NUM_CLASSES]; NUM_CLASSES],
    pub samples: usize,
}

impl EvalReport {
    pub fn from_predictions(truth: &[u8], predicted: &[u8]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::Domain("cannot evaluate an empty set".into()));
        }
        if truth.len() != predicted.len() {
            return Err(Error::Shape {
                op: "evaluate",
                left: vec![truth.len()],
                right: vec![predicted.len()],
            });
        }
        let mut confusion = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t as usize][p as usize] += 1;
        }
        let correct = (0..NUM_CLASSES).map(|i| confusion[i][i]).sum::<u64>();
        let accuracy = correct as f64 / truth.len() as f64;
        Ok(EvalReport {
            accuracy,
            error_rate: 1.0 - accuracy,
            confusion,
            samples: truth.len(),
        })
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.confusion[i][i]).sum()
    }
}

/// Label-sweep predictions over `images` aggregated into a report.
pub fn evaluate(model: &IntFFModel, images: &[LabeledImage]) -> Result<EvalReport> {
    if images.is_empty() {
        return Err(Error::Domain("cannot evaluate an empty set".into()));
    }
    let predicted = predict_labels(model, images)?;
    let truth: Vec<u8> = images.iter().map(|i| i.label).collect();
    EvalReport::from_predictions(&truth, &predicted)
}

/// `metric,value` rows followed by the confusion block.
pub fn report_to_csv(report: &EvalReport) -> String {
    let mut out = String::from("metric,value\n");
    let _ = writeln!(out, "accuracy,{}", report.accuracy);
    let _ = writeln!(out, "error_rate,{}", report.error_rate);
    let _ = writeln!(out, "samples,{}", report.samples);
    out.push_str(CONFUSION_MARKER);
    out.push('\n');
    for row in &report.confusion {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_report_csv(text: &str) -> Result<EvalReport> {
    let bad = |m: String| Error::Domain(format!("report csv: {m}"));
    let mut lines = text.lines();
    if lines.next() != Some("metric,value") {
        return Err(bad("missing header".into()));
    }
    let (mut accuracy, mut error_rate, mut samples) = (None, None, None);
    for line in lines.by_ref() {
        if line == CONFUSION_MARKER {
            break;
        }
        let (k, v) = line.split_once(',').ok_or_else(|| bad(format!("malformed row {line:?}")))?;
        let parse = |v: &str| v.parse::<f64>().map_err(|e| bad(format!("{k}: {e}")));
        match k {
            "accuracy" => accuracy = Some(parse(v)?),
            "error_rate" => error_rate = Some(parse(v)?),
            "samples" => samples = Some(v.parse::<usize>().map_err(|e| bad(format!("samples: {e}")))?),
            other => return Err(bad(format!("unknown metric {other:?}"))),
        }
    }
    let mut confusion = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (r, row) in confusion.iter_mut().enumerate() {
        let line = lines.next().ok_or_else(|| bad(format!("confusion row {r} missing")))?;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != NUM_CLASSES {
            return Err(bad(format!("confusion row {r} has {} cells", cells.len())));
        }
        for (c, cell) in row.iter_mut().zip(cells) {
            *c = cell.parse().map_err(|e| bad(format!("confusion row {r}: {e}")))?;
        }
    }
    Ok(EvalReport {
        accuracy: accuracy.ok_or_else(|| bad("accuracy missing".into()))?,
        error_rate: error_rate.ok_or_else(|| bad("error_rate missing".into()))?,
        confusion,
        samples: samples.ok_or_else(|| bad("samples missing".into()))?,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn emit_report_csv(report: &EvalReport, path: &Path) -> Result<()> {
    write(path, &report_to_csv(report))
}

pub fn emit_metrics_csv(log: &MetricsLog, path: &Path) -> Result<()> {
    write(path, &log.to_csv())
}
