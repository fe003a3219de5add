//! Label-sweep classification, accuracy reports, the softmax readout on
//! frozen features, and CSV emission.

mod predict;
mod readout;
mod report;

pub use predict::{label_scores, predict_label, predict_labels, PREDICT_CHUNK};
pub use readout::{
    readout_features, readout_gradients, train_readout, Readout, ReadoutConfig,
};
pub use report::{
    emit_metrics_csv, emit_report_csv, evaluate, parse_report_csv, report_to_csv, EvalReport,
};
