//! Architecture parsing, hidden units, forward traces and goodness, and
//! model persistence.

mod arch;
mod network;
mod persist;
mod unit;

pub use arch::{parse_arch, parse_arch_with_depth, ArchSpec, HiddenUnitSpec, DEFAULT_MAX_UNIT_DEPTH};
pub use network::{
    goodness_total, p_positive, BatchTrace, ForwardTrace, IntFFModel, UnitTrace, DEFAULT_THETA,
};
pub use persist::{load_model, model_from_json, model_to_json, save_model, FORMAT_VERSION};
pub use unit::{HiddenUnit, UnitBatchTrace};
