use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::NoiseProfile;
use crate::error::{Error, Result};
use crate::model::DEFAULT_THETA;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Integrated Forward-Forward: multi-layer hidden units.
    IntFF,
    /// Original Forward-Forward: IntFF restricted to single-layer units.
    FF,
    /// Backpropagation baseline with a softmax head.
    BP,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::IntFF => "intff",
            Algorithm::FF => "ff",
            Algorithm::BP => "bp",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intff" => Ok(Algorithm::IntFF),
            "ff" => Ok(Algorithm::FF),
            "bp" => Ok(Algorithm::BP),
            other => Err(Error::Config(format!(
                "unknown algorithm `{other}` (expected intff, ff or bp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UpdateSchedule {
    /// One optimizer step for all units after both forward passes.
    #[default]
    #[serde(rename = "per-batch")]
    PerBatch,
    /// Update each unit as soon as its gradient is available.
    #[serde(rename = "per-unit")]
    PerUnit,
}

impl FromStr for UpdateSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-batch" => Ok(UpdateSchedule::PerBatch),
            "per-unit" => Ok(UpdateSchedule::PerUnit),
            other => Err(Error::Config(format!(
                "unknown schedule `{other}` (expected per-batch or per-unit)"
            ))),
        }
    }
}

impl fmt::Display for UpdateSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateSchedule::PerBatch => "per-batch",
            UpdateSchedule::PerUnit => "per-unit",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarlyStopping {
    pub patience: usize,
    pub min_delta: f64,
}

/// Every field is optional in serialized form; missing keys take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub arch: String,
    pub theta: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub schedule: UpdateSchedule,
    /// `None` trains for the full epoch budget.
    pub early_stopping: Option<EarlyStopping>,
    /// Share of the training split held out for validation accuracy.
    pub validation_fraction: f64,
    /// Corruption applied to the training split before anything else.
    pub noise_profile: Option<NoiseProfile>,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        EarlyStopping {
            patience: 5,
            min_delta: 0.0,
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algorithm: Algorithm::IntFF,
            arch: "784,(100,50),(30,10)".into(),
            theta: DEFAULT_THETA,
            lr: 1e-3,
            batch_size: 64,
            epochs: 15,
            seed: 0,
            schedule: UpdateSchedule::PerBatch,
            early_stopping: None,
            validation_fraction: 0.1,
            noise_profile: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(0.0..=0.5).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction {} outside [0, 0.5]",
                self.validation_fraction
            )));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::Config(format!("theta must be positive, got {}", self.theta)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.early_stopping.is_some() && self.validation_fraction == 0.0 {
            return Err(Error::Config(
                "early stopping needs a validation_fraction above 0".into(),
            ));
        }
        if let Some(p) = &self.noise_profile {
            p.validate()?;
        }
        Ok(())
    }
}
