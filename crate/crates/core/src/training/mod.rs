//! Training loops, evaluation in physical units and the harmonic
//! interpolation baseline.

mod baseline;
mod eval;
mod fit;
mod optimizer;

pub use baseline::{baseline_interpolate, HarmonicBaseline};
pub use eval::{evaluate, evaluate_trial, trial_seed, EvalConfig, Estimator, Gatres, Metrics, TrialMetrics, MAPE_FLOOR};
pub use fit::{fine_tune, pretrain_multi, train, TrainHistory, TrainOutcome, TrainTiming};
pub use optimizer::{OptimizerKind, OptimizerState};

use crate::gnn::{GnnError, LossKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub masking_ratio: f64,
    pub seed: u64,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// Global L2 norm above which a batch gradient is rescaled.
    pub clip_norm: f64,
    pub loss: LossKind,
    /// Learning-rate multiplier applied by [`fine_tune`].
    pub fine_tune_factor: f64,
    /// Mask draws per validation snapshot.
    pub validation_trials: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 16,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            masking_ratio: 0.95,
            seed: 0,
            patience: 8,
            clip_norm: 1.0,
            loss: LossKind::Mae,
            fine_tune_factor: 0.1,
            validation_trials: 2,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<(), TrainingError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = self.batch_size > 0
            && positive(self.learning_rate)
            && self.masking_ratio > 0.0
            && self.masking_ratio < 1.0
            && self.patience > 0
            && positive(self.clip_norm)
            && positive(self.fine_tune_factor)
            && self.validation_trials > 0;
        if ok {
            Ok(())
        } else {
            Err(TrainingError::InvalidConfig(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("dataset {0} has too few snapshots to train on")]
    EmptyDataset(String),
    #[error("training diverged at epoch {epoch}, step {step}")]
    DivergedTraining { epoch: usize, step: usize },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("interpolation needs at least one sensor")]
    NoSensors,
    #[error(transparent)]
    Gnn(#[from] GnnError),
}
