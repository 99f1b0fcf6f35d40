//! GATRes: residual multi-head graph attention for masked pressure
//! estimation, with hand-written reverse-mode gradients.
//!
//! Node features are encoded to width `F`, passed through `B` residual
//! attention blocks and decoded to one value per node:
//!
//! ```text
//! x₀ = X W_in + b_in
//! x_{l+1} = x_l + act(GAT_l(x_l) + bias_l) W_out,l + b_out,l
//! ŷ = act(x_B W_d1 + b_d1) w_d2 + b_d2
//! ```
//!
//! Each attention head scores arc `u → v` as
//! `LeakyReLU(a_src·z_u + a_dst·z_v)`, normalizes the scores over the
//! in-arcs of `v` (self-loop included) and averages `z_u` with those
//! weights. Heads are concatenated.

mod checkpoint;
mod graph;
mod model;
mod sample;
mod weights;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use graph::ModelGraph;
pub use model::{
    backward, gat_layer_forward, gatres_forward, loss_and_gradient, AttentionTrace, Forward,
};
pub use sample::{mask_sample, masked_loss, observed_sample, sensor_count, LossKind, MaskOptions, MaskedSample};
pub use weights::{BlockWeights, ModelWeights};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Elu,
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative at pre-activation `x`.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - x.tanh().powi(2),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub blocks: usize,
    pub heads: usize,
    pub hidden: usize,
    pub negative_slope: f64,
    /// Add a learned edge-attribute term to the attention scores.
    pub use_edge_attr: bool,
    /// Append the normalized demand as a fourth input channel.
    pub demand_channel: bool,
    pub decoder_width: usize,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            blocks: 4,
            heads: 4,
            hidden: 32,
            negative_slope: 0.2,
            use_edge_attr: false,
            demand_channel: false,
            decoder_width: 32,
            activation: Activation::Elu,
        }
    }
}

impl ModelConfig {
    pub fn input_features(&self) -> usize {
        3 + usize::from(self.demand_channel)
    }

    pub fn head_width(&self) -> usize {
        self.hidden / self.heads.max(1)
    }

    pub fn check(&self) -> Result<(), GnnError> {
        let ok = self.blocks >= 1
            && self.heads >= 1
            && self.hidden >= 1
            && self.hidden.is_multiple_of(self.heads)
            && self.decoder_width >= 1
            && self.negative_slope.is_finite();
        if ok {
            Ok(())
        } else {
            Err(GnnError::ShapeMismatch(format!(
                "invalid model configuration {self:?}"
            )))
        }
    }
}

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite activation in {0}")]
    NonFiniteActivation(String),
    #[error("non-finite gradient for {0}")]
    NonFiniteGradient(String),
    #[error("no masked junction contributes to the loss")]
    EmptyMaskSupport,
    #[error("masking ratio {ratio} leaves no valid sensor layout for {junctions} junctions")]
    RatioOutOfRange { ratio: f64, junctions: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
