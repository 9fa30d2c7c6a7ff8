//! From-scratch LSTM classifier: cell, stacked and dual-stream networks,
//! softmax heads, backpropagation through time, Adam and checkpointing.

mod activation;
mod adam;
mod checkpoint;
mod gradcheck;
mod lstm;
mod network;
mod train;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dataio::{MOCAP_FEATURES, N_FEATURES};
use crate::error::{Error, Result};

pub use adam::{adam_step, adam_update, AdamState};
pub use checkpoint::Checkpoint;
pub use gradcheck::{gradient_check, gradient_check_fn, relative_error, GradCheckReport};
pub use lstm::{lstm_step, Gate, LstmLayer, LstmState, FORGET_BIAS_INIT};
pub use network::{
    argmax, cross_entropy, softmax, softmax_in_place, Batch, Head, Model, NetworkParams, Pass, StreamParams,
    Targets, CLAMP_MIN,
};
pub use train::{train, train_normalized, Normalizer, Target, TrainOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    Stacked,
    DualStream,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadKind {
    /// One distribution per frame from the last timestep.
    FrameLevel,
    /// One distribution per timestep.
    PerTimestep,
}

/// How the dual-stream model combines its streams at prediction time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fusion {
    #[default]
    ProbabilityMean,
    LogitMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub layers: usize,
    pub hidden: usize,
    pub mocap_hidden: usize,
    pub emg_hidden: usize,
    /// Dropout after every LSTM layer of the stacked model (training only).
    pub stacked_dropout: f64,
    /// Dropout after every LSTM layer of both dual-stream stacks.
    pub dual_dropout: f64,
    pub input_dim: usize,
    /// First sEMG column; the dual-stream model splits the input here.
    pub split_at: usize,
    pub classes: usize,
    pub head: HeadKind,
    pub fusion: Fusion,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            architecture: Architecture::Stacked,
            layers: 3,
            hidden: 32,
            mocap_hidden: 24,
            emg_hidden: 8,
            stacked_dropout: 0.0,
            dual_dropout: 0.5,
            input_dim: N_FEATURES,
            split_at: MOCAP_FEATURES,
            classes: 2,
            head: HeadKind::FrameLevel,
            fusion: Fusion::ProbabilityMean,
        }
    }
}

/// Column range, width and dropout of one LSTM stack.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamSpec {
    pub columns: Range<usize>,
    pub hidden: usize,
    pub dropout: f64,
}

impl ModelConfig {
    pub fn dual_stream() -> Self {
        ModelConfig {
            architecture: Architecture::DualStream,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid(format!("classes = {} (need at least 2)", self.classes)));
        }
        if self.layers == 0 {
            return Err(Error::invalid("layers must be at least 1"));
        }
        if self.input_dim == 0 {
            return Err(Error::invalid("input_dim must be positive"));
        }
        let dropouts = [self.stacked_dropout, self.dual_dropout];
        if dropouts.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(Error::invalid("dropout probabilities must lie in [0, 1)"));
        }
        match self.architecture {
            Architecture::Stacked if self.hidden == 0 => Err(Error::invalid("hidden must be positive")),
            Architecture::DualStream if self.mocap_hidden == 0 || self.emg_hidden == 0 => {
                Err(Error::invalid("stream hidden sizes must be positive"))
            }
            Architecture::DualStream if self.split_at == 0 || self.split_at >= self.input_dim => Err(
                Error::invalid(format!("split_at {} outside 1..{}", self.split_at, self.input_dim)),
            ),
            _ => Ok(()),
        }
    }

    pub fn streams(&self) -> Vec<StreamSpec> {
        match self.architecture {
            Architecture::Stacked => vec![StreamSpec {
                columns: 0..self.input_dim,
                hidden: self.hidden,
                dropout: self.stacked_dropout,
            }],
            Architecture::DualStream => vec![
                StreamSpec {
                    columns: 0..self.split_at,
                    hidden: self.mocap_hidden,
                    dropout: self.dual_dropout,
                },
                StreamSpec {
                    columns: self.split_at..self.input_dim,
                    hidden: self.emg_hidden,
                    dropout: self.dual_dropout,
                },
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    /// Stop after this many epochs without a lower training loss; 0 disables.
    pub patience: usize,
    pub seed: u64,
    /// Per-class loss weights; uniform when absent.
    pub class_weights: Option<Vec<f64>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 20,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 100,
            patience: 10,
            seed: 0,
            class_weights: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, classes: usize) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(Error::invalid("Adam constants need 0 <= beta < 1 and epsilon > 0"));
        }
        if let Some(w) = &self.class_weights {
            if w.len() != classes || w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::invalid(format!(
                    "class_weights needs {classes} finite non-negative entries"
                )));
            }
        }
        Ok(())
    }
}
