//! Protective-behavior detection from multi-channel wearable-sensor time
//! series: segmentation, multi-rater label fusion, augmentation, a
//! from-scratch LSTM classifier and cross-validated evaluation.

pub mod augment;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod labelfuse;
pub mod model;
pub mod rng;
pub mod windowing;

pub use augment::{AugmentMethod, AugmentSpec};
pub use dataio::{Activity, ActivityInstance, Cohort, Dataset, DatasetManifest, Sequence, Trial};
pub use error::{Error, Result};
pub use labelfuse::LabelScheme;
pub use model::{Architecture, Checkpoint, HeadKind, ModelConfig, TrainConfig};
pub use windowing::{Frame, Padding, WindowSpec};
