//! Unconditioned WaveNet: model definition, training, capture and generation.

mod activations;
mod checkpoint;
mod config;
mod generate;
mod model;
mod network;
mod train;

pub use activations::{ActivationTensor, WNAC_MAGIC, WNAC_VERSION};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, WNCK_MAGIC, WNCK_VERSION};
pub use config::{receptive_field, receptive_field_ms, ModelConfig};
pub use generate::{generate, incremental_logits, Sampling};
pub use model::{LayerWeights, Model, Real};
pub use network::{dilated_conv, expected_amplitude, gated_residual_layer, softmax, Capture, ForwardCache, GatedOutput};
pub use train::{train, Adam, TrainReport, TrainSettings};
