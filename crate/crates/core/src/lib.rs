//! Probing and spectral analysis of WaveNet activations.

pub mod audio;
pub mod dsp;
pub mod error;
pub mod probes;
pub mod svd;
pub mod wavenet;

pub use error::{Error, Result};
