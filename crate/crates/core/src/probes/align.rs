//! Sampling per-step activations at feature frame centres.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::wavenet::ActivationTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedFrames {
    /// One row per kept frame.
    pub rows: Array2<f64>,
    /// Indices of the kept frames in the input frame list.
    pub frames: Vec<usize>,
    /// Frames whose centre falls past the last stored step.
    pub dropped: usize,
}

/// Stored step nearest to `time_s`, if within the capture.
pub fn nearest_step(time_s: f64, sample_rate: u32, decimation: usize, n_steps: usize) -> Option<usize> {
    if !(time_s >= 0.0) {
        return None;
    }
    let step = (time_s * sample_rate as f64 / decimation as f64).round() as usize;
    (step < n_steps).then_some(step)
}

pub(crate) fn align_matrix(
    m: ArrayView2<f32>,
    decimation: usize,
    frame_times: &[f64],
    sample_rate: u32,
) -> AlignedFrames {
    let mut frames = Vec::with_capacity(frame_times.len());
    let mut steps = Vec::with_capacity(frame_times.len());
    for (i, &t) in frame_times.iter().enumerate() {
        if let Some(s) = nearest_step(t, sample_rate, decimation, m.nrows()) {
            frames.push(i);
            steps.push(s);
        }
    }
    let mut rows = Array2::zeros((steps.len(), m.ncols()));
    for (mut r, &s) in rows.rows_mut().into_iter().zip(&steps) {
        r.assign(&m.row(s).mapv(f64::from));
    }
    AlignedFrames {
        rows,
        dropped: frame_times.len() - frames.len(),
        frames,
    }
}

/// Layer activations at the sample nearest each frame centre (seconds).
pub fn frame_align(acts: &ActivationTensor, layer: usize, frame_times: &[f64], sample_rate: u32) -> Result<AlignedFrames> {
    if layer >= acts.n_layers() {
        return Err(Error::invalid(format!(
            "layer {layer} out of range (dump holds {} layers)",
            acts.n_layers()
        )));
    }
    Ok(align_matrix(acts.layer(layer), acts.decimation, frame_times, sample_rate))
}

/// Filter and gate pre-activations of residual layer `layer` at frame centres.
pub fn frame_align_preactivations(
    acts: &ActivationTensor,
    layer: usize,
    frame_times: &[f64],
    sample_rate: u32,
) -> Result<AlignedFrames> {
    let m = acts.preactivation(layer).ok_or_else(|| {
        Error::invalid(format!("no pre-activations stored for layer {layer}"))
    })?;
    Ok(align_matrix(m, acts.decimation, frame_times, sample_rate))
}
