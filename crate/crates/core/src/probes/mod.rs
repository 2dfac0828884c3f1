//! Linear probes, rank statistics and the regressions behind them.

mod align;
mod linalg;
mod preact;
mod probe;
mod regression;
mod stats;

pub use align::{frame_align, frame_align_preactivations, nearest_step, AlignedFrames};
pub use linalg::solve_spd;
pub use preact::{preactivation_f0_correlation, theoretical_layer_limit, LayerLimit, PreactCorrelation};
pub use probe::{
    probe_feature, probe_waveform, waveform_references, FeatureUtterance, LayerSet, Metric, ProbeResult, ProbeTarget,
    Split, WaveformMode, WaveformOptions, WaveformReferences, WaveformUtterance, MIN_PROBE_FRAMES,
};
pub use regression::{
    is_divergence, is_regression_fit, mean_is_divergence, ols_fit, ols_fit_with, IsFit, Objective, RegressionModel,
    IS_NEWTON_ITERATIONS, RIDGE_SCALE, SPECTRAL_FLOOR,
};
pub use stats::{average_ranks, pearson, snr_db, spearman_rho, SNR_CAP_DB};
