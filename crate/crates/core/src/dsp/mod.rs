//! Reference features computed from the input audio.

mod band;
mod f0;
mod filter;
mod lpc;
mod stft;
mod track;

pub use band::{band_energy_db, band_energy_db_with, band_filterbank};
pub use f0::{estimate_period, f0_estimate, f0_estimate_with, F0Params};
pub use filter::{
    butterworth_bandpass, linkwitz_riley_split, Biquad, Crossover, FilterMode, FilterSpec,
    SectionCascade,
};
pub use lpc::{autocorrelation, levinson_durbin, lpc_fit, LpcFit, LpcModel, DEFAULT_LPC_ORDER};
pub use stft::{
    blackman, narrowband_spectrogram, stft_magnitude, wideband_spectrogram, Stft,
    NARROWBAND_HOP_MS, NARROWBAND_WINDOW_MS, WIDEBAND_HOP_MS, WIDEBAND_WINDOW_MS,
};
pub use track::{FeatureKind, FeatureTrack, Framing, WNFT_MAGIC, WNFT_VERSION};

pub const DB_FLOOR: f64 = -100.0;
pub const N_BANDS: usize = 20;
pub const ANALYSIS_WINDOW_MS: f64 = 32.0;
pub const ANALYSIS_HOP_MS: f64 = 5.0;
/// Lowest band edge; a band-pass cannot start at 0 Hz.
pub const BAND_EDGE_MARGIN_HZ: f64 = 30.0;
pub const CROSSOVER_HZ: f64 = 80.0;

/// 32 ms frames every 5 ms, shared by F0 and band energy.
pub fn analysis_framing(sample_rate: u32) -> Framing {
    Framing::from_ms(ANALYSIS_WINDOW_MS, ANALYSIS_HOP_MS, sample_rate)
}

/// Contiguous equal-width bands from 0 Hz to Nyquist; the outer edges are pulled in
/// by [`BAND_EDGE_MARGIN_HZ`].
pub fn band_edges(sample_rate: u32) -> Vec<(f64, f64)> {
    let nyq = sample_rate as f64 / 2.0;
    let width = nyq / N_BANDS as f64;
    (0..N_BANDS)
        .map(|c| {
            let lo = (c as f64 * width).max(BAND_EDGE_MARGIN_HZ);
            let hi = ((c + 1) as f64 * width).min(nyq - BAND_EDGE_MARGIN_HZ);
            (lo, hi)
        })
        .collect()
}

pub fn power_to_db(p: f64) -> f64 {
    if p > 0.0 {
        (10.0 * p.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}
