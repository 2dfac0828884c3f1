//! Autocorrelation F0 tracker: normalized cross-correlation per lag, the first strong
//! local peak in the search range, parabolic refinement, and a voicing gate.

use super::power_to_db;
use super::track::{FeatureKind, FeatureTrack, Framing};
use crate::audio::AudioBuffer;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Params {
    pub min_hz: f64,
    pub max_hz: f64,
    pub window_ms: f64,
    pub hop_ms: f64,
    /// Minimum normalized correlation at the chosen peak.
    pub voicing_threshold: f64,
    /// Frames quieter than this RMS level (dBFS) are unvoiced.
    pub silence_db: f64,
    /// A local peak is accepted once it reaches this fraction of the best peak.
    pub peak_fraction: f64,
}

impl Default for F0Params {
    fn default() -> Self {
        Self {
            min_hz: 60.0,
            max_hz: 500.0,
            window_ms: 32.0,
            hop_ms: 5.0,
            voicing_threshold: 0.5,
            silence_db: -50.0,
            peak_fraction: 0.9,
        }
    }
}

/// Normalized correlation between a frame and its lagged copy, for lags `lo..=hi`.
fn nccf(frame: &[f64], lo: usize, hi: usize) -> Vec<f64> {
    let n = frame.len();
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in frame.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v * v;
    }
    (lo..=hi)
        .map(|lag| {
            if lag >= n {
                return 0.0;
            }
            let m = n - lag;
            let dot: f64 = frame[..m].iter().zip(&frame[lag..]).map(|(a, b)| a * b).sum();
            let e0 = prefix[m];
            let e1 = prefix[n] - prefix[lag];
            let denom = (e0 * e1).sqrt();
            if denom > 0.0 {
                dot / denom
            } else {
                0.0
            }
        })
        .collect()
}

/// Returns (period in samples, peak correlation) for one frame.
pub fn estimate_period(frame: &[f64], sample_rate: u32, params: &F0Params) -> Option<(f64, f64)> {
    let sr = sample_rate as f64;
    let min_lag = ((sr / params.max_hz).floor() as usize).max(2);
    let max_lag = (sr / params.min_hz).ceil() as usize;
    if max_lag + 2 >= frame.len() {
        return None;
    }
    let mean = frame.iter().sum::<f64>() / frame.len() as f64;
    let centered: Vec<f64> = frame.iter().map(|v| v - mean).collect();
    // one extra lag on each side so peaks at the range ends can be refined
    let r = nccf(&centered, min_lag - 1, max_lag + 1);
    let at = |lag: usize| r[lag + 1 - min_lag];

    let peaks: Vec<usize> = (min_lag..=max_lag)
        .filter(|&l| at(l) > at(l - 1) && at(l) >= at(l + 1))
        .collect();
    let best = peaks.iter().map(|&l| at(l)).fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return None;
    }
    let lag = *peaks.iter().find(|&&l| at(l) >= params.peak_fraction * best)?;
    let (a, b, c) = (at(lag - 1), at(lag), at(lag + 1));
    let curvature = a - 2.0 * b + c;
    let delta = if curvature < 0.0 {
        (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Some((lag as f64 + delta, b))
}

pub fn f0_estimate(audio: &AudioBuffer) -> Result<FeatureTrack> {
    f0_estimate_with(audio, &F0Params::default())
}

pub fn f0_estimate_with(audio: &AudioBuffer, params: &F0Params) -> Result<FeatureTrack> {
    let sr = audio.sample_rate();
    let framing = Framing::from_ms(params.window_ms, params.hop_ms, sr);
    let x = audio.samples_f64();
    let n_frames = framing.n_frames(x.len());
    if n_frames == 0 {
        return Ok(FeatureTrack::empty(FeatureKind::LogF0, 1));
    }
    let mut values = Vec::with_capacity(n_frames);
    let mut voiced = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let s = framing.start(f);
        let frame = &x[s..s + framing.window];
        let rms_db = power_to_db(frame.iter().map(|v| v * v).sum::<f64>() / frame.len() as f64);
        let est = if rms_db >= params.silence_db {
            estimate_period(frame, sr, params)
        } else {
            None
        };
        match est {
            Some((period, peak)) if peak >= params.voicing_threshold => {
                values.push((sr as f64 / period).ln());
                voiced.push(true);
            }
            _ => {
                values.push(0.0);
                voiced.push(false);
            }
        }
    }
    FeatureTrack::new(
        FeatureKind::LogF0,
        framing.center_times(x.len(), sr),
        values,
        1,
        Some(voiced),
    )
}
