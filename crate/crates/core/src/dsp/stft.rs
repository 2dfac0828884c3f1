//! Blackman-windowed STFT magnitudes.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex64, FftPlanner};

use super::track::{FeatureKind, FeatureTrack, Framing};
use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

pub const WIDEBAND_WINDOW_MS: f64 = 4.0;
pub const WIDEBAND_HOP_MS: f64 = 2.0;
pub const NARROWBAND_WINDOW_MS: f64 = 32.0;
pub const NARROWBAND_HOP_MS: f64 = 5.0;

pub fn blackman(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let m = (n - 1) as f64;
    (0..n)
        .map(|i| {
            let x = i as f64 / m;
            0.42 - 0.5 * (2.0 * PI * x).cos() + 0.08 * (4.0 * PI * x).cos()
        })
        .collect()
}

pub struct Stft {
    pub framing: Framing,
    pub fft_size: usize,
    pub window: Vec<f64>,
}

impl Stft {
    pub fn new(window_ms: f64, hop_ms: f64, sample_rate: u32) -> Result<Self> {
        let framing = Framing::from_ms(window_ms, hop_ms, sample_rate);
        if framing.window < 8 {
            return Err(Error::config(format!(
                "analysis window of {} samples is shorter than 8",
                framing.window
            )));
        }
        Ok(Self {
            framing,
            fft_size: framing.window.next_power_of_two(),
            window: blackman(framing.window),
        })
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Complex spectra of every full frame, `[n_frames][n_bins]`.
    pub fn spectra(&self, x: &[f64]) -> Vec<Vec<Complex64>> {
        let n_frames = self.framing.n_frames(x.len());
        let fft = FftPlanner::new().plan_fft_forward(self.fft_size);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_size];
        (0..n_frames)
            .map(|f| {
                let start = self.framing.start(f);
                buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                for (i, w) in self.window.iter().enumerate() {
                    buf[i] = Complex64::new(x[start + i] * w, 0.0);
                }
                fft.process(&mut buf);
                buf[..self.n_bins()].to_vec()
            })
            .collect()
    }

    pub fn magnitude(&self, audio: &AudioBuffer, kind: FeatureKind) -> FeatureTrack {
        let x = audio.samples_f64();
        let spectra = self.spectra(&x);
        if spectra.is_empty() {
            return FeatureTrack::empty(kind, self.n_bins());
        }
        let times = self.framing.center_times(x.len(), audio.sample_rate());
        let values = spectra.iter().flat_map(|s| s.iter().map(|c| c.norm())).collect();
        FeatureTrack::new(kind, times, values, self.n_bins(), None).expect("consistent framing")
    }
}

/// Magnitude spectrogram; windows up to 8 ms are tagged wideband, longer ones narrowband.
/// A signal shorter than one window yields an empty track.
pub fn stft_magnitude(audio: &AudioBuffer, window_ms: f64, hop_ms: f64) -> Result<FeatureTrack> {
    let stft = Stft::new(window_ms, hop_ms, audio.sample_rate())?;
    let kind = if window_ms <= 8.0 {
        FeatureKind::WidebandMag
    } else {
        FeatureKind::NarrowbandMag
    };
    Ok(stft.magnitude(audio, kind))
}

pub fn wideband_spectrogram(audio: &AudioBuffer) -> Result<FeatureTrack> {
    stft_magnitude(audio, WIDEBAND_WINDOW_MS, WIDEBAND_HOP_MS)
}

pub fn narrowband_spectrogram(audio: &AudioBuffer) -> Result<FeatureTrack> {
    stft_magnitude(audio, NARROWBAND_WINDOW_MS, NARROWBAND_HOP_MS)
}
