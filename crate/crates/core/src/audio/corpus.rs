//! Seeded synthetic speech-like corpus: harmonic tones with a random-walk F0 contour,
//! a slowly varying amplitude envelope and a white noise floor.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::buffer::{AudioBuffer, DEFAULT_SAMPLE_RATE};
use crate::dsp::{self, FeatureKind, FeatureTrack};
use crate::error::{Error, Result};

fn default_amp_min() -> f64 {
    0.3
}
fn default_amp_max() -> f64 {
    0.9
}
fn default_sample_rate() -> u32 {
    DEFAULT_SAMPLE_RATE
}
fn default_f0_step() -> f64 {
    0.06
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_utterances: usize,
    pub duration_s: f64,
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub n_harmonics: usize,
    /// Noise floor RMS in dB relative to full scale; `None` disables noise.
    pub noise_db: Option<f64>,
    pub seed: u64,
    #[serde(default = "default_amp_min")]
    pub amp_min: f64,
    #[serde(default = "default_amp_max")]
    pub amp_max: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    /// Standard deviation of the log-F0 step between 50 ms control points.
    #[serde(default = "default_f0_step")]
    pub f0_step: f64,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_utterances == 0 {
            return Err(Error::config("corpus needs at least one utterance"));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::config("duration_s must be positive"));
        }
        if !(self.f0_min_hz > 0.0) || self.f0_max_hz < self.f0_min_hz {
            return Err(Error::config("need 0 < f0_min_hz <= f0_max_hz"));
        }
        if self.n_harmonics == 0 {
            return Err(Error::config("n_harmonics must be at least 1"));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.f0_max_hz * self.n_harmonics as f64 >= nyquist {
            return Err(Error::config(format!(
                "highest harmonic {} Hz reaches Nyquist {nyquist} Hz",
                self.f0_max_hz * self.n_harmonics as f64
            )));
        }
        if !(self.amp_min > 0.0 && self.amp_min <= self.amp_max && self.amp_max <= 1.0) {
            return Err(Error::config("need 0 < amp_min <= amp_max <= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticUtterance {
    pub audio: AudioBuffer,
    /// Generator F0 at each analysis frame center (log Hz, all voiced).
    pub f0: FeatureTrack,
    /// Analytic per-band energy (dB) at each analysis frame center.
    pub band_energy: FeatureTrack,
}

/// Piecewise-linear interpolation of control points spaced `interval` samples apart.
fn interpolate(points: &[f64], interval: usize, n: usize) -> Vec<f64> {
    (0..n)
        .map(|t| {
            let pos = t as f64 / interval as f64;
            let i = (pos.floor() as usize).min(points.len() - 2);
            let frac = pos - i as f64;
            points[i] * (1.0 - frac) + points[i + 1] * frac
        })
        .collect()
}

fn reflect(mut v: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    for _ in 0..8 {
        if v < lo {
            v = 2.0 * lo - v;
        } else if v > hi {
            v = 2.0 * hi - v;
        } else {
            break;
        }
    }
    v.clamp(lo, hi)
}

pub fn synth_harmonic_corpus(spec: &CorpusSpec) -> Result<Vec<SyntheticUtterance>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.n_utterances)
        .map(|_| synth_utterance(spec, &mut rng))
        .collect()
}

fn synth_utterance(spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> Result<SyntheticUtterance> {
    let sr = spec.sample_rate;
    let n = (spec.duration_s * sr as f64).round() as usize;
    let f0_interval = (0.05 * sr as f64) as usize;
    let amp_interval = (0.1 * sr as f64) as usize;

    let (lo, hi) = (spec.f0_min_hz.ln(), spec.f0_max_hz.ln());
    let step = Normal::new(0.0, spec.f0_step.max(0.0)).map_err(|e| Error::config(e.to_string()))?;
    let n_f0_points = n / f0_interval + 2;
    let mut log_f0 = Vec::with_capacity(n_f0_points);
    let mut cur = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    for _ in 0..n_f0_points {
        log_f0.push(cur);
        cur = reflect(cur + step.sample(rng), lo, hi);
    }
    let n_amp_points = n / amp_interval + 2;
    let amp_points: Vec<f64> = (0..n_amp_points)
        .map(|_| {
            if spec.amp_max > spec.amp_min {
                rng.gen_range(spec.amp_min..=spec.amp_max)
            } else {
                spec.amp_min
            }
        })
        .collect();

    let f0: Vec<f64> = interpolate(&log_f0, f0_interval, n)
        .into_iter()
        .map(f64::exp)
        .collect();
    let amp = interpolate(&amp_points, amp_interval, n);

    let weights: Vec<f64> = (1..=spec.n_harmonics).map(|h| 1.0 / h as f64).collect();
    let norm: f64 = weights.iter().sum();
    let noise_rms = spec.noise_db.map(|db| 10f64.powf(db / 20.0));
    let noise = Normal::new(0.0, noise_rms.unwrap_or(0.0)).map_err(|e| Error::config(e.to_string()))?;

    let mut phase = 0.0f64;
    let mut samples = Vec::with_capacity(n);
    for t in 0..n {
        let mut v = 0.0;
        for (h, w) in weights.iter().enumerate() {
            v += w * ((h + 1) as f64 * phase).sin();
        }
        v *= amp[t] / norm;
        if noise_rms.is_some() {
            v += noise.sample(rng);
        }
        samples.push(v.clamp(-1.0, 1.0) as f32);
        phase = (phase + 2.0 * PI * f0[t] / sr as f64) % (2.0 * PI);
    }
    let audio = AudioBuffer::new(samples, sr)?;

    let framing = dsp::analysis_framing(sr);
    let times = framing.center_times(n, sr);
    let centers: Vec<usize> = (0..times.len()).map(|i| framing.center(i)).collect();
    let f0_values: Vec<f64> = centers.iter().map(|&c| f0[c].ln()).collect();
    let f0_track = FeatureTrack::new(
        FeatureKind::LogF0,
        times.clone(),
        f0_values,
        1,
        Some(vec![true; centers.len()]),
    )?;

    let bands = dsp::band_edges(sr);
    let noise_power = noise_rms.map_or(0.0, |r| r * r);
    let mut band_values = Vec::with_capacity(centers.len() * bands.len());
    for &c in &centers {
        for &(lo_hz, hi_hz) in &bands {
            let mut p = noise_power * (hi_hz - lo_hz) / (sr as f64 / 2.0);
            for (h, w) in weights.iter().enumerate() {
                let f = (h + 1) as f64 * f0[c];
                if f >= lo_hz && f < hi_hz {
                    let a = amp[c] * w / norm;
                    p += a * a / 2.0;
                }
            }
            band_values.push(dsp::power_to_db(p));
        }
    }
    let band_track = FeatureTrack::new(FeatureKind::BandEnergyDb, times, band_values, bands.len(), None)?;

    Ok(SyntheticUtterance {
        audio,
        f0: f0_track,
        band_energy: band_track,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn spec() -> CorpusSpec {
        CorpusSpec {
            n_utterances: 3,
            duration_s: 0.5,
            f0_min_hz: 100.0,
            f0_max_hz: 300.0,
            n_harmonics: 8,
            noise_db: Some(-50.0),
            seed: 7,
            amp_min: 0.3,
            amp_max: 0.9,
            sample_rate: 16_000,
            f0_step: 0.06,
        }
    }

    #[test]
    fn constant_f0_single_harmonic_is_a_sine() {
        let s = CorpusSpec {
            n_utterances: 1,
            f0_min_hz: 200.0,
            f0_max_hz: 200.0,
            n_harmonics: 1,
            noise_db: None,
            amp_min: 0.5,
            amp_max: 0.5,
            ..spec()
        };
        let u = &synth_harmonic_corpus(&s).unwrap()[0];
        for (t, &v) in u.audio.samples().iter().enumerate() {
            let want = 0.5 * (2.0 * PI * 200.0 * t as f64 / 16_000.0).sin();
            assert!((v as f64 - want).abs() < 1e-5, "t={t}");
        }
        for i in 0..u.f0.n_frames() {
            assert!((u.f0.f0_hz(i).unwrap() - 200.0).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = synth_harmonic_corpus(&spec()).unwrap();
        let b = synth_harmonic_corpus(&spec()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.audio, y.audio);
            assert_eq!(x.f0, y.f0);
        }
        let c = synth_harmonic_corpus(&CorpusSpec { seed: 8, ..spec() }).unwrap();
        assert_ne!(a[0].audio, c[0].audio);
    }

    #[test]
    fn f0_stays_in_range() {
        for u in synth_harmonic_corpus(&spec()).unwrap() {
            for i in 0..u.f0.n_frames() {
                let f = u.f0.f0_hz(i).unwrap();
                assert!((100.0 - 1e-6..=300.0 + 1e-6).contains(&f));
            }
        }
    }

    #[test]
    fn rejects_harmonics_past_nyquist() {
        let s = CorpusSpec {
            n_harmonics: 30,
            ..spec()
        };
        assert!(matches!(synth_harmonic_corpus(&s), Err(Error::Config(_))));
    }

    #[test]
    fn spec_json_uses_defaults() {
        let s: CorpusSpec = serde_json::from_str(
            r#"{"n_utterances":2,"duration_s":1.0,"f0_min_hz":100,"f0_max_hz":300,
                "n_harmonics":10,"noise_db":-40,"seed":1}"#,
        )
        .unwrap();
        assert_eq!(s.sample_rate, 16_000);
        assert_eq!(s.amp_max, 0.9);
    }
}
