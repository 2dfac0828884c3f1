use super::filter::{butterworth_bandpass, FilterMode, SectionCascade};
use super::track::{FeatureKind, FeatureTrack};
use super::{analysis_framing, band_edges, power_to_db};
use crate::audio::AudioBuffer;
use crate::error::Result;

pub fn band_filterbank(sample_rate: u32) -> Result<Vec<SectionCascade>> {
    band_edges(sample_rate)
        .into_iter()
        .map(|(lo, hi)| butterworth_bandpass(lo, hi, sample_rate as f64))
        .collect()
}

/// Per-frame log energy of each Butterworth band, zero-phase filtered, floored at -100 dB.
pub fn band_energy_db(audio: &AudioBuffer) -> Result<FeatureTrack> {
    band_energy_db_with(audio, FilterMode::ZeroPhase)
}

pub fn band_energy_db_with(audio: &AudioBuffer, mode: FilterMode) -> Result<FeatureTrack> {
    let sr = audio.sample_rate();
    let bank = band_filterbank(sr)?;
    let framing = analysis_framing(sr);
    let x = audio.samples_f64();
    let n_frames = framing.n_frames(x.len());
    let n_bands = bank.len();
    if n_frames == 0 {
        return Ok(FeatureTrack::empty(FeatureKind::BandEnergyDb, n_bands));
    }
    let mut values = vec![0.0; n_frames * n_bands];
    for (b, filt) in bank.iter().enumerate() {
        let y = filt.apply(&x, mode);
        for f in 0..n_frames {
            let s = framing.start(f);
            let ms = y[s..s + framing.window].iter().map(|v| v * v).sum::<f64>() / framing.window as f64;
            values[f * n_bands + b] = power_to_db(ms);
        }
    }
    FeatureTrack::new(
        FeatureKind::BandEnergyDb,
        framing.center_times(x.len(), sr),
        values,
        n_bands,
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::DB_FLOOR;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn tone(f: f64, amp: f64) -> AudioBuffer {
        let s = (0..16_000)
            .map(|t| (amp * (2.0 * PI * f * t as f64 / 16_000.0).sin()) as f32)
            .collect();
        AudioBuffer::new(s, 16_000).unwrap()
    }

    #[test]
    fn tone_lands_in_its_band() {
        let tr = band_energy_db(&tone(440.0, 0.5)).unwrap();
        assert_eq!(tr.dim, 20);
        for f in 0..tr.n_frames() {
            let row = tr.frame(f);
            let arg = (0..20).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(arg, 1, "frame {f}");
        }
    }

    #[test]
    fn silence_hits_floor() {
        let tr = band_energy_db(&AudioBuffer::new(vec![0.0; 4_000], 16_000).unwrap()).unwrap();
        assert!(tr.values.iter().all(|&v| v == DB_FLOOR));
    }

    #[test]
    fn white_noise_is_spread_evenly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = Normal::new(0.0, 0.1).unwrap();
        let s: Vec<f32> = (0..160_000).map(|_| n.sample(&mut rng) as f32).collect();
        let tr = band_energy_db(&AudioBuffer::new(s, 16_000).unwrap()).unwrap();
        // average power per band over the whole realization
        let mean_db: Vec<f64> = (0..20)
            .map(|b| {
                let p: f64 = (0..tr.n_frames()).map(|f| 10f64.powf(tr.frame(f)[b] / 10.0)).sum();
                10.0 * (p / tr.n_frames() as f64).log10()
            })
            .collect();
        let sel = &mean_db[2..=18];
        let spread = sel.iter().cloned().fold(f64::MIN, f64::max) - sel.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 6.0, "spread {spread} dB: {mean_db:?}");
    }

    #[test]
    fn doubling_gain_adds_6_02_db() {
        let a = band_energy_db(&tone(1_234.0, 0.25)).unwrap();
        let b = band_energy_db(&tone(1_234.0, 0.5)).unwrap();
        let want = 20.0 * 2f64.log10();
        for (x, y) in a.values.iter().zip(&b.values) {
            if *x > DB_FLOOR + 10.0 {
                assert!((y - x - want).abs() < 1e-3, "{x} {y}");
            }
        }
    }
}
