//! IIR section cascades: 2nd-order Butterworth band-pass filters and the
//! 2nd-order Linkwitz-Riley crossover built from first-order Butterworth sections.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One second-order section with `a0 = 1`, run in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    pub fn first_order(b0: f64, b1: f64, a1: f64) -> Self {
        Self {
            b: [b0, b1, 0.0],
            a: [a1, 0.0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + s1;
            s1 = b1 * input - a1 * y + s2;
            s2 = b2 * input - a2 * y;
            *v = y;
        }
    }

    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = 1.0 + z1 * self.a[0] + z2 * self.a[1];
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Single forward pass.
    #[default]
    Causal,
    /// Forward then time-reversed pass; squared magnitude, zero phase.
    ZeroPhase,
}

/// Cascade of sections sharing one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionCascade {
    pub sections: Vec<Biquad>,
    pub sample_rate: f64,
}

impl SectionCascade {
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.filter_in_place(&mut y);
        y
    }

    pub fn filter_in_place(&self, y: &mut [f64]) {
        for s in &self.sections {
            s.run(y);
        }
    }

    pub fn filter_zero_phase(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.filter(x);
        y.reverse();
        self.filter_in_place(&mut y);
        y.reverse();
        y
    }

    pub fn apply(&self, x: &[f64], mode: FilterMode) -> Vec<f64> {
        match mode {
            FilterMode::Causal => self.filter(x),
            FilterMode::ZeroPhase => self.filter_zero_phase(x),
        }
    }

    /// Complex single-pass frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let omega = 2.0 * PI * freq_hz / self.sample_rate;
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(omega))
    }

    pub fn impulse_response(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        if n > 0 {
            x[0] = 1.0;
        }
        self.filter(&x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterSpec {
    ButterworthBandpass2nd { low_hz: f64, high_hz: f64 },
    LinkwitzRiley2nd { cutoff_hz: f64 },
}

impl FilterSpec {
    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        let nyq = sample_rate / 2.0;
        let ok = |f: f64| f > 0.0 && f < nyq;
        match *self {
            FilterSpec::ButterworthBandpass2nd { low_hz, high_hz } => {
                if !(ok(low_hz) && ok(high_hz) && low_hz < high_hz) {
                    return Err(Error::config(format!(
                        "band edges {low_hz}..{high_hz} Hz must satisfy 0 < low < high < {nyq} Hz"
                    )));
                }
            }
            FilterSpec::LinkwitzRiley2nd { cutoff_hz } => {
                if !ok(cutoff_hz) {
                    return Err(Error::config(format!(
                        "crossover cutoff {cutoff_hz} Hz must lie in (0, {nyq}) Hz"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Band-pass from a 2nd-order Butterworth low-pass prototype (4 poles in total),
/// bilinear transform with both edges prewarped, unity gain at the geometric center.
pub fn butterworth_bandpass(low_hz: f64, high_hz: f64, sample_rate: f64) -> Result<SectionCascade> {
    FilterSpec::ButterworthBandpass2nd { low_hz, high_hz }.validate(sample_rate)?;
    let fs2 = 2.0 * sample_rate;
    let warp = |f: f64| fs2 * (PI * f / sample_rate).tan();
    let (w1, w2) = (warp(low_hz), warp(high_hz));
    let bw = w2 - w1;
    let w0 = (w1 * w2).sqrt();

    // prototype pole in the upper half plane; its conjugate yields the mirrored sections
    let proto = Complex64::from_polar(1.0, 0.75 * PI);
    let half = proto * bw / 2.0;
    let disc = (half * half - w0 * w0).sqrt();
    let mut sections = Vec::with_capacity(2);
    for s in [half + disc, half - disc] {
        let z = (fs2 + s) / (fs2 - s);
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-2.0 * z.re, z.norm_sqr()],
        });
    }
    let mut cascade = SectionCascade {
        sections,
        sample_rate,
    };
    let center_hz = sample_rate / PI * (w0 / fs2).atan();
    let gain = cascade.response(center_hz).norm();
    for b in cascade.sections[0].b.iter_mut() {
        *b /= gain;
    }
    Ok(cascade)
}

/// Complementary low/high pair whose sum is allpass.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossover {
    pub low: SectionCascade,
    pub high: SectionCascade,
    pub cutoff_hz: f64,
}

impl Crossover {
    pub fn linkwitz_riley_2nd(cutoff_hz: f64, sample_rate: f64) -> Result<Self> {
        FilterSpec::LinkwitzRiley2nd { cutoff_hz }.validate(sample_rate)?;
        let k = (PI * cutoff_hz / sample_rate).tan();
        let a1 = (k - 1.0) / (k + 1.0);
        let lp = Biquad::first_order(k / (1.0 + k), k / (1.0 + k), a1);
        let hp = Biquad::first_order(1.0 / (1.0 + k), -1.0 / (1.0 + k), a1);
        // inverted polarity on the high branch turns the sum into a first-order allpass
        let hp_inv = Biquad::first_order(-hp.b[0], -hp.b[1], a1);
        Ok(Self {
            low: SectionCascade {
                sections: vec![lp, lp],
                sample_rate,
            },
            high: SectionCascade {
                sections: vec![hp, hp_inv],
                sample_rate,
            },
            cutoff_hz,
        })
    }

    pub fn split(&self, x: &[f64], mode: FilterMode) -> (Vec<f64>, Vec<f64>) {
        (self.low.apply(x, mode), self.high.apply(x, mode))
    }

    /// Response of `low + high` at `freq_hz`.
    pub fn sum_response(&self, freq_hz: f64) -> Complex64 {
        self.low.response(freq_hz) + self.high.response(freq_hz)
    }
}

/// Baseband / wideband split of any finite sequence with a 2nd-order Linkwitz-Riley crossover.
pub fn linkwitz_riley_split(
    x: &[f64],
    cutoff_hz: f64,
    sample_rate: f64,
    mode: FilterMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("crossover input contains non-finite values"));
    }
    Ok(Crossover::linkwitz_riley_2nd(cutoff_hz, sample_rate)?.split(x, mode))
}
