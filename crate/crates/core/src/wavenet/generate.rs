//! Sample-by-sample generation from an unconditioned model.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{Model, Real};
use crate::audio::{QuantizedSignal, MIDPOINT_CODE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    Argmax,
    Temperature(f64),
}

/// Per-step network evaluation with a history ring for every layer input.
struct Stepper<'a, F> {
    model: &'a Model<F>,
    /// `history[l]` holds inputs of layer `l` for all past steps.
    history: Vec<Vec<Array1<F>>>,
}

impl<'a, F: Real> Stepper<'a, F> {
    fn new(model: &'a Model<F>) -> Self {
        Stepper {
            model,
            history: vec![Vec::new(); model.n_layers()],
        }
    }

    /// Feed one code, return the logits for the next.
    fn push(&mut self, code: u8) -> Array1<F> {
        let m = self.model;
        let w = m.width();
        let mut h = m.embedding.row(code as usize).to_owned();
        let mut skip = Array1::<F>::zeros(m.config.skip_width);
        for (l, layer) in m.layers.iter().enumerate() {
            self.history[l].push(h.clone());
            let hist = &self.history[l];
            let t = hist.len() - 1;
            let mut z = layer.conv_bias.clone();
            for (n, tap) in layer.conv.iter().enumerate() {
                let lag = n * layer.dilation;
                if lag <= t {
                    z += &hist[t - lag].dot(tap);
                }
            }
            let gated: Array1<F> = (0..w)
                .map(|j| z[j].tanh() * (F::one() / (F::one() + (-z[w + j]).exp())))
                .collect();
            skip += &(gated.dot(&layer.skip) + &layer.skip_bias);
            h = &h + &gated.dot(&layer.residual) + &layer.residual_bias;
        }
        let relu = |a: Array1<F>| a.mapv(|v| if v > F::zero() { v } else { F::zero() });
        let hidden = relu(skip).dot(&m.post_hidden) + &m.post_hidden_bias;
        relu(hidden).dot(&m.output) + &m.output_bias
    }
}

fn draw<F: Real>(logits: &Array1<F>, sampling: Sampling, rng: &mut ChaCha8Rng) -> u8 {
    let vals: Vec<f64> = logits.iter().map(|v| v.to_f64().unwrap()).collect();
    match sampling {
        Sampling::Argmax => vals
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
            .0 as u8,
        Sampling::Temperature(temp) => {
            let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let p: Vec<f64> = vals.iter().map(|v| ((v - m) / temp).exp()).collect();
            let total: f64 = p.iter().sum();
            let mut u = rng.gen::<f64>() * total;
            for (i, pi) in p.iter().enumerate() {
                u -= pi;
                if u <= 0.0 {
                    return i as u8;
                }
            }
            255
        }
    }
}

/// Generate `n_samples` codes, continuing from `prompt` (or mid-scale silence).
pub fn generate<F: Real>(
    model: &Model<F>,
    prompt: &[u8],
    n_samples: usize,
    sampling: Sampling,
    seed: u64,
    sample_rate: u32,
) -> Result<QuantizedSignal> {
    if n_samples == 0 {
        return Err(Error::invalid("number of samples to generate must be positive"));
    }
    if let Sampling::Temperature(t) = sampling {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::config("sampling temperature must be positive"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stepper = Stepper::new(model);
    let seed_codes: Vec<u8> = if prompt.is_empty() { vec![MIDPOINT_CODE] } else { prompt.to_vec() };
    let mut logits = Array1::zeros(0);
    for &c in &seed_codes {
        logits = stepper.push(c);
    }
    let mut out = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let code = draw(&logits, sampling, &mut rng);
        out.push(code);
        if i + 1 < n_samples {
            logits = stepper.push(code);
        }
    }
    Ok(QuantizedSignal { codes: out, sample_rate })
}

/// Logits for every prefix of `codes`, computed step by step (matches teacher forcing).
pub fn incremental_logits<F: Real>(model: &Model<F>, codes: &[u8]) -> Array2<F> {
    let mut stepper = Stepper::new(model);
    let mut out = Array2::zeros((codes.len(), model.config.quantization_levels));
    for (t, &c) in codes.iter().enumerate() {
        out.row_mut(t).assign(&stepper.push(c));
    }
    out
}
