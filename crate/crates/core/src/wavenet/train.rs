//! Adam training on next-sample cross-entropy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::receptive_field;
use super::model::{real, Model, Real};
use crate::audio::QuantizedSignal;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Predicted samples per crop. `None` trains on whole utterances.
    pub segment_len: Option<usize>,
    /// Crops whose gradients are averaged per step.
    pub batch_size: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            steps: 1000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            segment_len: Some(1024),
            batch_size: 1,
        }
    }
}

pub struct Adam<F> {
    m: Model<F>,
    v: Model<F>,
    t: i32,
    lr: F,
    beta1: F,
    beta2: F,
    eps: F,
}

impl<F: Real> Adam<F> {
    pub fn new(model: &Model<F>, settings: &TrainSettings) -> Self {
        Adam {
            m: model.zeros_like(),
            v: model.zeros_like(),
            t: 0,
            lr: real(settings.learning_rate),
            beta1: real(settings.beta1),
            beta2: real(settings.beta2),
            eps: real(settings.epsilon),
        }
    }

    pub fn step(&mut self, model: &mut Model<F>, grad: &Model<F>) {
        self.t += 1;
        let c1 = F::one() - self.beta1.powi(self.t);
        let c2 = F::one() - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let grads = grad.named_tensors();
        for (((p, (_, g)), m), v) in model
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (F::one() - b1) * g[i];
                v[i] = b2 * v[i] + (F::one() - b2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] = p[i] - lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean batch loss (nats per sample) after each step.
    pub losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self, window: usize) -> f64 {
        let n = window.clamp(1, self.losses.len().max(1));
        let tail = &self.losses[self.losses.len().saturating_sub(n)..];
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    }
}

/// Pick a crop: `(start, loss_from)` such that up to one receptive field of real history
/// precedes the first scored prediction.
fn crop(rng: &mut ChaCha8Rng, len: usize, segment: Option<usize>, context: usize) -> (usize, usize, usize) {
    match segment {
        Some(seg) if seg + 1 < len => {
            let first_pred = rng.gen_range(0..len - seg);
            let start = first_pred.saturating_sub(context);
            let end = first_pred + seg + 1;
            (start, end, first_pred - start)
        }
        _ => (0, len, 0),
    }
}

/// Train in place. Stops with [`Error::NonFinite`] as soon as the loss or any parameter
/// goes non-finite.
pub fn train<F: Real>(model: &mut Model<F>, corpus: &[QuantizedSignal], settings: &TrainSettings) -> Result<TrainReport> {
    if corpus.iter().all(|u| u.codes.len() < 2) {
        return Err(Error::insufficient("samples in some training utterance", 2, 0));
    }
    if settings.batch_size == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    let usable: Vec<&QuantizedSignal> = corpus.iter().filter(|u| u.codes.len() >= 2).collect();
    let context = receptive_field(&model.config) - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut adam = Adam::new(model, settings);
    let mut losses = Vec::with_capacity(settings.steps);
    let inv_batch = real::<F>(1.0 / settings.batch_size as f64);
    for step in 0..settings.steps {
        let mut total = 0.0;
        let mut acc: Option<Model<F>> = None;
        for _ in 0..settings.batch_size {
            let utt = usable[rng.gen_range(0..usable.len())];
            let (start, end, loss_from) = crop(&mut rng, utt.codes.len(), settings.segment_len, context);
            let (loss, grad) = model.loss_and_grad(&utt.codes[start..end], loss_from)?;
            total += loss;
            match &mut acc {
                None => acc = Some(grad),
                Some(a) => {
                    for (d, (_, s)) in a.tensors_mut().into_iter().zip(grad.named_tensors()) {
                        d.iter_mut().zip(s).for_each(|(x, y)| *x = *x + *y);
                    }
                }
            }
        }
        let mut grad = acc.expect("batch is non-empty");
        if settings.batch_size > 1 {
            grad.tensors_mut().into_iter().for_each(|t| t.iter_mut().for_each(|v| *v = *v * inv_batch));
        }
        let loss = total / settings.batch_size as f64;
        if !loss.is_finite() {
            let tensor = grad.first_non_finite().or_else(|| model.first_non_finite()).unwrap_or_else(|| "loss".into());
            return Err(Error::NonFinite { tensor, step });
        }
        adam.step(model, &grad);
        if let Some(tensor) = model.first_non_finite() {
            return Err(Error::NonFinite { tensor, step });
        }
        losses.push(loss);
    }
    Ok(TrainReport { losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{mu_law_encode, AudioBuffer};
    use crate::wavenet::config::ModelConfig;

    fn tiny() -> ModelConfig {
        ModelConfig {
            layer_width: 8,
            dilations_per_block: vec![1, 2, 4],
            n_blocks: 1,
            conv_size: 1,
            skip_width: 8,
            post_width: 16,
            quantization_levels: 256,
        }
    }

    fn sine_codes() -> QuantizedSignal {
        let x: Vec<f32> = (0..800).map(|t| 0.6 * (t as f32 * 0.07).sin()).collect();
        mu_law_encode(&AudioBuffer::new(x, 16000).unwrap()).unwrap()
    }

    #[test]
    fn loss_decreases_and_is_deterministic() {
        let corpus = vec![sine_codes()];
        let settings = TrainSettings { steps: 60, learning_rate: 3e-3, segment_len: Some(200), seed: 1, ..Default::default() };
        let mut a = Model::<f32>::init(&tiny(), 1).unwrap();
        let before = a.loss(&corpus[0].codes, 0).unwrap();
        let ra = train(&mut a, &corpus, &settings).unwrap();
        let after = a.loss(&corpus[0].codes, 0).unwrap();
        assert!(after < before - 1.0, "{before} -> {after}");

        let mut b = Model::<f32>::init(&tiny(), 1).unwrap();
        let rb = train(&mut b, &corpus, &settings).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
    }

    #[test]
    fn nan_weights_are_reported() {
        let corpus = vec![sine_codes()];
        let mut m = Model::<f32>::init(&tiny(), 1).unwrap();
        m.output_bias[3] = f32::NAN;
        let err = train(&mut m, &corpus, &TrainSettings { steps: 3, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::NonFinite { step: 0, .. }), "{err}");
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut m = Model::<f64>::zeros(&tiny()).unwrap();
        let mut g = m.zeros_like();
        g.output_bias[0] = 5.0;
        g.output_bias[1] = -0.01;
        let mut opt = Adam::new(&m, &TrainSettings { learning_rate: 0.1, ..Default::default() });
        opt.step(&mut m, &g);
        assert!((m.output_bias[0] + 0.1).abs() < 1e-6);
        assert!((m.output_bias[1] - 0.1).abs() < 1e-5);
        assert_eq!(m.output_bias[2], 0.0);
    }
}
