use ndarray::{Array1, Array2};
use ndarray::NdFloat;
use num_traits::FromPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::Result;

/// Scalar type the network can run in. Training uses `f32`; gradient checks use `f64`.
pub trait Real: NdFloat + FromPrimitive {}
impl<T: NdFloat + FromPrimitive> Real for T {}

pub(crate) fn real<F: Real>(v: f64) -> F {
    F::from_f64(v).expect("representable constant")
}

/// Weights of one gated residual layer.
///
/// Tap `n` multiplies the input delayed by `n * dilation`. Each tap maps a row vector of
/// `width` channels onto `2 * width` pre-activations: filter channels first, gate second.
/// There are no conditioning weights: the model is unconditioned.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights<F> {
    pub dilation: usize,
    /// `taps` matrices of shape `[width x 2 width]`.
    pub conv: Vec<Array2<F>>,
    pub conv_bias: Array1<F>,
    /// `[width x width]`
    pub residual: Array2<F>,
    pub residual_bias: Array1<F>,
    /// `[width x skip_width]`
    pub skip: Array2<F>,
    pub skip_bias: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    pub config: ModelConfig,
    /// One-hot code to `width` projection, `[256 x width]`.
    pub embedding: Array2<F>,
    pub layers: Vec<LayerWeights<F>>,
    /// `[skip_width x post_width]`
    pub post_hidden: Array2<F>,
    pub post_hidden_bias: Array1<F>,
    /// `[post_width x 256]`
    pub output: Array2<F>,
    pub output_bias: Array1<F>,
}

impl<F: Real> Model<F> {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let w = config.layer_width;
        let layers = config
            .dilations()
            .into_iter()
            .map(|dilation| LayerWeights {
                dilation,
                conv: (0..config.taps()).map(|_| Array2::zeros((w, 2 * w))).collect(),
                conv_bias: Array1::zeros(2 * w),
                residual: Array2::zeros((w, w)),
                residual_bias: Array1::zeros(w),
                skip: Array2::zeros((w, config.skip_width)),
                skip_bias: Array1::zeros(config.skip_width),
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            embedding: Array2::zeros((config.quantization_levels, w)),
            layers,
            post_hidden: Array2::zeros((config.skip_width, config.post_width)),
            post_hidden_bias: Array1::zeros(config.post_width),
            output: Array2::zeros((config.post_width, config.quantization_levels)),
            output_bias: Array1::zeros(config.quantization_levels),
        })
    }

    /// Weights uniform in `+-1/sqrt(fan_in)`, biases zero.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |a: &mut Array2<F>, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            a.iter_mut().for_each(|v| *v = real(rng.gen_range(-bound..bound)));
        };
        let w = config.layer_width;
        fill(&mut model.embedding, config.quantization_levels);
        for layer in &mut model.layers {
            for tap in &mut layer.conv {
                fill(tap, w * config.taps());
            }
            fill(&mut layer.residual, w);
            fill(&mut layer.skip, w);
        }
        fill(&mut model.post_hidden, config.skip_width);
        fill(&mut model.output, config.post_width);
        Ok(model)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config).expect("config already validated")
    }

    pub fn width(&self) -> usize {
        self.config.layer_width
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Parameter tensors in declaration order with stable names.
    pub fn named_tensors(&self) -> Vec<(String, &[F])> {
        let mut out: Vec<(String, &[F])> = vec![("embedding".into(), self.embedding.as_slice().unwrap())];
        for (i, l) in self.layers.iter().enumerate() {
            let i = i + 1;
            for (n, tap) in l.conv.iter().enumerate() {
                out.push((format!("layer{i}.conv{n}"), tap.as_slice().unwrap()));
            }
            out.push((format!("layer{i}.conv_bias"), l.conv_bias.as_slice().unwrap()));
            out.push((format!("layer{i}.residual"), l.residual.as_slice().unwrap()));
            out.push((format!("layer{i}.residual_bias"), l.residual_bias.as_slice().unwrap()));
            out.push((format!("layer{i}.skip"), l.skip.as_slice().unwrap()));
            out.push((format!("layer{i}.skip_bias"), l.skip_bias.as_slice().unwrap()));
        }
        out.push(("post_hidden".into(), self.post_hidden.as_slice().unwrap()));
        out.push(("post_hidden_bias".into(), self.post_hidden_bias.as_slice().unwrap()));
        out.push(("output".into(), self.output.as_slice().unwrap()));
        out.push(("output_bias".into(), self.output_bias.as_slice().unwrap()));
        out
    }

    /// Mutable tensors in the same order as [`Model::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = vec![self.embedding.as_slice_mut().unwrap()];
        for l in &mut self.layers {
            for tap in &mut l.conv {
                out.push(tap.as_slice_mut().unwrap());
            }
            out.push(l.conv_bias.as_slice_mut().unwrap());
            out.push(l.residual.as_slice_mut().unwrap());
            out.push(l.residual_bias.as_slice_mut().unwrap());
            out.push(l.skip.as_slice_mut().unwrap());
            out.push(l.skip_bias.as_slice_mut().unwrap());
        }
        out.push(self.post_hidden.as_slice_mut().unwrap());
        out.push(self.post_hidden_bias.as_slice_mut().unwrap());
        out.push(self.output.as_slice_mut().unwrap());
        out.push(self.output_bias.as_slice_mut().unwrap());
        out
    }

    pub fn n_params(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Name of the first tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<String> {
        self.named_tensors()
            .into_iter()
            .find(|(_, t)| t.iter().any(|v| !v.is_finite()))
            .map(|(n, _)| n)
    }

    pub fn cast<G: Real>(&self) -> Model<G> {
        let mut out = Model::<G>::zeros(&self.config).expect("valid config");
        for ((_, src), dst) in self.named_tensors().into_iter().zip(out.tensors_mut()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = G::from_f64(s.to_f64().unwrap()).unwrap();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_seeded_and_bounded() {
        let c = ModelConfig::toy();
        let a = Model::<f32>::init(&c, 3).unwrap();
        let b = Model::<f32>::init(&c, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, Model::<f32>::init(&c, 4).unwrap());
        let bound = 1.0 / (2.0 * 32.0f32).sqrt();
        assert!(a.layers[0].conv[0].iter().all(|v| v.abs() <= bound));
        assert!(a.first_non_finite().is_none());
    }

    #[test]
    fn tensor_views_line_up() {
        let mut m = Model::<f64>::init(&ModelConfig::toy(), 1).unwrap();
        let sizes: Vec<usize> = m.named_tensors().iter().map(|(_, t)| t.len()).collect();
        let sizes_mut: Vec<usize> = m.tensors_mut().iter().map(|t| t.len()).collect();
        assert_eq!(sizes, sizes_mut);
        m.layers[3].skip_bias[0] = f64::NAN;
        assert_eq!(m.first_non_finite().as_deref(), Some("layer4.skip_bias"));
    }
}
