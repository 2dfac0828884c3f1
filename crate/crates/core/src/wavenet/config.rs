use serde::{Deserialize, Serialize};

use crate::audio::LEVELS;
use crate::error::{Error, Result};

fn default_conv_size() -> usize {
    1
}
fn default_post_width() -> usize {
    128
}
fn default_levels() -> usize {
    LEVELS
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layer_width: usize,
    pub dilations_per_block: Vec<usize>,
    pub n_blocks: usize,
    /// Tap count minus one; `conv_size = 1` gives 2-tap convolutions.
    #[serde(default = "default_conv_size")]
    pub conv_size: usize,
    pub skip_width: usize,
    /// Width of the hidden fully-connected layer in the output head.
    #[serde(default = "default_post_width")]
    pub post_width: usize,
    #[serde(default = "default_levels")]
    pub quantization_levels: usize,
}

impl ModelConfig {
    /// 5 blocks of dilations 1..512, 64 units per layer.
    pub fn full() -> Self {
        Self {
            layer_width: 64,
            dilations_per_block: (0..10).map(|i| 1 << i).collect(),
            n_blocks: 5,
            conv_size: 1,
            skip_width: 64,
            post_width: 128,
            quantization_levels: LEVELS,
        }
    }

    /// Desk-scale model: 2 blocks of dilations 1..64, 32 units per layer.
    pub fn toy() -> Self {
        Self {
            layer_width: 32,
            dilations_per_block: (0..7).map(|i| 1 << i).collect(),
            n_blocks: 2,
            conv_size: 1,
            skip_width: 32,
            post_width: 128,
            quantization_levels: LEVELS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_width == 0 || self.skip_width == 0 || self.post_width == 0 {
            return Err(Error::config("layer, skip and post widths must be positive"));
        }
        if self.dilations_per_block.is_empty() || self.dilations_per_block.contains(&0) {
            return Err(Error::config("dilations must be a nonempty list of positive integers"));
        }
        if self.n_blocks == 0 {
            return Err(Error::config("n_blocks must be positive"));
        }
        if self.conv_size == 0 {
            return Err(Error::config("conv_size must be at least 1"));
        }
        if self.quantization_levels != LEVELS {
            return Err(Error::config(format!(
                "only {LEVELS} quantization levels are supported"
            )));
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.n_blocks * self.dilations_per_block.len()
    }

    pub fn taps(&self) -> usize {
        self.conv_size + 1
    }

    /// Dilation of every residual layer, bottom to top.
    pub fn dilations(&self) -> Vec<usize> {
        (0..self.n_blocks)
            .flat_map(|_| self.dilations_per_block.iter().copied())
            .collect()
    }

    /// Receptive field (in samples) seen by the output of each stored layer; index 0 is the
    /// input embedding.
    pub fn cumulative_receptive_fields(&self) -> Vec<usize> {
        let mut out = vec![1];
        let mut acc = 1;
        for d in self.dilations() {
            acc += self.conv_size * d;
            out.push(acc);
        }
        out
    }
}

/// `1 + n_blocks * N * sum(dilations)` samples.
pub fn receptive_field(config: &ModelConfig) -> usize {
    1 + config.n_blocks * config.conv_size * config.dilations_per_block.iter().sum::<usize>()
}

pub fn receptive_field_ms(config: &ModelConfig, sample_rate: u32) -> f64 {
    receptive_field(config) as f64 * 1000.0 / sample_rate as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    /// Offsets into the past that can reach the top layer, by unrolling layer by layer.
    fn brute_force_field(cfg: &ModelConfig) -> usize {
        let mut reach: BTreeSet<usize> = [0].into();
        for d in cfg.dilations() {
            let mut next = BTreeSet::new();
            for &o in &reach {
                for n in 0..=cfg.conv_size {
                    next.insert(o + n * d);
                }
            }
            reach = next;
        }
        reach.iter().max().unwrap() + 1
    }

    fn cfg(dil: Vec<usize>, blocks: usize) -> ModelConfig {
        ModelConfig {
            dilations_per_block: dil,
            n_blocks: blocks,
            ..ModelConfig::toy()
        }
    }

    #[test]
    fn paper_config_spans_320_ms() {
        let c = ModelConfig::full();
        assert_eq!(receptive_field(&c), 5116);
        assert!((receptive_field_ms(&c, 16_000) - 319.75).abs() < 1e-12);
        assert!((receptive_field_ms(&c, 16_000) - 320.0).abs() <= 0.25);
        assert_eq!(c.n_layers(), 50);
    }

    #[test]
    fn small_configs_match_unrolled_graph() {
        assert_eq!(receptive_field(&cfg(vec![1], 1)), 2);
        assert_eq!(receptive_field(&cfg(vec![1, 2, 4], 2)), 15);
        for dil in [vec![1], vec![1, 2], vec![2, 3], vec![1, 2, 4, 8], vec![3, 1]] {
            for blocks in 1..=4 {
                let c = cfg(dil.clone(), blocks);
                if c.n_layers() <= 4 {
                    assert_eq!(receptive_field(&c), brute_force_field(&c), "{dil:?} x {blocks}");
                    assert_eq!(*c.cumulative_receptive_fields().last().unwrap(), receptive_field(&c));
                }
            }
        }
    }

    #[test]
    fn json_defaults() {
        let c: ModelConfig = serde_json::from_str(
            r#"{"layer_width":32,"dilations_per_block":[1,2],"n_blocks":1,"skip_width":16}"#,
        )
        .unwrap();
        assert_eq!((c.conv_size, c.post_width, c.quantization_levels), (1, 128, 256));
        assert!(c.validate().is_ok());
        assert!(ModelConfig { dilations_per_block: vec![0], ..c }.validate().is_err());
    }
}
