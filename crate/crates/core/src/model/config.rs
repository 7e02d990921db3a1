use serde::{Deserialize, Serialize};

use crate::tokens::VOCAB_SIZE;

use super::ModelError;

/// Transformer hyperparameters. The feed-forward width is four times the
/// model width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub context: usize,
    pub vocab_size: usize,
    /// Squash the value head through tanh.
    pub value_squash: bool,
    /// Train the time head on ln(1 + seconds) instead of raw seconds.
    pub log_time: bool,
    /// Weights of the move NLL, time and value terms.
    pub loss_weights: [f64; 3],
    /// Initialize move-token embeddings and policy columns as sums of
    /// from-square, to-square and promotion vectors, so moves sharing a
    /// square start out related.
    pub factored_init: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::desk()
    }
}

impl ModelConfig {
    /// Default desk-scale model (about 6M parameters).
    pub fn desk() -> Self {
        ModelConfig {
            n_layers: 4,
            d_model: 256,
            n_heads: 8,
            context: 512,
            vocab_size: VOCAB_SIZE,
            value_squash: true,
            log_time: false,
            loss_weights: [1.0, 1.0, 1.0],
            factored_init: true,
            seed: 0,
        }
    }

    /// Smaller model that trains in minutes on one CPU core.
    pub fn small() -> Self {
        ModelConfig {
            n_layers: 3,
            d_model: 96,
            n_heads: 4,
            context: 160,
            ..ModelConfig::desk()
        }
    }

    /// Two layers of width 16, for gradient checks.
    pub fn tiny() -> Self {
        ModelConfig {
            n_layers: 2,
            d_model: 16,
            n_heads: 2,
            context: 24,
            ..ModelConfig::desk()
        }
    }

    pub fn d_ff(&self) -> usize {
        4 * self.d_model
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return bad("width must be divisible by the number of heads");
        }
        if self.vocab_size != VOCAB_SIZE {
            return bad("vocabulary size must match the token table");
        }
        if self.context < 8 {
            return bad("context must hold at least 8 tokens");
        }
        if self.n_layers == 0 {
            return bad("need at least one layer");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LayerOffsets {
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub w_qkv: usize,
    pub b_qkv: usize,
    pub w_o: usize,
    pub b_o: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
    pub w_fc: usize,
    pub b_fc: usize,
    pub w_proj: usize,
    pub b_proj: usize,
}

/// Where each tensor lives in the flat parameter vector. Weight matrices are
/// stored [in, out] row-major.
#[derive(Clone, Debug)]
pub struct Layout {
    pub tok_emb: usize,
    pub pos_emb: usize,
    pub layers: Vec<LayerOffsets>,
    pub lnf_g: usize,
    pub lnf_b: usize,
    pub w_policy: usize,
    pub b_policy: usize,
    pub w_time: usize,
    pub b_time: usize,
    pub w_value: usize,
    pub b_value: usize,
    pub total: usize,
    pub tensors: Vec<TensorInfo>,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Layout {
        let (d, f, v) = (cfg.d_model, cfg.d_ff(), cfg.vocab_size);
        let mut tensors = Vec::new();
        let mut total = 0;
        let mut alloc = |name: String, shape: Vec<usize>| {
            let offset = total;
            total += shape.iter().product::<usize>();
            tensors.push(TensorInfo { name, shape, offset });
            offset
        };
        let tok_emb = alloc("tok_emb".into(), vec![v, d]);
        let pos_emb = alloc("pos_emb".into(), vec![cfg.context, d]);
        let layers = (0..cfg.n_layers)
            .map(|l| {
                let mut a = |n: &str, s: Vec<usize>| alloc(format!("h{l}.{n}"), s);
                LayerOffsets {
                    ln1_g: a("ln1_g", vec![d]),
                    ln1_b: a("ln1_b", vec![d]),
                    w_qkv: a("w_qkv", vec![d, 3 * d]),
                    b_qkv: a("b_qkv", vec![3 * d]),
                    w_o: a("w_o", vec![d, d]),
                    b_o: a("b_o", vec![d]),
                    ln2_g: a("ln2_g", vec![d]),
                    ln2_b: a("ln2_b", vec![d]),
                    w_fc: a("w_fc", vec![d, f]),
                    b_fc: a("b_fc", vec![f]),
                    w_proj: a("w_proj", vec![f, d]),
                    b_proj: a("b_proj", vec![d]),
                }
            })
            .collect();
        let lnf_g = alloc("lnf_g".into(), vec![d]);
        let lnf_b = alloc("lnf_b".into(), vec![d]);
        let w_policy = alloc("w_policy".into(), vec![d, v]);
        let b_policy = alloc("b_policy".into(), vec![v]);
        let w_time = alloc("w_time".into(), vec![d, 1]);
        let b_time = alloc("b_time".into(), vec![1]);
        let w_value = alloc("w_value".into(), vec![d, 1]);
        let b_value = alloc("b_value".into(), vec![1]);
        Layout {
            tok_emb,
            pos_emb,
            layers,
            lnf_g,
            lnf_b,
            w_policy,
            b_policy,
            w_time,
            b_time,
            w_value,
            b_value,
            total,
            tensors,
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&TensorInfo> {
        self.tensors.iter().find(|t| t.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_model_is_about_six_million_parameters() {
        let n = Layout::new(&ModelConfig::desk()).total;
        assert!((4_000_000..8_000_000).contains(&n), "{n}");
    }

    #[test]
    fn tensors_tile_the_buffer() {
        let l = Layout::new(&ModelConfig::tiny());
        let mut next = 0;
        for t in &l.tensors {
            assert_eq!(t.offset, next);
            next += t.len();
        }
        assert_eq!(next, l.total);
    }

    #[test]
    fn config_checks() {
        assert!(ModelConfig::desk().check().is_ok());
        let bad = ModelConfig {
            n_heads: 3,
            ..ModelConfig::tiny()
        };
        assert!(bad.check().is_err());
    }
}
