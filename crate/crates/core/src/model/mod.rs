//! Decoder-only sequence model with policy, think-time and value heads:
//! training, checkpoints, gradient checks and incremental inference.

mod checkpoint;
mod config;
mod gradcheck;
mod optim;
mod scalar;
mod session;
mod stub;
mod train;
mod transformer;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::data::TimeControl;
use crate::tokens::TokenId;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{LayerOffsets, Layout, ModelConfig, TensorInfo};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use optim::{cosine_lr, AdamW};
pub use scalar::{gemm, Mat, Scalar};
pub use session::{ModelEvaluator, ModelSession};
pub use stub::{PositionEvaluator, PositionSession};
pub use train::{batch_grad, evaluate_loss, examples_from_records, train, train_until, Freeze, TrainConfig, TrainLogEntry, TrainState};
pub use transformer::{example_grad, example_loss, forward, Cache, LossSums, Outputs, Scales};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad model config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("loss became non-finite at step {step}: {detail}")]
    NanLoss { step: usize, detail: String },
    #[error("gradient mismatch: max relative error {max_rel_err:.3e} above {tolerance:.1e}")]
    GradMismatch { max_rel_err: f64, tolerance: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Token(#[from] crate::tokens::TokenError),
}

/// Random initialization: N(0, 0.02) weights, residual projections scaled
/// down by depth, unit LayerNorm gains and zero biases.
pub fn init_params<F: Scalar>(cfg: &ModelConfig, lay: &Layout, seed: u64) -> Vec<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = 0.02;
    let resid_std = std / (2.0 * cfg.n_layers as f64).sqrt();
    let mut p = vec![F::zero(); lay.total];
    for t in &lay.tensors {
        let short = t.name.rsplit('.').next().unwrap_or(&t.name);
        let fill: Option<f64> = match short {
            s if s.ends_with("_g") => Some(1.0),
            s if s.starts_with("b_") => Some(0.0),
            _ => None,
        };
        match fill {
            Some(c) => p[t.range()].fill(F::of(c)),
            None => {
                let s = if short == "w_o" || short == "w_proj" { resid_std } else { std };
                let dist = Normal::new(0.0, s).expect("valid std");
                for x in &mut p[t.range()] {
                    *x = F::of(dist.sample(&mut rng));
                }
            }
        }
    }
    if cfg.factored_init {
        factor_move_rows(cfg, lay, &mut p, &mut rng, std);
    }
    // Start the time head near a typical blitz think time.
    p[lay.b_time] = F::of(if cfg.log_time { 1.2 } else { 4.0 });
    p
}

/// Overwrite move rows of `tok_emb` and move columns of `w_policy` with
/// `(F[from] + T[to] + P[promotion]) / sqrt(3)`, one factor set per tensor.
fn factor_move_rows<F: Scalar>(cfg: &ModelConfig, lay: &Layout, p: &mut [F], rng: &mut ChaCha8Rng, std: f64) {
    let d = cfg.d_model;
    let v = cfg.vocab_size;
    let dist = Normal::new(0.0, std).expect("valid std");
    let vocab = crate::tokens::Vocab::get();
    let mut factors = |n: usize| -> Vec<f64> { (0..n * d).map(|_| dist.sample(rng)).collect() };
    let scale = 1.0 / 3f64.sqrt();
    for tensor in 0..2 {
        let (from, to, promo) = (factors(64), factors(64), factors(5));
        for id in 0..crate::tokens::N_MOVE_TOKENS.min(v) {
            let m = vocab.id_move(id as TokenId).expect("move token");
            let k = m.promotion.map_or(0, |k| k.index() % 5);
            for j in 0..d {
                let x = (from[m.from.index() * d + j] + to[m.to.index() * d + j] + promo[k * d + j]) * scale;
                let at = if tensor == 0 { lay.tok_emb + id * d + j } else { lay.w_policy + j * v + id };
                p[at] = F::of(x);
            }
        }
    }
}

/// Next-token prediction at one position.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// Softmax over the whole vocabulary.
    pub policy: Vec<f32>,
    /// Predicted think time in seconds.
    pub time: f32,
    /// Expected outcome from white's point of view.
    pub value: f32,
}

impl Prediction {
    pub fn from_logits(logits: &[f32], time: f32, value: f32) -> Prediction {
        // Normalize in f64 so the f32 probabilities sum to one within 1e-6.
        let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        let exps: Vec<f64> = logits.iter().map(|&z| (z as f64 - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let policy = exps.iter().map(|&e| (e / sum) as f32).collect();
        Prediction { policy, time, value }
    }
}

/// Source of predictions for a game in progress. Sessions hold the
/// committed token prefix so implementations can cache work across calls.
pub trait Evaluator: Send + Sync {
    type Session: EvalSession;

    /// New game with the given time control and [white, black] Elo
    /// conditioning.
    fn session(&self, tc: TimeControl, elo: [f32; 2]) -> Self::Session;
}

pub trait EvalSession: Send {
    /// Commit a move or termination token.
    fn push(&mut self, token: TokenId);

    /// Prediction for the token following the committed prefix and `extra`.
    fn predict(&mut self, extra: &[TokenId]) -> Prediction;

    /// Committed body tokens (moves) so far.
    fn body(&self) -> &[TokenId];
}

/// A frozen model with f32 parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub layout: Layout,
    pub params: Vec<f32>,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Model, ModelError> {
        config.check()?;
        let layout = Layout::new(&config);
        let params = init_params(&config, &layout, config.seed);
        Ok(Model { config, layout, params })
    }

    pub fn from_params(config: ModelConfig, params: Vec<f32>) -> Result<Model, ModelError> {
        config.check()?;
        let layout = Layout::new(&config);
        if params.len() != layout.total {
            return Err(ModelError::Shape(format!("expected {} parameters, got {}", layout.total, params.len())));
        }
        Ok(Model { config, layout, params })
    }

    pub fn n_params(&self) -> usize {
        self.layout.total
    }

    pub fn forward(&self, tokens: &[TokenId], elo: [f32; 2]) -> Result<Outputs<f32>, ModelError> {
        if tokens.is_empty() || tokens.len() > self.config.context {
            return Err(ModelError::Shape(format!(
                "sequence of {} tokens, context {}",
                tokens.len(),
                self.config.context
            )));
        }
        if let Some(&t) = tokens.iter().find(|&&t| t as usize >= self.config.vocab_size) {
            return Err(ModelError::Shape(format!("token id {t} out of range")));
        }
        Ok(forward(&self.config, &self.layout, &self.params, tokens, elo).0)
    }

    /// Convert a time-head output to seconds.
    pub fn seconds(&self, raw: f32) -> f32 {
        if self.config.log_time {
            raw.exp_m1().max(0.0)
        } else {
            raw
        }
    }

    /// Predictions at every position of `tokens`.
    pub fn predictions(&self, tokens: &[TokenId], elo: [f32; 2]) -> Result<Vec<Prediction>, ModelError> {
        let out = self.forward(tokens, elo)?;
        Ok((0..out.len)
            .map(|i| Prediction::from_logits(out.logits_at(i), self.seconds(out.time[i]), out.value[i]))
            .collect())
    }
}
