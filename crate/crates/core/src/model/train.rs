use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::GameRecord;
use crate::tokens::{training_examples, Example, TokenId};

use super::config::{Layout, ModelConfig};
use super::optim::{cosine_lr, decay_ranges, AdamW};
use super::transformer::{example_grad, example_loss, LossSums, Scales};
use super::{Model, ModelError};

/// Examples per gradient work unit. Fixed so that the reduction order, and
/// therefore the result, does not depend on the thread count.
const CHUNK: usize = 4;

/// Parameters excluded from updates (their gradient is zeroed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Freeze {
    Tensor(String),
    /// Rows of the token embedding, e.g. the two Elo anchors.
    TokenRows(Vec<TokenId>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub warmup: usize,
    pub weight_decay: f64,
    pub grad_clip: f64,
    pub eval_every: usize,
    /// Validation examples used for periodic evaluation (0 = all).
    pub eval_examples: usize,
    pub seed: u64,
    pub frozen: Vec<Freeze>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            batch_size: 16,
            lr_max: 6e-4,
            lr_min: 1e-5,
            warmup: 100,
            weight_decay: 0.1,
            grad_clip: 1.0,
            eval_every: 250,
            eval_examples: 256,
            seed: 0,
            frozen: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub step: usize,
    pub lr: f64,
    pub nll: f64,
    pub time_mse: f64,
    pub value_mse: f64,
    pub total: f64,
    pub grad_norm: f64,
    pub val_nll: Option<f64>,
    pub val_time_mse: Option<f64>,
    pub val_value_mse: Option<f64>,
}

/// Everything needed to resume training exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainState {
    pub step: usize,
    pub optimizer: AdamW,
    pub log: Vec<TrainLogEntry>,
}

impl TrainState {
    pub fn new(model: &Model, cfg: &TrainConfig) -> Self {
        TrainState {
            step: 0,
            optimizer: AdamW::new(model.n_params(), cfg.weight_decay),
            log: Vec::new(),
        }
    }
}

/// Training sequences for a set of games, dropping windows with no targets.
pub fn examples_from_records(records: &[GameRecord], context: usize) -> Result<Vec<Example>, ModelError> {
    let nested: Result<Vec<Vec<Example>>, _> = records.par_iter().map(|r| training_examples(r, context)).collect();
    Ok(nested?
        .into_iter()
        .flatten()
        .filter(|e| e.policy_mask.iter().any(|&b| b))
        .collect())
}

fn apply_freeze(lay: &Layout, cfg: &ModelConfig, frozen: &[Freeze], grad: &mut [f32]) {
    for f in frozen {
        match f {
            Freeze::Tensor(name) => {
                if let Some(t) = lay.tensor(name) {
                    grad[t.range()].fill(0.0);
                }
            }
            Freeze::TokenRows(rows) => {
                let d = cfg.d_model;
                for &r in rows {
                    let start = lay.tok_emb + r as usize * d;
                    grad[start..start + d].fill(0.0);
                }
            }
        }
    }
}

/// Mean-reduced loss and gradient over a batch.
pub fn batch_grad(model: &Model, batch: &[&Example], frozen: &[Freeze]) -> (LossSums, Vec<f32>) {
    let (cfg, lay) = (&model.config, &model.layout);
    let scales = Scales::for_batch(cfg, batch);
    let parts: Vec<(LossSums, Vec<f32>)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0f32; lay.total];
            let mut s = LossSums::default();
            for ex in chunk {
                s.add(&example_grad(cfg, lay, &model.params, ex, scales, &mut g));
            }
            (s, g)
        })
        .collect();
    let mut sums = LossSums::default();
    let mut grad = vec![0.0f32; lay.total];
    for (s, g) in parts {
        sums.add(&s);
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    apply_freeze(lay, cfg, frozen, &mut grad);
    (sums, grad)
}

/// Loss sums over a set of examples (no gradients).
pub fn evaluate_loss(model: &Model, examples: &[Example]) -> LossSums {
    let parts: Vec<LossSums> = examples
        .par_iter()
        .map(|e| example_loss(&model.config, &model.layout, &model.params, e))
        .collect();
    let mut sums = LossSums::default();
    for p in &parts {
        sums.add(p);
    }
    sums
}

/// Epoch-wise shuffled sampling, reproducible from (seed, step).
fn batch_indices(n: usize, batch: usize, step: usize, seed: u64, perm: &mut (usize, Vec<usize>)) -> Vec<usize> {
    (0..batch)
        .map(|i| {
            let flat = step * batch + i;
            let epoch = flat / n;
            if perm.0 != epoch || perm.1.len() != n {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(epoch as u64);
                perm.1 = (0..n).collect();
                perm.1.shuffle(&mut rng);
                perm.0 = epoch;
            }
            perm.1[flat % n]
        })
        .collect()
}

/// Run optimizer steps until `cfg.steps`, resuming from `state.step`.
pub fn train(
    model: &mut Model,
    state: &mut TrainState,
    cfg: &TrainConfig,
    train_set: &[Example],
    val_set: &[Example],
    on_log: impl FnMut(&TrainLogEntry),
) -> Result<(), ModelError> {
    train_until(model, state, cfg, train_set, val_set, cfg.steps, on_log)
}

/// Like [`train`] but stops after step `until` (the schedule still spans
/// `cfg.steps`), so a run can be split and resumed.
pub fn train_until(
    model: &mut Model,
    state: &mut TrainState,
    cfg: &TrainConfig,
    train_set: &[Example],
    val_set: &[Example],
    until: usize,
    mut on_log: impl FnMut(&TrainLogEntry),
) -> Result<(), ModelError> {
    if train_set.is_empty() {
        return Err(ModelError::Config("empty training set".into()));
    }
    let decay = decay_ranges(&model.layout);
    let val: &[Example] = if cfg.eval_examples == 0 || cfg.eval_examples >= val_set.len() {
        val_set
    } else {
        &val_set[..cfg.eval_examples]
    };
    let mut perm = (usize::MAX, Vec::new());
    while state.step < until.min(cfg.steps) {
        let step = state.step;
        let idx = batch_indices(train_set.len(), cfg.batch_size, step, cfg.seed, &mut perm);
        let batch: Vec<&Example> = idx.iter().map(|&i| &train_set[i]).collect();
        let (sums, mut grad) = batch_grad(model, &batch, &cfg.frozen);
        let total = sums.total(model.config.loss_weights);
        if !total.is_finite() {
            return Err(ModelError::NanLoss {
                step,
                detail: format!("{sums:?}"),
            });
        }
        let norm = grad.iter().map(|&g| g as f64 * g as f64).sum::<f64>().sqrt();
        if cfg.grad_clip > 0.0 && norm > cfg.grad_clip {
            let k = (cfg.grad_clip / norm) as f32;
            for g in &mut grad {
                *g *= k;
            }
        }
        let lr = cosine_lr(step, cfg.steps, cfg.warmup, cfg.lr_max, cfg.lr_min);
        state.optimizer.step(&mut model.params, &grad, lr, &decay);
        state.step += 1;

        let mut entry = TrainLogEntry {
            step: state.step,
            lr,
            nll: sums.mean_nll(),
            time_mse: sums.mean_time(),
            value_mse: sums.mean_value(),
            total,
            grad_norm: norm,
            val_nll: None,
            val_time_mse: None,
            val_value_mse: None,
        };
        let eval_now = cfg.eval_every > 0 && (state.step % cfg.eval_every == 0 || state.step == cfg.steps);
        if eval_now && !val.is_empty() {
            let v = evaluate_loss(model, val);
            entry.val_nll = Some(v.mean_nll());
            entry.val_time_mse = Some(v.mean_time());
            entry.val_value_mse = Some(v.mean_value());
        }
        on_log(&entry);
        state.log.push(entry);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize_games, SynthConfig};

    fn setup() -> (Model, Vec<Example>) {
        let games = synthesize_games(&SynthConfig {
            games: 12,
            seed: 2,
            max_plies: 40,
            ..Default::default()
        });
        let cfg = ModelConfig::tiny();
        let ex = examples_from_records(&games, cfg.context).unwrap();
        (Model::new(cfg).unwrap(), ex)
    }

    #[test]
    fn loss_decreases() {
        let (mut model, ex) = setup();
        let cfg = TrainConfig {
            steps: 60,
            batch_size: 8,
            warmup: 5,
            lr_max: 3e-3,
            eval_every: 0,
            ..Default::default()
        };
        let before = evaluate_loss(&model, &ex).total(model.config.loss_weights);
        let mut state = TrainState::new(&model, &cfg);
        train(&mut model, &mut state, &cfg, &ex, &[], |_| {}).unwrap();
        let after = evaluate_loss(&model, &ex).total(model.config.loss_weights);
        assert!(after < before, "{before} -> {after}");
    }

    #[test]
    fn resume_is_exact() {
        let (model, ex) = setup();
        let cfg = TrainConfig {
            steps: 6,
            batch_size: 4,
            warmup: 2,
            eval_every: 0,
            ..Default::default()
        };
        let mut a = model.clone();
        let mut sa = TrainState::new(&a, &cfg);
        train(&mut a, &mut sa, &cfg, &ex, &[], |_| {}).unwrap();

        let mut b = model.clone();
        let mut sb = TrainState::new(&b, &cfg);
        train_until(&mut b, &mut sb, &cfg, &ex, &[], 3, |_| {}).unwrap();
        assert_eq!(sb.step, 3);
        train(&mut b, &mut sb, &cfg, &ex, &[], |_| {}).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn frozen_rows_do_not_move() {
        let (model, ex) = setup();
        let batch: Vec<&Example> = ex.iter().take(3).collect();
        let frozen = vec![Freeze::TokenRows(vec![crate::tokens::ELO_WEAK])];
        let (_, g) = batch_grad(&model, &batch, &frozen);
        let d = model.config.d_model;
        let start = model.layout.tok_emb + crate::tokens::ELO_WEAK as usize * d;
        assert!(g[start..start + d].iter().all(|&x| x == 0.0));
        let (_, g) = batch_grad(&model, &batch, &[]);
        assert!(g[start..start + d].iter().any(|&x| x != 0.0));
    }
}
