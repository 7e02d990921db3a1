use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{synthesize_games, SynthConfig};
use crate::tokens::{Example, ELO_STRONG, ELO_WEAK};

use super::config::{Layout, ModelConfig};
use super::train::examples_from_records;
use super::transformer::{example_grad, example_loss, LossSums, Scales};
use super::{init_params, ModelError};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GradCheckConfig {
    pub model: ModelConfig,
    /// Coordinates sampled per tensor.
    pub per_tensor: usize,
    pub eps: f64,
    pub tolerance: f64,
    pub games: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            model: ModelConfig::tiny(),
            per_tensor: 6,
            eps: 1e-5,
            tolerance: 1e-4,
            games: 2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
    pub worst: String,
    pub loss: f64,
}

/// Denominator floor so that coordinates with (near) zero gradient are
/// compared in absolute terms.
const REL_FLOOR: f64 = 1e-7;

fn total_loss(cfg: &ModelConfig, lay: &Layout, p: &[f64], ex: &[Example]) -> f64 {
    let mut s = LossSums::default();
    for e in ex {
        s.add(&example_loss(cfg, lay, p, e));
    }
    s.total(cfg.loss_weights)
}

/// Compare the analytic gradient of the total loss with central finite
/// differences, in f64, on a small model and a couple of synthetic games.
pub fn grad_check(cfg: &GradCheckConfig) -> Result<GradCheckReport, ModelError> {
    let mc = &cfg.model;
    mc.check()?;
    let lay = Layout::new(mc);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut p: Vec<f64> = init_params(mc, &lay, cfg.seed);
    // Move every parameter off its special initial value (unit gains, zero
    // biases) so that all paths carry signal.
    let noise = Normal::new(0.0, 0.1).expect("valid std");
    for x in p.iter_mut() {
        *x += noise.sample(&mut rng);
    }

    let games = synthesize_games(&SynthConfig {
        games: cfg.games,
        seed: cfg.seed,
        max_plies: mc.context * 2,
        ..Default::default()
    });
    let examples = examples_from_records(&games, mc.context)?;
    let refs: Vec<&Example> = examples.iter().collect();
    let scales = Scales::for_batch(mc, &refs);
    let mut grad = vec![0.0f64; lay.total];
    for e in &examples {
        example_grad(mc, &lay, &p, e, scales, &mut grad);
    }
    let loss = total_loss(mc, &lay, &p, &examples);

    let mut coords: Vec<(String, usize)> = Vec::new();
    for t in &lay.tensors {
        let n = t.len().min(cfg.per_tensor);
        for i in sample(&mut rng, t.len(), n) {
            coords.push((format!("{}[{i}]", t.name), t.offset + i));
        }
    }
    // The Elo anchors and a token that certainly occurs.
    let d = mc.d_model;
    for (name, row) in [("elo_weak", ELO_WEAK), ("elo_strong", ELO_STRONG), ("first", examples[0].tokens[4])] {
        for j in [0, d / 2, d - 1] {
            coords.push((format!("tok_emb.{name}[{j}]"), lay.tok_emb + row as usize * d + j));
        }
    }

    let mut max_rel: f64 = 0.0;
    let mut sum_rel = 0.0;
    let mut worst = String::new();
    for (name, i) in &coords {
        let orig = p[*i];
        p[*i] = orig + cfg.eps;
        let up = total_loss(mc, &lay, &p, &examples);
        p[*i] = orig - cfg.eps;
        let down = total_loss(mc, &lay, &p, &examples);
        p[*i] = orig;
        let numeric = (up - down) / (2.0 * cfg.eps);
        let analytic = grad[*i];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        sum_rel += rel;
        if rel > max_rel {
            max_rel = rel;
            worst = format!("{name}: analytic {analytic:.6e}, numeric {numeric:.6e}");
        }
    }
    let report = GradCheckReport {
        checked: coords.len(),
        max_rel_err: max_rel,
        mean_rel_err: sum_rel / coords.len() as f64,
        worst,
        loss,
    };
    if report.max_rel_err > cfg.tolerance {
        return Err(ModelError::GradMismatch {
            max_rel_err: report.max_rel_err,
            tolerance: cfg.tolerance,
        });
    }
    Ok(report)
}
