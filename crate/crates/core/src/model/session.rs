use std::sync::Arc;

use crate::data::TimeControl;
use crate::tokens::{header, inference_input, window_start, TokenId, HEADER_LEN};

use super::transformer::{elo_gamma, embed_row, gelu, layer_norm, linear, softplus};
use super::{EvalSession, Evaluator, Model, Prediction};

/// Shares one model across any number of game sessions.
#[derive(Clone, Debug)]
pub struct ModelEvaluator {
    pub model: Arc<Model>,
}

impl ModelEvaluator {
    pub fn new(model: Model) -> Self {
        ModelEvaluator { model: Arc::new(model) }
    }
}

impl Evaluator for ModelEvaluator {
    type Session = ModelSession;

    fn session(&self, tc: TimeControl, elo: [f32; 2]) -> ModelSession {
        ModelSession::new(self.model.clone(), tc, elo)
    }
}

/// Incremental inference with a key/value cache over the committed prefix.
/// Speculative continuations (`predict(extra)`) reuse the cache without
/// modifying it.
#[derive(Clone, Debug)]
pub struct ModelSession {
    model: Arc<Model>,
    header: [TokenId; HEADER_LEN],
    elo: [f32; 2],
    body: Vec<TokenId>,
    /// Body index where the cached window starts.
    start: usize,
    /// Positions held in the cache.
    cached: usize,
    keys: Vec<Vec<f32>>,
    values: Vec<Vec<f32>>,
    /// Residual stream after the last layer at the last cached position.
    last: Vec<f32>,
}

/// Key/value rows produced while running tokens past the cache.
struct Extension {
    keys: Vec<Vec<f32>>,
    values: Vec<Vec<f32>>,
    len: usize,
}

impl ModelSession {
    pub fn new(model: Arc<Model>, tc: TimeControl, elo: [f32; 2]) -> Self {
        let cfg = &model.config;
        let size = cfg.context * cfg.d_model;
        let n = cfg.n_layers;
        ModelSession {
            header: header(tc),
            elo,
            body: Vec::new(),
            start: 0,
            cached: 0,
            keys: vec![vec![0.0; size]; n],
            values: vec![vec![0.0; size]; n],
            last: vec![0.0; cfg.d_model],
            model,
        }
    }

    fn token_at(&self, pos: usize) -> TokenId {
        if pos < HEADER_LEN {
            self.header[pos]
        } else {
            self.body[self.start + pos - HEADER_LEN]
        }
    }

    /// Run one token at sequence position `pos`, attending to the cache and
    /// to the extension rows written so far. Returns the final residual.
    fn step(&self, token: TokenId, pos: usize, ext: &mut Extension) -> Vec<f32> {
        let m = &*self.model;
        let (cfg, lay, p) = (&m.config, &m.layout, &m.params[..]);
        let d = cfg.d_model;
        let dh = cfg.head_dim();
        let scale = 1.0 / (dh as f32).sqrt();
        let mut x = vec![0.0f32; d];
        embed_row(p, lay, d, pos, token, elo_gamma::<f32>(self.elo), &mut x);
        let n_prev = self.cached;
        let e = ext.len;
        let mut scores = vec![0.0f32; n_prev + e + 1];
        for (li, o) in lay.layers.iter().enumerate() {
            let (h1, _) = layer_norm(&x, &p[o.ln1_g..o.ln1_g + d], &p[o.ln1_b..o.ln1_b + d], d);
            let qkv = linear(&h1, p, o.w_qkv, o.b_qkv, d, 3 * d);
            ext.keys[li][e * d..(e + 1) * d].copy_from_slice(&qkv[d..2 * d]);
            ext.values[li][e * d..(e + 1) * d].copy_from_slice(&qkv[2 * d..]);
            let (ck, cv) = (&self.keys[li], &self.values[li]);
            let (ek, ev) = (&ext.keys[li], &ext.values[li]);
            let key = |j: usize| if j < n_prev { &ck[j * d..(j + 1) * d] } else { &ek[(j - n_prev) * d..(j - n_prev + 1) * d] };
            let val = |j: usize| if j < n_prev { &cv[j * d..(j + 1) * d] } else { &ev[(j - n_prev) * d..(j - n_prev + 1) * d] };
            let mut ctx = vec![0.0f32; d];
            for h in 0..cfg.n_heads {
                let q = &qkv[h * dh..(h + 1) * dh];
                let mut max = f32::NEG_INFINITY;
                for (j, s) in scores.iter_mut().enumerate() {
                    let k = &key(j)[h * dh..(h + 1) * dh];
                    *s = q.iter().zip(k).map(|(a, b)| a * b).sum::<f32>() * scale;
                    max = max.max(*s);
                }
                let mut sum = 0.0;
                for s in scores.iter_mut() {
                    *s = (*s - max).exp();
                    sum += *s;
                }
                let out = &mut ctx[h * dh..(h + 1) * dh];
                for (j, s) in scores.iter().enumerate() {
                    let w = s / sum;
                    for (o, v) in out.iter_mut().zip(&val(j)[h * dh..(h + 1) * dh]) {
                        *o += w * v;
                    }
                }
            }
            let a = linear(&ctx, p, o.w_o, o.b_o, d, d);
            for (xv, av) in x.iter_mut().zip(&a) {
                *xv += av;
            }
            let (h2, _) = layer_norm(&x, &p[o.ln2_g..o.ln2_g + d], &p[o.ln2_b..o.ln2_b + d], d);
            let mut act = linear(&h2, p, o.w_fc, o.b_fc, d, cfg.d_ff());
            for z in act.iter_mut() {
                *z = gelu(*z);
            }
            let mm = linear(&act, p, o.w_proj, o.b_proj, cfg.d_ff(), d);
            for (xv, mv) in x.iter_mut().zip(&mm) {
                *xv += mv;
            }
        }
        ext.len += 1;
        x
    }

    fn heads(&self, x: &[f32]) -> Prediction {
        let m = &*self.model;
        let (cfg, lay, p) = (&m.config, &m.layout, &m.params[..]);
        let d = cfg.d_model;
        let (hf, _) = layer_norm(x, &p[lay.lnf_g..lay.lnf_g + d], &p[lay.lnf_b..lay.lnf_b + d], d);
        let logits = linear(&hf, p, lay.w_policy, lay.b_policy, d, cfg.vocab_size);
        let tz = linear(&hf, p, lay.w_time, lay.b_time, d, 1)[0];
        let vz = linear(&hf, p, lay.w_value, lay.b_value, d, 1)[0];
        let value = if cfg.value_squash { vz.tanh() } else { vz };
        Prediction::from_logits(&logits, m.seconds(softplus(tz)), value)
    }

    fn new_extension(&self, n: usize) -> Extension {
        let d = self.model.config.d_model;
        Extension {
            keys: vec![vec![0.0; n * d]; self.model.config.n_layers],
            values: vec![vec![0.0; n * d]; self.model.config.n_layers],
            len: 0,
        }
    }

    /// Bring the cache up to date with the committed tokens.
    fn sync(&mut self) {
        let context = self.model.config.context;
        let s = window_start(self.body.len(), context);
        if s != self.start {
            self.start = s;
            self.cached = 0;
        }
        let target = HEADER_LEN + self.body.len() - self.start;
        let d = self.model.config.d_model;
        while self.cached < target {
            let mut ext = self.new_extension(1);
            let pos = self.cached;
            self.last = self.step(self.token_at(pos), pos, &mut ext);
            for li in 0..self.keys.len() {
                self.keys[li][pos * d..(pos + 1) * d].copy_from_slice(&ext.keys[li]);
                self.values[li][pos * d..(pos + 1) * d].copy_from_slice(&ext.values[li]);
            }
            self.cached += 1;
        }
    }
}

impl EvalSession for ModelSession {
    fn push(&mut self, token: TokenId) {
        self.body.push(token);
    }

    fn predict(&mut self, extra: &[TokenId]) -> Prediction {
        self.sync();
        if extra.is_empty() {
            return self.heads(&self.last.clone());
        }
        let context = self.model.config.context;
        let q = self.body.len() + extra.len();
        if window_start(q, context) == self.start {
            let mut ext = self.new_extension(extra.len());
            let mut x = Vec::new();
            for (i, &t) in extra.iter().enumerate() {
                x = self.step(t, self.cached + i, &mut ext);
            }
            return self.heads(&x);
        }
        // The continuation crosses a window boundary: recompute from scratch.
        let mut body = self.body.clone();
        body.extend_from_slice(extra);
        let input = inference_input(&self.header, &body, context);
        let preds = self
            .model
            .predictions(&input, self.elo)
            .expect("window fits the context");
        preds.into_iter().last().expect("non-empty input")
    }

    fn body(&self) -> &[TokenId] {
        &self.body
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn close(a: &Prediction, b: &Prediction) -> bool {
        let pol = a.policy.iter().zip(&b.policy).all(|(x, y)| (x - y).abs() < 1e-5);
        pol && (a.time - b.time).abs() < 1e-3 && (a.value - b.value).abs() < 1e-4
    }

    #[test]
    fn cached_matches_full_forward_across_windows() {
        let cfg = ModelConfig::tiny();
        let model = Model::new(cfg.clone()).unwrap();
        let eval = ModelEvaluator::new(model.clone());
        let tc = TimeControl::new(180, 2);
        let elo = [1400.0, 2100.0];
        let mut s = eval.session(tc, elo);
        let body: Vec<TokenId> = (0..60).map(|i| (i * 37 % 1968) as TokenId).collect();
        let head = header(tc);
        for q in 0..body.len() {
            let want = model.predictions(&inference_input(&head, &body[..q], cfg.context), elo).unwrap();
            let got = s.predict(&[]);
            assert!(close(&got, want.last().unwrap()), "q = {q}");
            // Speculative continuation of two tokens.
            if q + 2 <= body.len() {
                let want = model.predictions(&inference_input(&head, &body[..q + 2], cfg.context), elo).unwrap();
                let got = s.predict(&body[q..q + 2]);
                assert!(close(&got, want.last().unwrap()), "q + 2 = {}", q + 2);
            }
            s.push(body[q]);
        }
    }
}
