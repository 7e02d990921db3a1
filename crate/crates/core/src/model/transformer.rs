//! Pre-LayerNorm decoder-only transformer with policy, time and value heads,
//! written out by hand: forward pass, joint loss and backward pass.

use crate::tokens::{soft_elo_weight, Example, TokenId, ELO_SLOTS, ELO_STRONG, ELO_WEAK};

use super::config::{LayerOffsets, Layout, ModelConfig};
use super::scalar::{gemm, Mat, Scalar};

const LN_EPS: f64 = 1e-5;

/// Per-position head outputs. `time` is in training units (seconds, or
/// ln(1 + seconds) with `log_time`).
#[derive(Clone, Debug, PartialEq)]
pub struct Outputs<F> {
    pub len: usize,
    pub vocab: usize,
    pub logits: Vec<F>,
    pub time: Vec<F>,
    pub value: Vec<F>,
}

impl<F: Scalar> Outputs<F> {
    pub fn logits_at(&self, i: usize) -> &[F] {
        &self.logits[i * self.vocab..(i + 1) * self.vocab]
    }
}

pub(crate) struct LnCache<F> {
    xhat: Vec<F>,
    rstd: Vec<F>,
}

struct LayerCache<F> {
    ln1: LnCache<F>,
    h1: Vec<F>,
    qkv: Vec<F>,
    probs: Vec<F>,
    ctx: Vec<F>,
    ln2: LnCache<F>,
    h2: Vec<F>,
    fc: Vec<F>,
    act: Vec<F>,
}

/// Activations kept for the backward pass.
pub struct Cache<F> {
    tokens: Vec<TokenId>,
    gamma: [F; 2],
    layers: Vec<LayerCache<F>>,
    lnf: LnCache<F>,
    hf: Vec<F>,
    time_z: Vec<F>,
}

pub(crate) fn layer_norm<F: Scalar>(x: &[F], g: &[F], b: &[F], d: usize) -> (Vec<F>, LnCache<F>) {
    let rows = x.len() / d;
    let mut y = vec![F::zero(); x.len()];
    let mut xhat = vec![F::zero(); x.len()];
    let mut rstd = vec![F::zero(); rows];
    let inv_d = F::of(1.0 / d as f64);
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().copied().sum::<F>() * inv_d;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() * inv_d;
        let rs = F::one() / (var + F::of(LN_EPS)).sqrt();
        rstd[r] = rs;
        for j in 0..d {
            let h = (row[j] - mean) * rs;
            xhat[r * d + j] = h;
            y[r * d + j] = h * g[j] + b[j];
        }
    }
    (y, LnCache { xhat, rstd })
}

/// Returns dx; accumulates into dg and db.
fn layer_norm_backward<F: Scalar>(dy: &[F], c: &LnCache<F>, g: &[F], dg: &mut [F], db: &mut [F], d: usize) -> Vec<F> {
    let rows = dy.len() / d;
    let mut dx = vec![F::zero(); dy.len()];
    let inv_d = F::of(1.0 / d as f64);
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &c.xhat[r * d..(r + 1) * d];
        let mut mean_dxh = F::zero();
        let mut mean_dxh_xh = F::zero();
        for j in 0..d {
            dg[j] += dyr[j] * xh[j];
            db[j] += dyr[j];
            let dxh = dyr[j] * g[j];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh[j];
        }
        mean_dxh = mean_dxh * inv_d;
        mean_dxh_xh = mean_dxh_xh * inv_d;
        for j in 0..d {
            let dxh = dyr[j] * g[j];
            dx[r * d + j] = c.rstd[r] * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044715;

pub(crate) fn gelu<F: Scalar>(x: F) -> F {
    let u = F::of(GELU_C) * (x + F::of(GELU_A) * x * x * x);
    F::of(0.5) * x * (F::one() + u.tanh())
}

fn gelu_grad<F: Scalar>(x: F) -> F {
    let u = F::of(GELU_C) * (x + F::of(GELU_A) * x * x * x);
    let t = u.tanh();
    let du = F::of(GELU_C) * (F::one() + F::of(3.0 * GELU_A) * x * x);
    F::of(0.5) * (F::one() + t) + F::of(0.5) * x * (F::one() - t * t) * du
}

pub(crate) fn softplus<F: Scalar>(z: F) -> F {
    if z > F::of(20.0) {
        z
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid<F: Scalar>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

/// y[rows, out] = x[rows, in] W[in, out] + b
pub(crate) fn linear<F: Scalar>(x: &[F], p: &[F], w: usize, b: usize, n_in: usize, n_out: usize) -> Vec<F> {
    let rows = x.len() / n_in;
    let mut y = vec![F::zero(); rows * n_out];
    gemm(rows, n_in, n_out, Mat::n(x, n_in), Mat::n(&p[w..w + n_in * n_out], n_out), &mut y, n_out, false);
    let bias = &p[b..b + n_out];
    for r in 0..rows {
        for (o, &bv) in y[r * n_out..(r + 1) * n_out].iter_mut().zip(bias) {
            *o += bv;
        }
    }
    y
}

/// Accumulates dW and db, returns dx.
#[allow(clippy::too_many_arguments)]
fn linear_backward<F: Scalar>(
    x: &[F],
    dy: &[F],
    p: &[F],
    grad: &mut [F],
    w: usize,
    b: usize,
    n_in: usize,
    n_out: usize,
) -> Vec<F> {
    let rows = x.len() / n_in;
    gemm(n_in, rows, n_out, Mat::t(x, n_in), Mat::n(dy, n_out), &mut grad[w..w + n_in * n_out], n_out, true);
    for r in 0..rows {
        for (g, &d) in grad[b..b + n_out].iter_mut().zip(&dy[r * n_out..(r + 1) * n_out]) {
            *g += d;
        }
    }
    let mut dx = vec![F::zero(); rows * n_in];
    gemm(rows, n_out, n_in, Mat::n(dy, n_out), Mat::t(&p[w..w + n_in * n_out], n_out), &mut dx, n_in, false);
    dx
}

/// Input embedding for one position; the two Elo slots use the soft mix.
pub(crate) fn embed_row<F: Scalar>(p: &[F], lay: &Layout, d: usize, i: usize, token: TokenId, gamma: [F; 2], out: &mut [F]) {
    let pos = &p[lay.pos_emb + i * d..lay.pos_emb + (i + 1) * d];
    if let Some(slot) = ELO_SLOTS.iter().position(|&s| s == i) {
        let g = gamma[slot];
        let weak = &p[lay.tok_emb + ELO_WEAK as usize * d..][..d];
        let strong = &p[lay.tok_emb + ELO_STRONG as usize * d..][..d];
        for j in 0..d {
            out[j] = g * weak[j] + (F::one() - g) * strong[j] + pos[j];
        }
    } else {
        let e = &p[lay.tok_emb + token as usize * d..][..d];
        for j in 0..d {
            out[j] = e[j] + pos[j];
        }
    }
}

pub(crate) fn elo_gamma<F: Scalar>(elo: [f32; 2]) -> [F; 2] {
    [F::of(soft_elo_weight(elo[0] as f64)), F::of(soft_elo_weight(elo[1] as f64))]
}

fn attention_forward<F: Scalar>(qkv: &[F], l: usize, cfg: &ModelConfig) -> (Vec<F>, Vec<F>) {
    let d = cfg.d_model;
    let dh = cfg.head_dim();
    let scale = F::of(1.0 / (dh as f64).sqrt());
    let mut probs = vec![F::zero(); cfg.n_heads * l * l];
    let mut ctx = vec![F::zero(); l * d];
    for h in 0..cfg.n_heads {
        let s = &mut probs[h * l * l..(h + 1) * l * l];
        gemm(l, dh, l, Mat::n(&qkv[h * dh..], 3 * d), Mat::t(&qkv[d + h * dh..], 3 * d), s, l, false);
        for i in 0..l {
            let row = &mut s[i * l..(i + 1) * l];
            let mut max = F::neg_infinity();
            for v in row[..=i].iter_mut() {
                *v = *v * scale;
                max = max.max(*v);
            }
            let mut sum = F::zero();
            for v in row[..=i].iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row[..=i].iter_mut() {
                *v = *v / sum;
            }
            row[i + 1..].fill(F::zero());
        }
        gemm(l, l, dh, Mat::n(s, l), Mat::n(&qkv[2 * d + h * dh..], 3 * d), &mut ctx[h * dh..], d, false);
    }
    (probs, ctx)
}

fn attention_backward<F: Scalar>(qkv: &[F], probs: &[F], dctx: &[F], l: usize, cfg: &ModelConfig) -> Vec<F> {
    let d = cfg.d_model;
    let dh = cfg.head_dim();
    let scale = F::of(1.0 / (dh as f64).sqrt());
    let mut dqkv = vec![F::zero(); l * 3 * d];
    let mut ds = vec![F::zero(); l * l];
    for h in 0..cfg.n_heads {
        let p = &probs[h * l * l..(h + 1) * l * l];
        // dP = dctx_h V_h^T
        gemm(l, dh, l, Mat::n(&dctx[h * dh..], d), Mat::t(&qkv[2 * d + h * dh..], 3 * d), &mut ds, l, false);
        // dV_h = P^T dctx_h
        gemm(l, l, dh, Mat::t(p, l), Mat::n(&dctx[h * dh..], d), &mut dqkv[2 * d + h * dh..], 3 * d, false);
        for i in 0..l {
            let row_p = &p[i * l..(i + 1) * l];
            let row = &mut ds[i * l..(i + 1) * l];
            let dot: F = (0..=i).map(|j| row[j] * row_p[j]).sum();
            for j in 0..=i {
                row[j] = row_p[j] * (row[j] - dot) * scale;
            }
            row[i + 1..].fill(F::zero());
        }
        gemm(l, l, dh, Mat::n(&ds, l), Mat::n(&qkv[d + h * dh..], 3 * d), &mut dqkv[h * dh..], 3 * d, false);
        gemm(l, l, dh, Mat::t(&ds, l), Mat::n(&qkv[h * dh..], 3 * d), &mut dqkv[d + h * dh..], 3 * d, false);
    }
    dqkv
}

/// Full forward pass over one sequence of at most `context` tokens.
pub fn forward<F: Scalar>(
    cfg: &ModelConfig,
    lay: &Layout,
    p: &[F],
    tokens: &[TokenId],
    elo: [f32; 2],
) -> (Outputs<F>, Cache<F>) {
    let l = tokens.len();
    assert!(l > 0 && l <= cfg.context, "sequence length {l} outside 1..={}", cfg.context);
    let (d, f, v) = (cfg.d_model, cfg.d_ff(), cfg.vocab_size);
    let gamma = elo_gamma::<F>(elo);
    let mut x = vec![F::zero(); l * d];
    for (i, &t) in tokens.iter().enumerate() {
        embed_row(p, lay, d, i, t, gamma, &mut x[i * d..(i + 1) * d]);
    }
    let mut layers = Vec::with_capacity(cfg.n_layers);
    for o in &lay.layers {
        let (h1, ln1) = layer_norm(&x, &p[o.ln1_g..o.ln1_g + d], &p[o.ln1_b..o.ln1_b + d], d);
        let qkv = linear(&h1, p, o.w_qkv, o.b_qkv, d, 3 * d);
        let (probs, ctx) = attention_forward(&qkv, l, cfg);
        let a = linear(&ctx, p, o.w_o, o.b_o, d, d);
        for (xv, av) in x.iter_mut().zip(&a) {
            *xv += *av;
        }
        let (h2, ln2) = layer_norm(&x, &p[o.ln2_g..o.ln2_g + d], &p[o.ln2_b..o.ln2_b + d], d);
        let fc = linear(&h2, p, o.w_fc, o.b_fc, d, f);
        let act: Vec<F> = fc.iter().map(|&z| gelu(z)).collect();
        let m = linear(&act, p, o.w_proj, o.b_proj, f, d);
        for (xv, mv) in x.iter_mut().zip(&m) {
            *xv += *mv;
        }
        layers.push(LayerCache {
            ln1,
            h1,
            qkv,
            probs,
            ctx,
            ln2,
            h2,
            fc,
            act,
        });
    }
    let (hf, lnf) = layer_norm(&x, &p[lay.lnf_g..lay.lnf_g + d], &p[lay.lnf_b..lay.lnf_b + d], d);
    let logits = linear(&hf, p, lay.w_policy, lay.b_policy, d, v);
    let time_z = linear(&hf, p, lay.w_time, lay.b_time, d, 1);
    let value_z = linear(&hf, p, lay.w_value, lay.b_value, d, 1);
    let time = time_z.iter().map(|&z| softplus(z)).collect();
    let value = value_z.iter().map(|&z| if cfg.value_squash { z.tanh() } else { z }).collect();
    (
        Outputs {
            len: l,
            vocab: v,
            logits,
            time,
            value,
        },
        Cache {
            tokens: tokens.to_vec(),
            gamma,
            layers,
            lnf,
            hf,
            time_z,
        },
    )
}

/// Unnormalized loss sums and the number of contributing positions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossSums {
    pub nll: f64,
    pub time: f64,
    pub value: f64,
    pub n_policy: usize,
    pub n_time: usize,
    pub n_value: usize,
}

impl LossSums {
    pub fn add(&mut self, o: &LossSums) {
        self.nll += o.nll;
        self.time += o.time;
        self.value += o.value;
        self.n_policy += o.n_policy;
        self.n_time += o.n_time;
        self.n_value += o.n_value;
    }

    fn mean(sum: f64, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    pub fn mean_nll(&self) -> f64 {
        Self::mean(self.nll, self.n_policy)
    }

    pub fn mean_time(&self) -> f64 {
        Self::mean(self.time, self.n_time)
    }

    pub fn mean_value(&self) -> f64 {
        Self::mean(self.value, self.n_value)
    }

    /// Weighted sum of the per-head means.
    pub fn total(&self, w: [f64; 3]) -> f64 {
        w[0] * self.mean_nll() + w[1] * self.mean_time() + w[2] * self.mean_value()
    }
}

/// Gradient multipliers: loss weight divided by the number of positions the
/// head is averaged over in the batch.
#[derive(Clone, Copy, Debug)]
pub struct Scales {
    pub policy: f64,
    pub time: f64,
    pub value: f64,
}

impl Scales {
    pub fn for_batch(cfg: &ModelConfig, examples: &[&Example]) -> Scales {
        let count = |f: fn(&Example) -> &Vec<bool>| -> usize {
            examples.iter().map(|e| f(e).iter().filter(|&&b| b).count()).sum()
        };
        let s = |w: f64, n: usize| if n == 0 { 0.0 } else { w / n as f64 };
        Scales {
            policy: s(cfg.loss_weights[0], count(|e| &e.policy_mask)),
            time: s(cfg.loss_weights[1], count(|e| &e.time_mask)),
            value: s(cfg.loss_weights[2], count(|e| &e.value_mask)),
        }
    }
}

pub(crate) fn time_target(cfg: &ModelConfig, seconds: f32) -> f64 {
    if cfg.log_time {
        (seconds as f64).ln_1p()
    } else {
        seconds as f64
    }
}

/// Loss of one example plus gradients w.r.t. the logits and head
/// pre-activations (already multiplied by `scales`).
fn head_loss<F: Scalar>(
    cfg: &ModelConfig,
    out: &Outputs<F>,
    cache: &Cache<F>,
    ex: &Example,
    scales: Option<Scales>,
) -> (LossSums, Option<(Vec<F>, Vec<F>, Vec<F>)>) {
    let (l, v) = (out.len, out.vocab);
    let mut sums = LossSums::default();
    let mut grads = scales.map(|_| (vec![F::zero(); l * v], vec![F::zero(); l], vec![F::zero(); l]));
    for i in 0..l {
        if ex.policy_mask[i] {
            let row = out.logits_at(i);
            let max = row.iter().copied().fold(F::neg_infinity(), F::max);
            let sum: F = row.iter().map(|&z| (z - max).exp()).sum();
            let lse = max + sum.ln();
            let target = ex.targets[i] as usize;
            sums.nll += (lse - row[target]).to_f64().expect("finite");
            sums.n_policy += 1;
            if let (Some(s), Some(g)) = (scales, grads.as_mut()) {
                let k = F::of(s.policy);
                let gr = &mut g.0[i * v..(i + 1) * v];
                for j in 0..v {
                    gr[j] = (row[j] - lse).exp() * k;
                }
                gr[target] = gr[target] - k;
            }
        }
        if ex.time_mask[i] {
            let err = out.time[i] - F::of(time_target(cfg, ex.time_target[i]));
            sums.time += (err * err).to_f64().expect("finite");
            sums.n_time += 1;
            if let (Some(s), Some(g)) = (scales, grads.as_mut()) {
                g.1[i] = F::of(2.0 * s.time) * err * sigmoid(cache.time_z[i]);
            }
        }
        if ex.value_mask[i] {
            let pred = out.value[i];
            let err = pred - F::of(ex.value_target[i] as f64);
            sums.value += (err * err).to_f64().expect("finite");
            sums.n_value += 1;
            if let (Some(s), Some(g)) = (scales, grads.as_mut()) {
                let dpred = if cfg.value_squash { F::one() - pred * pred } else { F::one() };
                g.2[i] = F::of(2.0 * s.value) * err * dpred;
            }
        }
    }
    (sums, grads)
}

/// Loss sums of one example without gradients.
pub fn example_loss<F: Scalar>(cfg: &ModelConfig, lay: &Layout, p: &[F], ex: &Example) -> LossSums {
    let (out, cache) = forward(cfg, lay, p, &ex.tokens, ex.elo);
    head_loss(cfg, &out, &cache, ex, None).0
}

/// Forward and backward over one example; gradients are added into `grad`.
pub fn example_grad<F: Scalar>(
    cfg: &ModelConfig,
    lay: &Layout,
    p: &[F],
    ex: &Example,
    scales: Scales,
    grad: &mut [F],
) -> LossSums {
    let (out, cache) = forward(cfg, lay, p, &ex.tokens, ex.elo);
    let (sums, g) = head_loss(cfg, &out, &cache, ex, Some(scales));
    let (dlogits, dtz, dvz) = g.expect("gradients requested");
    backward(cfg, lay, p, &cache, &dlogits, &dtz, &dvz, grad);
    sums
}

#[allow(clippy::too_many_arguments)]
fn backward<F: Scalar>(
    cfg: &ModelConfig,
    lay: &Layout,
    p: &[F],
    c: &Cache<F>,
    dlogits: &[F],
    dtz: &[F],
    dvz: &[F],
    grad: &mut [F],
) {
    let (d, f, v) = (cfg.d_model, cfg.d_ff(), cfg.vocab_size);
    let l = c.tokens.len();
    let mut dhf = linear_backward(&c.hf, dlogits, p, grad, lay.w_policy, lay.b_policy, d, v);
    let dt = linear_backward(&c.hf, dtz, p, grad, lay.w_time, lay.b_time, d, 1);
    let dv = linear_backward(&c.hf, dvz, p, grad, lay.w_value, lay.b_value, d, 1);
    for ((a, b), cc) in dhf.iter_mut().zip(&dt).zip(&dv) {
        *a += *b + *cc;
    }
    let mut dx = {
        let (dg, db) = split_two(grad, lay.lnf_g, lay.lnf_b, d);
        layer_norm_backward(&dhf, &c.lnf, &p[lay.lnf_g..lay.lnf_g + d], dg, db, d)
    };
    for (o, lc) in lay.layers.iter().zip(&c.layers).rev() {
        layer_backward(cfg, p, o, lc, &mut dx, grad, l, d, f);
    }
    // Embeddings.
    for i in 0..l {
        let dxi = &dx[i * d..(i + 1) * d];
        for (g, &x) in grad[lay.pos_emb + i * d..][..d].iter_mut().zip(dxi) {
            *g += x;
        }
        if let Some(slot) = ELO_SLOTS.iter().position(|&s| s == i) {
            let gm = c.gamma[slot];
            for (j, &x) in dxi.iter().enumerate() {
                grad[lay.tok_emb + ELO_WEAK as usize * d + j] += gm * x;
                grad[lay.tok_emb + ELO_STRONG as usize * d + j] += (F::one() - gm) * x;
            }
        } else {
            let t = c.tokens[i] as usize;
            for (g, &x) in grad[lay.tok_emb + t * d..][..d].iter_mut().zip(dxi) {
                *g += x;
            }
        }
    }
}

/// Two disjoint mutable `d`-length windows of `grad` (gain then bias).
fn split_two<F>(grad: &mut [F], a: usize, b: usize, d: usize) -> (&mut [F], &mut [F]) {
    assert!(a + d <= b);
    let (lo, hi) = grad.split_at_mut(b);
    (&mut lo[a..a + d], &mut hi[..d])
}

#[allow(clippy::too_many_arguments)]
fn layer_backward<F: Scalar>(
    cfg: &ModelConfig,
    p: &[F],
    o: &LayerOffsets,
    lc: &LayerCache<F>,
    dx: &mut [F],
    grad: &mut [F],
    l: usize,
    d: usize,
    f: usize,
) {
    // MLP branch.
    let dact = linear_backward(&lc.act, dx, p, grad, o.w_proj, o.b_proj, f, d);
    let dfc: Vec<F> = dact.iter().zip(&lc.fc).map(|(&g, &z)| g * gelu_grad(z)).collect();
    let dh2 = linear_backward(&lc.h2, &dfc, p, grad, o.w_fc, o.b_fc, d, f);
    let dln2 = {
        let (dg, db) = split_two(grad, o.ln2_g, o.ln2_b, d);
        layer_norm_backward(&dh2, &lc.ln2, &p[o.ln2_g..o.ln2_g + d], dg, db, d)
    };
    for (a, b) in dx.iter_mut().zip(&dln2) {
        *a += *b;
    }
    // Attention branch.
    let dctx = linear_backward(&lc.ctx, dx, p, grad, o.w_o, o.b_o, d, d);
    let dqkv = attention_backward(&lc.qkv, &lc.probs, &dctx, l, cfg);
    let dh1 = linear_backward(&lc.h1, &dqkv, p, grad, o.w_qkv, o.b_qkv, d, 3 * d);
    let dln1 = {
        let (dg, db) = split_two(grad, o.ln1_g, o.ln1_b, d);
        layer_norm_backward(&dh1, &lc.ln1, &p[o.ln1_g..o.ln1_g + d], dg, db, d)
    };
    for (a, b) in dx.iter_mut().zip(&dln1) {
        *a += *b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    #[test]
    fn causal_and_bounded() {
        let cfg = ModelConfig::tiny();
        let lay = Layout::new(&cfg);
        let p: Vec<f64> = init_params(&cfg, &lay, 1);
        let a: Vec<TokenId> = vec![1969, 1970, 1970, 1980, 5, 9, 77, 300, 12];
        let mut b = a.clone();
        b[6] = 1000;
        let (oa, _) = forward(&cfg, &lay, &p, &a, [1200.0, 1800.0]);
        let (ob, _) = forward(&cfg, &lay, &p, &b, [1200.0, 1800.0]);
        for i in 0..a.len() {
            let same = oa.logits_at(i) == ob.logits_at(i) && oa.value[i] == ob.value[i] && oa.time[i] == ob.time[i];
            assert_eq!(same, i < 6, "position {i}");
            assert!(oa.value[i].abs() <= 1.0 && oa.time[i] >= 0.0);
        }
    }
}
