use serde::{Deserialize, Serialize};

use super::config::Layout;

/// Linear warmup to `lr_max`, then cosine decay to `lr_min` at `total`.
pub fn cosine_lr(step: usize, total: usize, warmup: usize, lr_max: f64, lr_min: f64) -> f64 {
    if step < warmup {
        return lr_max * (step + 1) as f64 / warmup as f64;
    }
    let span = total.saturating_sub(warmup).max(1) as f64;
    let progress = ((step - warmup) as f64 / span).min(1.0);
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Adam with decoupled weight decay, applied only to weight matrices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub t: u64,
    pub m: Vec<f32>,
    pub v: Vec<f32>,
}

/// Parameter ranges that receive weight decay.
pub fn decay_ranges(lay: &Layout) -> Vec<std::ops::Range<usize>> {
    lay.tensors
        .iter()
        .filter(|t| t.shape.len() == 2 && !t.name.ends_with("_emb"))
        .map(|t| t.range())
        .collect()
}

impl AdamW {
    pub fn new(n: usize, weight_decay: f64) -> Self {
        AdamW {
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn step(&mut self, params: &mut [f32], grad: &[f32], lr: f64, decay: &[std::ops::Range<usize>]) {
        assert_eq!(params.len(), grad.len());
        self.t += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let step = (lr / bc1) as f32;
        let bc2_sqrt = bc2.sqrt() as f32;
        let eps = self.eps as f32;
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            params[i] -= step * self.m[i] / (self.v[i].sqrt() / bc2_sqrt + eps);
        }
        let shrink = (lr * self.weight_decay) as f32;
        if shrink > 0.0 {
            for r in decay {
                for p in &mut params[r.clone()] {
                    *p -= shrink * *p;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        assert!((cosine_lr(0, 100, 0, 6e-4, 1e-5) - 6e-4).abs() < 1e-15);
        assert!((cosine_lr(100, 100, 0, 6e-4, 1e-5) - 1e-5).abs() < 1e-15);
        assert!((cosine_lr(50, 100, 0, 6e-4, 1e-5) - (6e-4 + 1e-5) / 2.0).abs() < 1e-15);
        assert!((cosine_lr(4, 100, 10, 6e-4, 1e-5) - 3e-4).abs() < 1e-15);
        for s in 10..100 {
            assert!(cosine_lr(s + 1, 100, 10, 6e-4, 1e-5) <= cosine_lr(s, 100, 10, 6e-4, 1e-5));
        }
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut x = vec![3.0f32, -2.0];
        let mut opt = AdamW::new(2, 0.0);
        for _ in 0..2000 {
            let g: Vec<f32> = x.iter().map(|v| 2.0 * v).collect();
            opt.step(&mut x, &g, 0.01, &[]);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2), "{x:?}");
    }
}
