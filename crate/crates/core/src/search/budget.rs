/// Rollouts for a move predicted to take `t_pred` seconds:
/// `floor(c_time * t_pred)` clamped to `[n_min, n_max]`.
///
/// The product gets a relative slack of a few ulps before flooring, so that
/// decimal inputs such as `0.29 * 100` give 29 rather than 28.
pub fn adaptive_budget(t_pred: f64, c_time: f64, n_min: usize, n_max: usize) -> usize {
    let prod = c_time * t_pred.max(0.0);
    let raw = (prod + prod * 4.0 * f64::EPSILON).floor();
    if !raw.is_finite() {
        return n_max.max(n_min);
    }
    (raw as usize).clamp(n_min, n_max.max(n_min))
}

/// KL regularization strength. Fixed budgets use `c_kl / sqrt(n_sim)`.
/// In adaptive mode `c_kl` is rescaled by `sqrt(n_sim / reference)`, which
/// leaves `c_kl / sqrt(reference)` whatever the per-move budget.
pub fn kl_strength(c_kl: f64, n_sim: usize, adaptive: bool, reference: usize) -> f64 {
    let n = n_sim.max(1) as f64;
    if adaptive {
        let scaled = c_kl * (n / reference.max(1) as f64).sqrt();
        scaled / n.sqrt()
    } else {
        c_kl / n.sqrt()
    }
}

/// Mean budget over a set of predicted think times.
pub fn mean_budget(times: &[f64], c_time: f64, n_min: usize, n_max: usize) -> f64 {
    if times.is_empty() {
        return 0.0;
    }
    times.iter().map(|&t| adaptive_budget(t, c_time, n_min, n_max) as f64).sum::<f64>() / times.len() as f64
}

/// Smallest `c_time` (to bisection precision) whose mean budget over
/// `times` reaches `target`. Returns `None` if the clamp makes the target
/// unreachable.
pub fn calibrate_c_time(times: &[f64], target: f64, n_min: usize, n_max: usize) -> Option<f64> {
    if times.is_empty() || mean_budget(times, f64::MAX / 4.0, n_min, n_max) < target {
        return None;
    }
    if mean_budget(times, 0.0, n_min, n_max) >= target {
        return Some(0.0);
    }
    let mut hi = 1.0;
    while mean_budget(times, hi, n_min, n_max) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mean_budget(times, mid, n_min, n_max) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_and_clamp() {
        assert_eq!(adaptive_budget(2.3, 10.0, 1, 800), 23);
        assert_eq!(adaptive_budget(0.0, 10.0, 1, 800), 1);
        assert_eq!(adaptive_budget(1e6, 10.0, 1, 800), 800);
        assert_eq!(adaptive_budget(f64::INFINITY, 10.0, 1, 800), 800);
        assert_eq!(adaptive_budget(100.0, 0.29, 1, 800), 29);
        assert_eq!(adaptive_budget(3.0, 0.1, 0, 800), 0);
        assert_eq!(adaptive_budget(2.9999999, 1.0, 0, 800), 2);
    }

    #[test]
    fn strength_scaling() {
        assert_eq!(kl_strength(2.0, 4, false, 50), 1.0);
        assert!((kl_strength(1.0, 10, false, 50) / kl_strength(1.0, 40, false, 50) - 2.0).abs() < 1e-15);
        let a = kl_strength(1.0, 10, true, 50);
        let b = kl_strength(1.0, 200, true, 50);
        assert!((a - b).abs() < 1e-12);
        assert!((a - kl_strength(1.0, 50, false, 50)).abs() < 1e-12);
    }

    #[test]
    fn calibration_hits_target() {
        let times: Vec<f64> = (1..=100).map(|i| i as f64 * 0.1).collect();
        let c = calibrate_c_time(&times, 50.0, 1, 800).unwrap();
        let m = mean_budget(&times, c, 1, 800);
        assert!((50.0..51.0).contains(&m), "{m}");
        assert!(calibrate_c_time(&times, 900.0, 1, 800).is_none());
    }
}
