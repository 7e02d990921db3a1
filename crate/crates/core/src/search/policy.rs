/// Solution of `max_pi sum_a Q(a) pi(a) - lambda * KL(pi || prior)` over the
/// simplex. Computed on the support of the prior.
#[derive(Clone, Debug, PartialEq)]
pub struct Regularized {
    pub pi: Vec<f64>,
    pub alpha: f64,
    /// `sum(pi) - 1` at the bisection solution, before renormalization.
    pub residual: f64,
}

const ITERATIONS: usize = 64;

/// `pi(a) = lambda * prior(a) / (alpha - Q(a))` with `alpha` found by
/// bisection so that `pi` sums to one. `prior` must be non-negative with a
/// positive sum; it is normalized here.
pub fn regularized_policy(q: &[f64], prior: &[f64], lambda: f64) -> Regularized {
    assert_eq!(q.len(), prior.len(), "q and prior lengths differ");
    assert!(!q.is_empty(), "empty action set");
    let total: f64 = prior.iter().filter(|p| p.is_finite() && **p > 0.0).sum();
    let p: Vec<f64> = if total > 0.0 {
        prior.iter().map(|&x| if x.is_finite() && x > 0.0 { x / total } else { 0.0 }).collect()
    } else {
        vec![1.0 / q.len() as f64; q.len()]
    };
    let support: Vec<usize> = (0..q.len()).filter(|&i| p[i] > 0.0).collect();

    if !(lambda > 0.0) || !lambda.is_finite() {
        // Degenerate strengths: lambda = 0 is greedy in Q, infinite lambda
        // returns the prior.
        let pi = if lambda.is_infinite() {
            p
        } else {
            let best = support.iter().copied().max_by(|&a, &b| q[a].total_cmp(&q[b])).unwrap();
            let mut v = vec![0.0; q.len()];
            v[best] = 1.0;
            v
        };
        return Regularized {
            pi,
            alpha: f64::NAN,
            residual: 0.0,
        };
    }

    let q_max = support.iter().map(|&i| q[i]).fold(f64::NEG_INFINITY, f64::max);
    let p_min = support.iter().map(|&i| p[i]).fold(f64::INFINITY, f64::min);
    let mass = |alpha: f64| -> f64 { support.iter().map(|&i| lambda * p[i] / (alpha - q[i])).sum() };

    // mass(lo) >= 1 >= mass(hi); mass is decreasing in alpha.
    let mut lo = q_max + lambda * p_min;
    let mut hi = q_max + lambda;
    for _ in 0..ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = hi;
    let mut pi = vec![0.0; q.len()];
    for &i in &support {
        pi[i] = lambda * p[i] / (alpha - q[i]);
    }
    let sum: f64 = pi.iter().sum();
    for x in &mut pi {
        *x /= sum;
    }
    Regularized {
        pi,
        alpha,
        residual: sum - 1.0,
    }
}

/// Total-variation distance between two distributions.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn limits() {
        let q = [0.1, -0.3, 0.7, 0.2];
        let p = [0.4, 0.3, 0.1, 0.2];
        let big = regularized_policy(&q, &p, 1e6);
        assert!(total_variation(&big.pi, &p) < 1e-3);
        let small = regularized_policy(&q, &p, 1e-9);
        assert!(small.pi[2] > 0.999, "{:?}", small.pi);
    }

    #[test]
    fn closed_form_two_actions() {
        // Two actions, equal priors, Q = +-d: pi(a) = lambda p / (alpha - q).
        let r = regularized_policy(&[0.5, -0.5], &[0.5, 0.5], 1.0);
        let alpha = r.alpha;
        let expected = 0.5 / (alpha - 0.5);
        assert!((r.pi[0] - expected).abs() < 1e-9);
        // alpha solves 0.5/(a-0.5) + 0.5/(a+0.5) = 1, i.e. a^2 - a - 0.25 = 0.
        let exact = (1.0 + 2f64.sqrt()) / 2.0;
        assert!((alpha - exact).abs() < 1e-12, "{alpha} {exact}");
    }

    proptest! {
        #[test]
        fn sums_to_one_and_homogeneous(
            q in prop::collection::vec(-1.0f64..1.0, 2..40),
            seed in prop::collection::vec(0.01f64..1.0, 40),
            lambda in 1e-4f64..10.0,
            k in 0.1f64..10.0,
        ) {
            let p = &seed[..q.len()];
            let r = regularized_policy(&q, p, lambda);
            prop_assert!(r.residual.abs() < 1e-9, "residual {}", r.residual);
            prop_assert!((r.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let qs: Vec<f64> = q.iter().map(|x| x * k).collect();
            let s = regularized_policy(&qs, p, lambda * k);
            prop_assert!(total_variation(&r.pi, &s.pi) < 1e-9);
        }
    }
}
