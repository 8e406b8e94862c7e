//! The coverage functional: how well samples from a behavior measure `p`
//! support extrapolating expected rewards under a target distribution `q`,
//! with respect to a finite function class and a regularizer `eps`.
//!
//! The covering measure `p` need not be normalized; the target `q` must be a
//! distribution. Everything here is an exact pair scan, no sampling.

use crate::error::{Error, Result};
use crate::types::{ActionMeasure, FunctionClassSlice};

fn check_inputs(
    p: &ActionMeasure,
    q: &ActionMeasure,
    class: &FunctionClassSlice,
    eps: f64,
) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::Domain {
            name: "eps",
            reason: format!("regularizer must be positive, got {eps}"),
        });
    }
    let n = class.num_actions();
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: p.len(),
        });
    }
    if q.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: q.len(),
        });
    }
    if !q.is_distribution() {
        return Err(Error::NotADistribution {
            deviation: (q.l1_norm() - 1.0).abs(),
        });
    }
    Ok(())
}

/// Max over function pairs (g, g') of
/// `(E_q[g - g'])^2 / (eps + sum_a p(a) (g(a) - g'(a))^2)`.
///
/// Since eps > 0 the denominator is strictly positive, so a pair with zero
/// difference contributes exactly 0, never NaN.
pub fn coverage(
    p: &ActionMeasure,
    q: &ActionMeasure,
    class: &FunctionClassSlice,
    eps: f64,
) -> Result<f64> {
    Ok(worst_pair(p, q, class, eps)?.2)
}

/// The pair attaining the coverage supremum, plus its value.
///
/// The pair is reported oriented so the mean difference `E_q[g - g']` is
/// nonnegative; among tied maximizers the lexicographically smallest
/// `(g id, g' id)` wins.
pub fn worst_pair(
    p: &ActionMeasure,
    q: &ActionMeasure,
    class: &FunctionClassSlice,
    eps: f64,
) -> Result<(usize, usize, f64)> {
    check_inputs(p, q, class, eps)?;
    let m = class.num_functions();
    let n = class.num_actions();
    let mut best = (0usize, 0usize);
    let mut best_value = f64::NEG_INFINITY;
    for i in 0..m {
        for j in 0..m {
            let gi = class.row(i);
            let gj = class.row(j);
            let mut mean_diff = 0.0;
            let mut weighted_sq = 0.0;
            for a in 0..n {
                let d = gi[a] - gj[a];
                mean_diff += q.weight(a) * d;
                weighted_sq += p.weight(a) * d * d;
            }
            if mean_diff < 0.0 {
                continue; // the (j, i) orientation covers this pair
            }
            let value = mean_diff * mean_diff / (eps + weighted_sq);
            if value > best_value {
                best_value = value;
                best = (i, j);
            }
        }
    }
    Ok((best.0, best.1, best_value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn slice(rows: Vec<Vec<f64>>) -> FunctionClassSlice {
        FunctionClassSlice::new(rows).unwrap()
    }

    fn seeded_values(seed: u64, count: usize) -> Vec<f64> {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        (0..count)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect()
    }

    /// Independent exhaustive double-loop oracle.
    fn coverage_oracle(p: &[f64], q: &[f64], rows: &[Vec<f64>], eps: f64) -> f64 {
        let mut best: f64 = 0.0;
        for g in rows {
            for g2 in rows {
                let mut num = 0.0;
                let mut den = eps;
                for a in 0..p.len() {
                    num += q[a] * (g[a] - g2[a]);
                    den += p[a] * (g[a] - g2[a]) * (g[a] - g2[a]);
                }
                best = best.max(num * num / den);
            }
        }
        best
    }

    #[test]
    fn singleton_class_has_zero_coverage() {
        let g = slice(vec![vec![0.3, 0.8]]);
        let p = ActionMeasure::uniform(2);
        let q = ActionMeasure::dirac(2, 1);
        assert_eq!(coverage(&p, &q, &g, 0.5).unwrap(), 0.0);
        assert_eq!(worst_pair(&p, &q, &g, 0.5).unwrap(), (0, 0, 0.0));
    }

    #[test]
    fn two_constant_functions_point_mass() {
        // G = {0, 1}, p = q = delta_a, eps = 1: 1^2 / (1 + 1) = 0.5.
        let g = slice(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        let p = ActionMeasure::dirac(2, 0);
        assert_eq!(coverage(&p, &p, &g, 1.0).unwrap(), 0.5);
        // Reported with the nonnegative mean difference first.
        assert_eq!(worst_pair(&p, &p, &g, 1.0).unwrap(), (1, 0, 0.5));
    }

    #[test]
    fn matches_naive_pair_scan() {
        // |A| = 4, |G| = 5 seeded instance vs the oracle, to 1e-12.
        let raw: Vec<Vec<f64>> = (0..5).map(|i| seeded_values(40 + i, 4)).collect();
        let g = slice(raw.clone());
        let pw = seeded_values(99, 4);
        let p = ActionMeasure::new(pw.clone()).unwrap();
        let qw = seeded_values(7, 4);
        let qs: f64 = qw.iter().sum();
        let qn: Vec<f64> = qw.iter().map(|w| w / qs).collect();
        let q = ActionMeasure::new(qn.clone()).unwrap();
        let got = coverage(&p, &q, &g, 0.01).unwrap();
        let want = coverage_oracle(&pw, &qn, g.rows(), 0.01);
        assert!((got - want).abs() <= 1e-12, "got {got}, want {want}");
        let (_, _, pair_value) = worst_pair(&p, &q, &g, 0.01).unwrap();
        assert_eq!(pair_value, got);
    }

    #[test]
    fn nonpositive_eps_rejected() {
        let g = slice(vec![vec![0.0, 1.0]]);
        let p = ActionMeasure::uniform(2);
        assert!(coverage(&p, &p.clone(), &g, 0.0).is_err());
        assert!(coverage(&p, &p.clone(), &g, -1.0).is_err());
    }

    #[test]
    fn unnormalized_target_rejected() {
        let g = slice(vec![vec![0.0, 1.0]]);
        let p = ActionMeasure::uniform(2);
        let q = ActionMeasure::new(vec![0.4, 0.4]).unwrap();
        assert!(matches!(
            coverage(&p, &q, &g, 0.1),
            Err(Error::NotADistribution { .. })
        ));
    }

    fn arb_instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64)> {
        (2usize..=5, 1usize..=5).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, n), m),
                proptest::collection::vec(0.0f64..2.0, n),
                proptest::collection::vec(0.01f64..1.0, n),
                0.001f64..2.0,
            )
        })
    }

    proptest! {
        #[test]
        fn coverage_nonnegative_and_bounded((rows, pw, qw, eps) in arb_instance()) {
            let g = slice(rows);
            let p = ActionMeasure::new(pw).unwrap();
            let qs: f64 = qw.iter().sum();
            let q = ActionMeasure::new(qw.iter().map(|w| w / qs).collect()).unwrap();
            let c = coverage(&p, &q, &g, eps).unwrap();
            prop_assert!(c >= 0.0);
            prop_assert!(c <= 1.0 / eps + 1e-12);
        }

        #[test]
        fn coverage_monotone_in_covering_mass((rows, pw, qw, eps) in arb_instance(), extra in proptest::collection::vec(0.0f64..1.0, 5)) {
            let g = slice(rows);
            let n = pw.len();
            let p = ActionMeasure::new(pw.clone()).unwrap();
            let bigger = ActionMeasure::new(
                pw.iter().zip(extra.iter().take(n)).map(|(a, b)| a + b).collect()
            ).unwrap();
            let qs: f64 = qw.iter().sum();
            let q = ActionMeasure::new(qw.iter().map(|w| w / qs).collect()).unwrap();
            let c_small = coverage(&p, &q, &g, eps).unwrap();
            let c_big = coverage(&bigger, &q, &g, eps).unwrap();
            prop_assert!(c_big <= c_small + 1e-12);
        }

        #[test]
        fn coverage_monotone_in_eps((rows, pw, qw, eps) in arb_instance(), bump in 0.001f64..1.0) {
            let g = slice(rows);
            let p = ActionMeasure::new(pw).unwrap();
            let qs: f64 = qw.iter().sum();
            let q = ActionMeasure::new(qw.iter().map(|w| w / qs).collect()).unwrap();
            let c1 = coverage(&p, &q, &g, eps).unwrap();
            let c2 = coverage(&p, &q, &g, eps + bump).unwrap();
            prop_assert!(c2 <= c1 + 1e-12);
        }

        #[test]
        fn ordered_scan_equals_unordered_scan((rows, pw, qw, eps) in arb_instance()) {
            let g = slice(rows);
            let p = ActionMeasure::new(pw).unwrap();
            let qs: f64 = qw.iter().sum();
            let q = ActionMeasure::new(qw.iter().map(|w| w / qs).collect()).unwrap();
            let full = coverage(&p, &q, &g, eps).unwrap();
            // Unordered scan over i <= j only; the ratio is swap-invariant.
            let mut unordered: f64 = 0.0;
            for i in 0..g.num_functions() {
                for j in i..g.num_functions() {
                    let mut num = 0.0;
                    let mut den = eps;
                    for a in 0..g.num_actions() {
                        let d = g.value(i, a) - g.value(j, a);
                        num += q.weight(a) * d;
                        den += p.weight(a) * d * d;
                    }
                    unordered = unordered.max(num * num / den);
                }
            }
            prop_assert!((full - unordered).abs() <= 1e-12);
        }

        #[test]
        fn self_coverage_decays((rows, _pw, qw, eps) in arb_instance(), c in 0.1f64..20.0) {
            let g = slice(rows);
            let qs: f64 = qw.iter().sum();
            let q = ActionMeasure::new(qw.iter().map(|w| w / qs).collect()).unwrap();
            let scaled = q.scaled(c).unwrap();
            let cov = coverage(&scaled, &q, &g, eps).unwrap();
            // Explicit pairwise ratio bound: sup over pairs of
            // (E_q h)^2 / E_q[h^2], taken as 0 when the denominator vanishes.
            let mut ratio: f64 = 0.0;
            for i in 0..g.num_functions() {
                for j in 0..g.num_functions() {
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for a in 0..g.num_actions() {
                        let d = g.value(i, a) - g.value(j, a);
                        num += q.weight(a) * d;
                        den += q.weight(a) * d * d;
                    }
                    if den > 0.0 {
                        ratio = ratio.max(num * num / den);
                    }
                }
            }
            prop_assert!(cov <= ratio / c + 1e-9);
        }
    }
}
