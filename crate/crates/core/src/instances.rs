//! Seeded random instance generators for verification suites, benches, and
//! config-driven experiments. Pure functions of their seeds.

use crate::error::Result;
use crate::rng::{next_unit, rng_for_seed};
use crate::types::{ActionMeasure, BenchmarkSet, ContextualFunctionClass, FunctionClassSlice};

/// A random function slice with entries uniform in [0, 1].
pub fn random_slice(seed: u64, num_functions: usize, num_actions: usize) -> FunctionClassSlice {
    let mut rng = rng_for_seed(seed ^ 0xA5A5_5A5A_0F0F_F0F0);
    let rows = (0..num_functions)
        .map(|_| (0..num_actions).map(|_| next_unit(&mut rng)).collect())
        .collect();
    FunctionClassSlice::new(rows).expect("uniform draws are valid rows")
}

/// A random contextual class; when `realizable` the last member is marked as
/// the ground truth.
pub fn random_class(
    seed: u64,
    num_functions: usize,
    num_contexts: usize,
    num_actions: usize,
    realizable: bool,
) -> ContextualFunctionClass {
    let mut rng = rng_for_seed(seed ^ 0x0123_4567_89AB_CDEF);
    let values: Vec<Vec<Vec<f64>>> = (0..num_functions)
        .map(|_| {
            (0..num_contexts)
                .map(|_| (0..num_actions).map(|_| next_unit(&mut rng)).collect())
                .collect()
        })
        .collect();
    let star = realizable.then_some(num_functions - 1);
    ContextualFunctionClass::new(values, star).expect("uniform draws are valid")
}

/// Per-context linear class on a finite parameter grid: features per
/// (context, action) lie on the probability simplex and parameters range
/// over a lattice in [0, 1]^dim, so every member maps into [0, 1].
pub fn linear_grid_class(
    seed: u64,
    dim: usize,
    grid_points_per_dim: usize,
    num_contexts: usize,
    num_actions: usize,
) -> Result<ContextualFunctionClass> {
    let mut rng = rng_for_seed(seed ^ 0xDEAD_BEEF_CAFE_F00D);
    // Simplex-normalized feature vectors.
    let mut features = vec![vec![vec![0.0; dim]; num_actions]; num_contexts];
    for ctx in features.iter_mut() {
        for feat in ctx.iter_mut() {
            let raw: Vec<f64> = (0..dim).map(|_| next_unit(&mut rng) + 1e-9).collect();
            let total: f64 = raw.iter().sum();
            for (f, r) in feat.iter_mut().zip(raw) {
                *f = r / total;
            }
        }
    }
    // All parameter vectors on the lattice {0, 1/(g-1), ..., 1}^dim.
    let g = grid_points_per_dim.max(2);
    let mut thetas: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..dim {
        let mut extended = Vec::with_capacity(thetas.len() * g);
        for partial in &thetas {
            for step in 0..g {
                let mut next = partial.clone();
                next.push(step as f64 / (g - 1) as f64);
                extended.push(next);
            }
        }
        thetas = extended;
    }
    let values: Vec<Vec<Vec<f64>>> = thetas
        .iter()
        .map(|theta| {
            (0..num_contexts)
                .map(|x| {
                    (0..num_actions)
                        .map(|a| {
                            features[x][a]
                                .iter()
                                .zip(theta)
                                .map(|(f, t)| f * t)
                                .sum::<f64>()
                                .clamp(0.0, 1.0)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let star = values.len() - 1;
    ContextualFunctionClass::new(values, Some(star))
}

/// Deterministic benchmark set for suite instance `index`: alternates Dirac
/// and smooth kinds; smooth instances use a uniform base measure with an
/// integer support size.
pub fn suite_benchmark(index: u64, num_actions: usize) -> BenchmarkSet {
    if index % 2 == 0 {
        BenchmarkSet::Dirac
    } else {
        let support = 1 + (index / 2) as usize % num_actions;
        BenchmarkSet::Smooth {
            h: support as f64 / num_actions as f64,
            mu: ActionMeasure::uniform(num_actions),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(random_slice(3, 4, 5), random_slice(3, 4, 5));
        assert_eq!(
            random_class(9, 3, 2, 4, true),
            random_class(9, 3, 2, 4, true)
        );
    }

    #[test]
    fn linear_grid_class_shapes() {
        let class = linear_grid_class(1, 2, 3, 2, 4).unwrap();
        assert_eq!(class.num_functions(), 9);
        assert_eq!(class.num_contexts(), 2);
        assert_eq!(class.num_actions(), 4);
        assert!(class.star_index().is_some());
    }

    #[test]
    fn suite_benchmarks_validate() {
        for index in 0..20 {
            for n in 2..=5 {
                suite_benchmark(index, n).validate(n).unwrap();
            }
        }
    }
}
