//! Foundational domain types: action measures, function classes, benchmark
//! sets, and design certificates.
//!
//! All types are immutable after construction and cheap to clone at desk
//! scale. Operations on them are pure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for normalization and membership checks throughout the crate.
pub const NORM_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// ActionMeasure
// ---------------------------------------------------------------------------

/// A nonnegative measure over a finite action set, indexed by action id.
///
/// A probability distribution is the special case `|l1_norm() - 1| <= 1e-12`.
/// The unnormalized form is what the design solver accumulates while it runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionMeasure {
    weights: Vec<f64>,
}

impl ActionMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidWeight { index, value });
            }
        }
        Ok(Self { weights })
    }

    /// The zero measure on `n` actions.
    pub fn zero(n: usize) -> Self {
        Self {
            weights: vec![0.0; n],
        }
    }

    /// Point mass on action `a`.
    pub fn dirac(n: usize, a: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[a] = 1.0;
        Self { weights }
    }

    /// Uniform distribution over `n` actions.
    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, a: usize) -> f64 {
        self.weights[a]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_distribution(&self) -> bool {
        (self.l1_norm() - 1.0).abs() <= NORM_TOL
    }

    /// `self + delta * other`, leaving both inputs untouched.
    pub fn plus_scaled(&self, other: &ActionMeasure, delta: f64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| a + delta * b)
            .collect();
        Self::new(weights)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.weights.iter().map(|w| w * c).collect())
    }

    /// Expectation of the reward row `g` under this measure: `sum_a m(a) g(a)`.
    /// Linear in the measure.
    pub fn expected_value(&self, g: &[f64]) -> Result<f64> {
        if g.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: g.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(g)
            .map(|(w, v)| w * v)
            .sum())
    }

    /// Draw an action from this distribution given a uniform u in [0, 1).
    pub fn sample_with(&self, u: f64) -> usize {
        debug_assert!(self.is_distribution());
        let mut cdf = 0.0;
        for (a, &w) in self.weights.iter().enumerate() {
            cdf += w;
            if u < cdf {
                return a;
            }
        }
        self.weights.len() - 1
    }
}

/// Free-function form of [`ActionMeasure::expected_value`].
pub fn expected_value(m: &ActionMeasure, g: &[f64]) -> Result<f64> {
    m.expected_value(g)
}

// ---------------------------------------------------------------------------
// FunctionClassSlice
// ---------------------------------------------------------------------------

/// A finite set of reward functions over one action set (one context's
/// restriction of a contextual class). Duplicate rows are removed at
/// construction; coverage and the complexity measures are invariant to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionClassSlice {
    values: Vec<Vec<f64>>,
}

impl FunctionClassSlice {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        Ok(Self::new_mapped(rows)?.0)
    }

    /// Construct with deduplication, returning `map[i]` = the retained index
    /// of original row `i` (so designated-member indices can be remapped).
    pub fn new_mapped(rows: Vec<Vec<f64>>) -> Result<(Self, Vec<usize>)> {
        if rows.is_empty() {
            return Err(Error::EmptyFunctionClass);
        }
        let width = rows[0].len();
        let mut kept: Vec<Vec<f64>> = Vec::new();
        let mut map = Vec::with_capacity(rows.len());
        for (fi, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    actual: row.len(),
                });
            }
            for (ai, &v) in row.iter().enumerate() {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::ValueOutOfRange {
                        function: fi,
                        action: ai,
                        value: v,
                    });
                }
            }
            match kept.iter().position(|r| bitwise_eq(r, &row)) {
                Some(idx) => map.push(idx),
                None => {
                    kept.push(row);
                    map.push(kept.len() - 1);
                }
            }
        }
        Ok((Self { values: kept }, map))
    }

    pub fn num_functions(&self) -> usize {
        self.values.len()
    }

    pub fn num_actions(&self) -> usize {
        self.values[0].len()
    }

    pub fn row(&self, f: usize) -> &[f64] {
        &self.values[f]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn value(&self, f: usize, a: usize) -> f64 {
        self.values[f][a]
    }
}

fn bitwise_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

// ---------------------------------------------------------------------------
// ContextualFunctionClass
// ---------------------------------------------------------------------------

/// A finite reward function class over context-action pairs, stored as a
/// tensor `[function][context][action]` with values in [0, 1].
///
/// `star_index`, when set, designates the ground-truth member (realizable
/// case).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextualFunctionClass {
    values: Vec<Vec<Vec<f64>>>,
    star_index: Option<usize>,
}

impl ContextualFunctionClass {
    pub fn new(values: Vec<Vec<Vec<f64>>>, star_index: Option<usize>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyFunctionClass);
        }
        let num_contexts = values[0].len();
        if num_contexts == 0 {
            return Err(Error::Domain {
                name: "num_contexts",
                reason: "class must cover at least one context".into(),
            });
        }
        let num_actions = values[0][0].len();
        for (fi, per_context) in values.iter().enumerate() {
            if per_context.len() != num_contexts {
                return Err(Error::DimensionMismatch {
                    expected: num_contexts,
                    actual: per_context.len(),
                });
            }
            for row in per_context {
                if row.len() != num_actions {
                    return Err(Error::DimensionMismatch {
                        expected: num_actions,
                        actual: row.len(),
                    });
                }
                for (ai, &v) in row.iter().enumerate() {
                    if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                        return Err(Error::ValueOutOfRange {
                            function: fi,
                            action: ai,
                            value: v,
                        });
                    }
                }
            }
        }
        if let Some(star) = star_index {
            if star >= values.len() {
                return Err(Error::IndexOutOfRange {
                    index: star,
                    len: values.len(),
                });
            }
        }
        Ok(Self { values, star_index })
    }

    pub fn num_functions(&self) -> usize {
        self.values.len()
    }

    pub fn num_contexts(&self) -> usize {
        self.values[0].len()
    }

    pub fn num_actions(&self) -> usize {
        self.values[0][0].len()
    }

    pub fn star_index(&self) -> Option<usize> {
        self.star_index
    }

    pub fn value(&self, f: usize, x: usize, a: usize) -> f64 {
        self.values[f][x][a]
    }

    pub fn context_row(&self, f: usize, x: usize) -> &[f64] {
        &self.values[f][x]
    }

    /// Restriction to context `x`, deduped, with `map[f]` giving the slice
    /// index of the original member `f`.
    pub fn slice(&self, x: usize) -> Result<(FunctionClassSlice, Vec<usize>)> {
        if x >= self.num_contexts() {
            return Err(Error::IndexOutOfRange {
                index: x,
                len: self.num_contexts(),
            });
        }
        let rows = self.values.iter().map(|f| f[x].clone()).collect();
        FunctionClassSlice::new_mapped(rows)
    }
}

// ---------------------------------------------------------------------------
// BenchmarkSet
// ---------------------------------------------------------------------------

/// The family of benchmark distributions the learner competes against.
///
/// - `Dirac`: all point masses over the action set.
/// - `Smooth`: distributions with density at most `mu(a)/h` (so mass cannot
///   concentrate more than `1/h` times the base measure).
/// - `Explicit`: a finite list of distributions.
/// - `PerContext`: a different benchmark set per context id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BenchmarkSet {
    Dirac,
    Smooth { h: f64, mu: ActionMeasure },
    Explicit(Vec<ActionMeasure>),
    PerContext(BTreeMap<usize, BenchmarkSet>),
}

impl BenchmarkSet {
    /// Validate the invariants of this set against an action count.
    ///
    /// Smooth sets require `h * n` to be a positive integer, a strictly
    /// positive base measure, and per-action caps `mu(a)/h <= 1` (the regime
    /// where the vertex enumeration below is exact).
    pub fn validate(&self, num_actions: usize) -> Result<()> {
        match self {
            BenchmarkSet::Dirac => Ok(()),
            BenchmarkSet::Smooth { h, mu } => {
                if !(*h > 0.0 && *h <= 1.0) {
                    return Err(Error::SmoothingConfig {
                        reason: format!("h = {h} must lie in (0, 1]"),
                    });
                }
                if mu.len() != num_actions {
                    return Err(Error::DimensionMismatch {
                        expected: num_actions,
                        actual: mu.len(),
                    });
                }
                if !mu.is_distribution() {
                    return Err(Error::SmoothingConfig {
                        reason: "base measure mu must be a distribution".into(),
                    });
                }
                let hn = h * num_actions as f64;
                if (hn - hn.round()).abs() > 1e-9 || hn.round() < 1.0 {
                    return Err(Error::SmoothingConfig {
                        reason: format!("h * |A| = {hn} must be a positive integer"),
                    });
                }
                for a in 0..num_actions {
                    let cap = mu.weight(a) / h;
                    if mu.weight(a) <= 0.0 {
                        return Err(Error::SmoothingConfig {
                            reason: format!("mu({a}) must be strictly positive"),
                        });
                    }
                    if cap > 1.0 + 1e-9 {
                        return Err(Error::SmoothingConfig {
                            reason: format!(
                                "density cap mu({a})/h = {cap} exceeds 1; vertex enumeration \
                                 is only supported for caps at most 1"
                            ),
                        });
                    }
                }
                Ok(())
            }
            BenchmarkSet::Explicit(members) => {
                if members.is_empty() {
                    return Err(Error::Domain {
                        name: "benchmark",
                        reason: "explicit benchmark set must be nonempty".into(),
                    });
                }
                for m in members {
                    if m.len() != num_actions {
                        return Err(Error::DimensionMismatch {
                            expected: num_actions,
                            actual: m.len(),
                        });
                    }
                    if !m.is_distribution() {
                        return Err(Error::NotADistribution {
                            deviation: (m.l1_norm() - 1.0).abs(),
                        });
                    }
                }
                Ok(())
            }
            BenchmarkSet::PerContext(map) => {
                if map.is_empty() {
                    return Err(Error::Domain {
                        name: "benchmark",
                        reason: "per-context benchmark map must be nonempty".into(),
                    });
                }
                for set in map.values() {
                    set.validate(num_actions)?;
                }
                Ok(())
            }
        }
    }

    /// Resolve a per-context set at context `x`; other kinds are returned
    /// unchanged.
    pub fn resolve(&self, x: Option<usize>) -> Result<&BenchmarkSet> {
        match self {
            BenchmarkSet::PerContext(map) => {
                let x = x.ok_or(Error::ContextRequired)?;
                let inner = map.get(&x).ok_or(Error::UnknownContext { context: x })?;
                inner.resolve(Some(x))
            }
            other => Ok(other),
        }
    }

    /// Enumerate the extreme points of the set, in a fixed deterministic
    /// order. The maximum of any convex function over the convex hull is
    /// attained on this list.
    ///
    /// For a Smooth set the polytope is the density-capped simplex; with all
    /// caps at most 1 its vertices saturate a subset of actions at `mu(a)/h`
    /// and put any remainder on at most one extra action.
    pub fn vertices(&self, num_actions: usize, x: Option<usize>) -> Result<Vec<ActionMeasure>> {
        let set = self.resolve(x)?;
        set.validate(num_actions)?;
        match set {
            BenchmarkSet::Dirac => Ok((0..num_actions)
                .map(|a| ActionMeasure::dirac(num_actions, a))
                .collect()),
            BenchmarkSet::Smooth { h, mu } => {
                let caps: Vec<f64> = (0..num_actions).map(|a| mu.weight(a) / h).collect();
                Ok(capped_simplex_vertices(&caps))
            }
            BenchmarkSet::Explicit(members) => Ok(members.clone()),
            BenchmarkSet::PerContext(_) => unreachable!("resolved above"),
        }
    }

    /// Kind-specific membership test: is `p` a distribution inside the
    /// convex hull of this set?
    ///
    /// Dirac and Smooth hulls admit exact closed-form tests. For Explicit
    /// sets membership is certified by minimizing the squared distance to the
    /// hull with Frank-Wolfe steps and accepting a tiny residual.
    pub fn contains(&self, p: &ActionMeasure, x: Option<usize>) -> Result<bool> {
        let set = self.resolve(x)?;
        if !p.is_distribution() {
            return Ok(false);
        }
        match set {
            BenchmarkSet::Dirac => Ok(true),
            BenchmarkSet::Smooth { h, mu } => {
                if mu.len() != p.len() {
                    return Err(Error::DimensionMismatch {
                        expected: mu.len(),
                        actual: p.len(),
                    });
                }
                Ok((0..p.len()).all(|a| p.weight(a) <= mu.weight(a) / h + 1e-9))
            }
            BenchmarkSet::Explicit(members) => {
                let residual = hull_distance_sq(members, p)?;
                Ok(residual <= 1e-9)
            }
            BenchmarkSet::PerContext(_) => unreachable!("resolved above"),
        }
    }
}

/// Vertices of `{ p in simplex : p(a) <= caps[a] }` when every cap is <= 1.
///
/// Each vertex saturates a subset S of coordinates; if `sum(caps[S]) < 1` the
/// remainder sits on a single extra coordinate b with remainder < caps[b].
fn capped_simplex_vertices(caps: &[f64]) -> Vec<ActionMeasure> {
    let n = caps.len();
    let mut out: Vec<ActionMeasure> = Vec::new();
    let mut push_unique = |weights: Vec<f64>| {
        let m = ActionMeasure::new(weights).expect("vertex weights are nonnegative");
        if !out.iter().any(|v| {
            v.weights()
                .iter()
                .zip(m.weights())
                .all(|(a, b)| (a - b).abs() <= 1e-12)
        }) {
            out.push(m);
        }
    };
    // Subsets in increasing lexicographic (bitmask) order for determinism.
    for mask in 0u64..(1u64 << n) {
        let mut total = 0.0;
        for a in 0..n {
            if mask >> a & 1 == 1 {
                total += caps[a];
            }
        }
        if total > 1.0 + 1e-12 {
            continue;
        }
        let remainder = 1.0 - total;
        if remainder.abs() <= 1e-12 {
            let mut w = vec![0.0; n];
            for a in 0..n {
                if mask >> a & 1 == 1 {
                    w[a] = caps[a];
                }
            }
            push_unique(w);
        } else {
            for b in 0..n {
                if mask >> b & 1 == 1 {
                    continue;
                }
                if remainder < caps[b] - 1e-12 {
                    let mut w = vec![0.0; n];
                    for a in 0..n {
                        if mask >> a & 1 == 1 {
                            w[a] = caps[a];
                        }
                    }
                    w[b] = remainder;
                    push_unique(w);
                }
            }
        }
    }
    out
}

/// Squared L2 distance from `p` to the convex hull of `members`, via
/// Frank-Wolfe on the mixture weights.
fn hull_distance_sq(members: &[ActionMeasure], p: &ActionMeasure) -> Result<f64> {
    let n = p.len();
    for m in members {
        if m.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: m.len(),
            });
        }
    }
    // Current hull point, started at the first member.
    let mut q: Vec<f64> = members[0].weights().to_vec();
    for iter in 0..5000 {
        // Gradient of 0.5 || q - p ||^2 is (q - p); linear minimization over
        // the hull picks the member with the most negative inner product.
        let grad: Vec<f64> = q.iter().zip(p.weights()).map(|(a, b)| a - b).collect();
        let mut best = 0;
        let mut best_ip = f64::INFINITY;
        for (i, m) in members.iter().enumerate() {
            let ip: f64 = m.weights().iter().zip(&grad).map(|(a, g)| a * g).sum();
            if ip < best_ip {
                best_ip = ip;
                best = i;
            }
        }
        let current_ip: f64 = q.iter().zip(&grad).map(|(a, g)| a * g).sum();
        if current_ip - best_ip <= 1e-14 {
            break;
        }
        let step = 2.0 / (iter as f64 + 2.0);
        for (qa, ma) in q.iter_mut().zip(members[best].weights()) {
            *qa = (1.0 - step) * *qa + step * ma;
        }
    }
    Ok(q.iter()
        .zip(p.weights())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

// ---------------------------------------------------------------------------
// DesignCertificate
// ---------------------------------------------------------------------------

/// Output of a design solve: the distribution `p_star` together with the
/// min-max objective bound it certifies and how much work it took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignCertificate {
    pub p_star: ActionMeasure,
    /// Guaranteed bound on the min-max objective at `p_star`; recomputable
    /// exactly with `solver::certify`.
    pub certified_value: f64,
    /// Number of coordinate-descent updates performed.
    pub iterations: usize,
    /// The sequential-extrapolation bound the termination test used.
    pub sec_bound_used: f64,
}
