//! Stochastic contextual-bandit simulators with exact regret accounting.
//!
//! Each round realizes the full reward vector (not just the chosen action's
//! entry) so counterfactual regret is computable without importance
//! weighting; algorithms only ever see the chosen entry. Adversarial
//! variants: reward corruption on a bounded set of rounds, bounded-ratio
//! context-distribution shift, and misspecified truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{next_unit, RunRng};
use crate::types::{ActionMeasure, BenchmarkSet, ContextualFunctionClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    /// Rewards are independent Bernoulli draws with the truth as the mean.
    Bernoulli,
    /// Truth plus uniform noise of the given width, clipped to [0, 1].
    UniformAdditive { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Adversary {
    None,
    /// Reward vectors in the first `budget` rounds are flipped to
    /// `1 - R_t(a)`: a deterministic, maximally confusing default.
    Corruption { budget: usize },
    /// Per-round context distributions alternate between the two extreme
    /// ends of the `ratio`-band around the base distribution.
    Shift { ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    /// Base context distribution.
    pub context_dist: Vec<f64>,
    /// Ground-truth mean rewards, `[context][action]` in [0, 1]. Possibly
    /// outside the function class under misspecification.
    pub truth: Vec<Vec<f64>>,
    pub noise: NoiseModel,
    pub adversary: Adversary,
    pub benchmark: BenchmarkSet,
}

/// One realized round.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub context: usize,
    /// Full realized reward vector, after any corruption.
    pub rewards: Vec<f64>,
    pub corrupted: bool,
}

impl Environment {
    pub fn new(
        context_dist: Vec<f64>,
        truth: Vec<Vec<f64>>,
        noise: NoiseModel,
        adversary: Adversary,
        benchmark: BenchmarkSet,
    ) -> Result<Self> {
        let env = Self {
            context_dist,
            truth,
            noise,
            adversary,
            benchmark,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if self.truth.is_empty() || self.truth[0].is_empty() {
            return Err(Error::Domain {
                name: "truth",
                reason: "must have at least one context and action".into(),
            });
        }
        let n = self.num_actions();
        if self.context_dist.len() != self.num_contexts() {
            return Err(Error::DimensionMismatch {
                expected: self.num_contexts(),
                actual: self.context_dist.len(),
            });
        }
        let mass: f64 = self.context_dist.iter().sum();
        if (mass - 1.0).abs() > 1e-9 || self.context_dist.iter().any(|&w| w < 0.0) {
            return Err(Error::NotADistribution {
                deviation: (mass - 1.0).abs(),
            });
        }
        for row in &self.truth {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            for &v in row {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::Domain {
                        name: "truth",
                        reason: format!("entry {v} outside [0, 1]"),
                    });
                }
            }
        }
        if let NoiseModel::UniformAdditive { width } = self.noise {
            if !(width >= 0.0 && width.is_finite()) {
                return Err(Error::Domain {
                    name: "noise width",
                    reason: format!("must be nonnegative, got {width}"),
                });
            }
        }
        if let Adversary::Shift { ratio } = self.adversary {
            if !(ratio >= 1.0 && ratio.is_finite()) {
                return Err(Error::Domain {
                    name: "shift ratio",
                    reason: format!("must be at least 1, got {ratio}"),
                });
            }
        }
        self.benchmark.validate(n)?;
        Ok(())
    }

    pub fn num_contexts(&self) -> usize {
        self.truth.len()
    }

    pub fn num_actions(&self) -> usize {
        self.truth[0].len()
    }

    /// The exact context distribution in force at round `t` (1-based).
    ///
    /// Under shift, odd rounds tilt toward the first context and even rounds
    /// toward the last, each sitting exactly on the boundary of the allowed
    /// ratio band; every returned parameter vector satisfies
    /// `ratio^-1 * base <= d_t <= ratio * base` coordinatewise.
    pub fn context_distribution_at(&self, t: usize) -> Vec<f64> {
        match self.adversary {
            Adversary::Shift { ratio } if ratio > 1.0 && self.context_dist.len() > 1 => {
                let target = if t % 2 == 1 {
                    0
                } else {
                    self.context_dist.len() - 1
                };
                tilted_distribution(&self.context_dist, ratio, target)
            }
            _ => self.context_dist.clone(),
        }
    }

    /// Realize round `t`: draw the context, the full reward vector, and
    /// apply the corruption strategy if the round is corrupted.
    ///
    /// The random stream is consumed identically whether or not the round is
    /// corrupted, so a zero-budget adversary reproduces the clean stream
    /// bit for bit.
    pub fn step(&self, t: usize, rng: &mut RunRng) -> StepOutcome {
        let dist = self.context_distribution_at(t);
        let u = next_unit(rng);
        let mut context = dist.len() - 1;
        let mut cdf = 0.0;
        for (x, &w) in dist.iter().enumerate() {
            cdf += w;
            if u < cdf {
                context = x;
                break;
            }
        }
        let mut rewards: Vec<f64> = Vec::with_capacity(self.num_actions());
        for a in 0..self.num_actions() {
            let mean = self.truth[context][a];
            let draw = next_unit(rng);
            let r = match self.noise {
                NoiseModel::Bernoulli => {
                    if draw < mean {
                        1.0
                    } else {
                        0.0
                    }
                }
                NoiseModel::UniformAdditive { width } => {
                    (mean + (draw - 0.5) * width).clamp(0.0, 1.0)
                }
            };
            rewards.push(r);
        }
        let corrupted = matches!(self.adversary, Adversary::Corruption { budget } if t <= budget);
        if corrupted {
            for r in &mut rewards {
                *r = 1.0 - *r;
            }
        }
        StepOutcome {
            context,
            rewards,
            corrupted,
        }
    }

    /// The benchmark's best expected truth reward at context `x`.
    pub fn benchmark_value(&self, x: usize) -> Result<f64> {
        let vertices = self.benchmark.vertices(self.num_actions(), Some(x))?;
        let mut best = f64::NEG_INFINITY;
        for v in &vertices {
            best = best.max(v.expected_value(&self.truth[x])?);
        }
        Ok(best)
    }

    /// Exact benchmark regret of playing distribution `p` at context `x`.
    /// Nonnegative whenever `p` lies in the benchmark hull.
    pub fn instantaneous_regret(&self, x: usize, p: &ActionMeasure) -> Result<f64> {
        Ok(self.benchmark_value(x)? - p.expected_value(&self.truth[x])?)
    }
}

/// `(1 - theta) * base + theta * delta_target` with theta chosen so the
/// result touches the edge of the ratio band.
fn tilted_distribution(base: &[f64], ratio: f64, target: usize) -> Vec<f64> {
    let bt = base[target];
    if bt >= 1.0 {
        return base.to_vec();
    }
    let theta_low = 1.0 - 1.0 / ratio;
    let theta_high = (ratio - 1.0) * bt / (1.0 - bt);
    let theta = theta_low.min(theta_high);
    base.iter()
        .enumerate()
        .map(|(x, &w)| {
            let point = if x == target { 1.0 } else { 0.0 };
            (1.0 - theta) * w + theta * point
        })
        .collect()
}

/// Build a misspecified environment: the truth is a designated class member
/// perturbed by at most `sqrt(b_target)` per entry (alternating sign,
/// clipped to [0, 1]), which bounds the on-policy mean squared error of the
/// best class member by `b_target` for every policy. Returns the environment
/// together with the realized per-entry sup deviation.
pub fn make_misspecified(
    class: &ContextualFunctionClass,
    base_index: usize,
    b_target: f64,
    context_dist: Vec<f64>,
    noise: NoiseModel,
    benchmark: BenchmarkSet,
) -> Result<(Environment, f64)> {
    if !(0.0..=1.0).contains(&b_target) {
        return Err(Error::Domain {
            name: "b_target",
            reason: format!("must lie in [0, 1], got {b_target}"),
        });
    }
    if base_index >= class.num_functions() {
        return Err(Error::IndexOutOfRange {
            index: base_index,
            len: class.num_functions(),
        });
    }
    let amp = b_target.sqrt();
    let mut truth = Vec::with_capacity(class.num_contexts());
    let mut realized: f64 = 0.0;
    for x in 0..class.num_contexts() {
        let mut row = Vec::with_capacity(class.num_actions());
        for a in 0..class.num_actions() {
            let base = class.value(base_index, x, a);
            let sign = if (x + a) % 2 == 0 { 1.0 } else { -1.0 };
            let v = (base + sign * amp).clamp(0.0, 1.0);
            realized = realized.max((v - base).abs());
            row.push(v);
        }
        truth.push(row);
    }
    let env = Environment::new(context_dist, truth, noise, Adversary::None, benchmark)?;
    Ok((env, realized))
}
