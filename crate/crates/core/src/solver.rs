//! The exploitative F-design solver.
//!
//! Coordinate descent over the benchmark polytope that outputs a sampling
//! distribution `p*` certifying a bound on the min-max objective
//!
//! ```text
//!   max_lambda [ E_lambda[g_hat] - E_p[g_hat] + Coverage_eps(p, lambda; G) / gamma ]
//! ```
//!
//! together with the Low Regret and Good Coverage properties:
//!
//! - LR: `Rhat(p*) <= 2 * S / gamma`
//! - GC: `Coverage(p*, lambda) <= 8 * S + gamma * Rhat(lambda)` for every
//!   vertex `lambda`
//!
//! where `S` is the configured sequential-extrapolation bound and
//! `Rhat(lambda) = max_{lambda'} E_{lambda'}[g_hat] - E_lambda[g_hat]`.
//!
//! A pure-exploration mode drops the reward terms and minimizes worst-case
//! coverage alone (the design used before any reward estimate exists).

use serde::{Deserialize, Serialize};

use crate::coverage::coverage;
use crate::error::{Error, Result};
use crate::types::{ActionMeasure, BenchmarkSet, DesignCertificate, FunctionClassSlice};

/// Cap on geometric escalation of the sec bound: retries stop once the bound
/// reaches 2^10 times the initial value.
pub const ESCALATION_CAP_DOUBLINGS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepMode {
    /// Step size `eps` every update; at most `floor(1/eps)` updates.
    FixedEps,
    /// Step size `1 / (4 * Coverage(p, lambda_t))`, clamped to 1; valid for
    /// Dirac benchmark sets only, at most `floor(32 * sec_bound)` updates.
    AggressiveDirac,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Exploitation weight; larger means greedier.
    pub gamma: f64,
    /// Coverage regularizer, in (0, 1).
    pub eps: f64,
    /// Upper bound on the sequential extrapolation coefficient used by the
    /// termination test. Any value at least the true coefficient preserves
    /// the iteration caps; smaller values may fail certification.
    pub sec_bound: f64,
    pub step_mode: StepMode,
    pub max_iters_override: Option<usize>,
}

impl SolverConfig {
    pub fn new(gamma: f64, eps: f64, sec_bound: f64, step_mode: StepMode) -> Self {
        Self {
            gamma,
            eps,
            sec_bound,
            step_mode,
            max_iters_override: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::Domain {
                name: "gamma",
                reason: format!("must be positive, got {}", self.gamma),
            });
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Domain {
                name: "eps",
                reason: format!("must lie in (0, 1), got {}", self.eps),
            });
        }
        if !(self.sec_bound >= 0.0) {
            return Err(Error::Domain {
                name: "sec_bound",
                reason: format!("must be nonnegative, got {}", self.sec_bound),
            });
        }
        Ok(())
    }

    /// Iteration cap for the configured step mode.
    pub fn iteration_cap(&self) -> usize {
        if let Some(cap) = self.max_iters_override {
            return cap;
        }
        match self.step_mode {
            StepMode::FixedEps => (1.0 / self.eps).floor() as usize,
            StepMode::AggressiveDirac => ((32.0 * self.sec_bound).floor() as usize).max(1),
        }
    }
}

/// A vertex of the benchmark set maximizing `E_lambda[g_hat]`; ties go to the
/// smallest vertex index.
pub fn greedy_benchmark(
    g_hat: &[f64],
    benchmark: &BenchmarkSet,
    x: Option<usize>,
) -> Result<ActionMeasure> {
    let vertices = benchmark.vertices(g_hat.len(), x)?;
    let idx = argmax_by(&vertices, |v| v.expected_value(g_hat))?;
    Ok(vertices[idx].clone())
}

/// The vertex maximizing `E_lambda[g_hat] + Coverage_eps(p, lambda; G) / gamma`,
/// by exact enumeration. For each fixed function pair the objective is convex
/// in lambda, so the maximum over the hull sits on a vertex.
pub fn best_response(
    p: &ActionMeasure,
    g_hat: &[f64],
    class: &FunctionClassSlice,
    benchmark: &BenchmarkSet,
    gamma: f64,
    eps: f64,
    x: Option<usize>,
) -> Result<ActionMeasure> {
    if !(gamma > 0.0) {
        return Err(Error::Domain {
            name: "gamma",
            reason: format!("must be positive, got {gamma}"),
        });
    }
    let vertices = benchmark.vertices(class.num_actions(), x)?;
    let idx = argmax_by(&vertices, |v| {
        Ok(v.expected_value(g_hat)? + coverage(p, v, class, eps)? / gamma)
    })?;
    Ok(vertices[idx].clone())
}

fn argmax_by<F>(vertices: &[ActionMeasure], mut score: F) -> Result<usize>
where
    F: FnMut(&ActionMeasure) -> Result<f64>,
{
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, v) in vertices.iter().enumerate() {
        let s = score(v)?;
        if s > best_score {
            best_score = s;
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy)]
enum Objective {
    /// Reward-aware mode with a designated estimate `g_hat`.
    Exploit { g_hat_index: usize },
    /// Coverage-only mode; final mixing uses the smallest-index vertex.
    Explore,
}

/// Exploitative F-design: returns a certificate whose `p_star` lies in the
/// hull of the benchmark set, with `certified_value = 10 * sec_bound / gamma`.
pub fn exploitative_f_design(
    g_hat_index: usize,
    class: &FunctionClassSlice,
    benchmark: &BenchmarkSet,
    cfg: &SolverConfig,
    x: Option<usize>,
) -> Result<DesignCertificate> {
    Ok(run_descent(Objective::Exploit { g_hat_index }, class, benchmark, cfg, x, None)?.0)
}

/// Same as [`exploitative_f_design`] but also returns the iterate trail
/// (`p_0 = 0` excluded, final mixed distribution not included). Diagnostic.
pub fn exploitative_f_design_traced(
    g_hat_index: usize,
    class: &FunctionClassSlice,
    benchmark: &BenchmarkSet,
    cfg: &SolverConfig,
    x: Option<usize>,
) -> Result<(DesignCertificate, Vec<ActionMeasure>)> {
    let mut trail = Vec::new();
    let out = run_descent(
        Objective::Exploit { g_hat_index },
        class,
        benchmark,
        cfg,
        x,
        Some(&mut trail),
    )?;
    Ok((out.0, trail))
}

/// Pure-exploration design (no reward estimate): minimizes the worst-case
/// coverage over the benchmark set. The certificate value is
/// `10 * sec_bound`, in coverage units.
pub fn pure_exploration_design(
    class: &FunctionClassSlice,
    benchmark: &BenchmarkSet,
    eps: f64,
    sec_bound: f64,
    x: Option<usize>,
) -> Result<DesignCertificate> {
    let cfg = SolverConfig::new(1.0, eps, sec_bound, StepMode::FixedEps);
    Ok(run_descent(Objective::Explore, class, benchmark, &cfg, x, None)?.0)
}

/// Exact min-max objective value at a given distribution `p`, by vertex
/// enumeration. By definition this is an upper bound on the instance's
/// min-max optimum, so it re-verifies any certificate.
pub fn certify(
    p: &ActionMeasure,
    g_hat_index: usize,
    class: &FunctionClassSlice,
    benchmark: &BenchmarkSet,
    gamma: f64,
    eps: f64,
    x: Option<usize>,
) -> Result<f64> {
    if !p.is_distribution() {
        return Err(Error::NotADistribution {
            deviation: (p.l1_norm() - 1.0).abs(),
        });
    }
    let g_hat = class.row(g_hat_index);
    let vertices = benchmark.vertices(class.num_actions(), x)?;
    let e_p = p.expected_value(g_hat)?;
    let mut value = f64::NEG_INFINITY;
    for v in &vertices {
        let term = v.expected_value(g_hat)? - e_p + coverage(p, v, class, eps)? / gamma;
        value = value.max(term);
    }
    Ok(value)
}

/// Retry wrapper: on certification failure the sec bound is doubled, up to
/// `2^ESCALATION_CAP_DOUBLINGS` times the initial value. Any bound works as a
/// termination threshold, so escalation never invalidates the certificate;
/// the bound that succeeded is recorded in the output.
pub fn solve_with_escalation(
    objective_g_hat: Option<usize>,
    class: &FunctionClassSlice,
    benchmark: &BenchmarkSet,
    cfg: &SolverConfig,
    x: Option<usize>,
) -> Result<DesignCertificate> {
    let mut attempt = *cfg;
    let mut last_err = None;
    for _ in 0..=ESCALATION_CAP_DOUBLINGS {
        let result = match objective_g_hat {
            Some(idx) => exploitative_f_design(idx, class, benchmark, &attempt, x),
            None => pure_exploration_design(class, benchmark, attempt.eps, attempt.sec_bound, x),
        };
        match result {
            Ok(cert) => return Ok(cert),
            Err(e @ Error::CertificationFailure { .. }) => {
                last_err = Some(e);
                attempt.sec_bound = if attempt.sec_bound > 0.0 {
                    attempt.sec_bound * 2.0
                } else {
                    1.0
                };
            }
            Err(other) => return Err(other),
        }
    }
    Err(last_err.expect("escalation loop ran at least once"))
}

fn run_descent(
    objective: Objective,
    class: &FunctionClassSlice,
    benchmark: &BenchmarkSet,
    cfg: &SolverConfig,
    x: Option<usize>,
    mut trail: Option<&mut Vec<ActionMeasure>>,
) -> Result<(DesignCertificate, ())> {
    cfg.validate()?;
    let n = class.num_actions();
    let vertices = benchmark.vertices(n, x)?;
    if matches!(cfg.step_mode, StepMode::AggressiveDirac)
        && !matches!(benchmark.resolve(x)?, BenchmarkSet::Dirac)
    {
        return Err(Error::UnsupportedKind {
            reason: "aggressive step size requires a Dirac benchmark set",
        });
    }

    let (g_hat, mix_vertex): (Option<&[f64]>, usize) = match objective {
        Objective::Exploit { g_hat_index } => {
            if g_hat_index >= class.num_functions() {
                return Err(Error::IndexOutOfRange {
                    index: g_hat_index,
                    len: class.num_functions(),
                });
            }
            let row = class.row(g_hat_index);
            let greedy = argmax_by(&vertices, |v| v.expected_value(row))?;
            (Some(row), greedy)
        }
        Objective::Explore => (None, 0),
    };

    // Reward ceiling over the benchmark set (0 in exploration mode).
    let reward_max = match g_hat {
        Some(row) => {
            let mut best = f64::NEG_INFINITY;
            for v in &vertices {
                best = best.max(v.expected_value(row)?);
            }
            best
        }
        None => 0.0,
    };
    let empirical_regret = |lambda: &ActionMeasure| -> Result<f64> {
        match g_hat {
            Some(row) => Ok(reward_max - lambda.expected_value(row)?),
            None => Ok(0.0),
        }
    };

    let gamma = cfg.gamma;
    let threshold = 8.0 * cfg.sec_bound / gamma;
    let cap = cfg.iteration_cap();
    let mut p = ActionMeasure::zero(n);
    let mut updates = 0usize;
    loop {
        // Most-violating benchmark vertex for the current iterate.
        let mut best_idx = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        let mut best_cov = 0.0;
        for (i, v) in vertices.iter().enumerate() {
            let cov = coverage(&p, v, class, cfg.eps)?;
            let score = match g_hat {
                Some(row) => v.expected_value(row)? + cov / gamma,
                None => cov,
            };
            if score > best_score {
                best_score = score;
                best_idx = i;
                best_cov = cov;
            }
        }
        let lambda_t = &vertices[best_idx];
        let r_hat_t = empirical_regret(lambda_t)?;

        // Termination: no vertex violates the certificate inequality.
        if -r_hat_t + best_cov / gamma <= threshold {
            let mass = p.l1_norm();
            let p_star = p.plus_scaled(&vertices[mix_vertex], 1.0 - mass)?;
            let certified_value = match objective {
                Objective::Exploit { .. } => {
                    // Guard against an undersized bound that passed the
                    // coverage test but not the low-regret half.
                    let residual = reward_max - p_star.expected_value(g_hat.unwrap())?;
                    if residual > 2.0 * cfg.sec_bound / gamma + 1e-12 {
                        return Err(Error::CertificationFailure {
                            iterations: updates,
                            sec_bound: cfg.sec_bound,
                            last_iterate: Box::new(p),
                            violating_vertex: Box::new(lambda_t.clone()),
                        });
                    }
                    10.0 * cfg.sec_bound / gamma
                }
                Objective::Explore => 10.0 * cfg.sec_bound,
            };
            return Ok((
                DesignCertificate {
                    p_star,
                    certified_value,
                    iterations: updates,
                    sec_bound_used: cfg.sec_bound,
                },
                (),
            ));
        }

        if updates >= cap {
            return Err(Error::CertificationFailure {
                iterations: updates,
                sec_bound: cfg.sec_bound,
                last_iterate: Box::new(p),
                violating_vertex: Box::new(lambda_t.clone()),
            });
        }

        let delta = match cfg.step_mode {
            StepMode::FixedEps => cfg.eps,
            // On the termination path coverage is at least 8 * sec_bound, so
            // the nominal step is small; clamp keeps iterates bounded when
            // coverage happens to be tiny.
            StepMode::AggressiveDirac => (1.0 / (4.0 * best_cov)).min(1.0),
        };
        p = p.plus_scaled(lambda_t, delta)?;
        if let Some(t) = trail.as_deref_mut() {
            t.push(p.clone());
        }
        updates += 1;
    }
}
