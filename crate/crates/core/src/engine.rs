//! The online learning loop: the epoch-based design bandit (offline oracle,
//! one regression per epoch), the per-round online-oracle variant, inverse
//! gap weighting plus uniform/greedy control baselines, the epoch and
//! exploration-weight schedules with their robustness variants, and exact
//! per-round ledgers.
//!
//! A run is fully determined by (environment, class, schedule, horizon,
//! seed): identical inputs produce identical ledgers.

use std::collections::BTreeMap;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::oracles::{erm_offline, regoff_bound, Dataset, RunningErm};
use crate::rng::{next_unit, rng_for_seed};
use crate::solver::{solve_with_escalation, SolverConfig, StepMode};
use crate::types::{ActionMeasure, BenchmarkSet, ContextualFunctionClass, FunctionClassSlice};

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleMode {
    /// Epoch boundaries at powers of two.
    Doubling,
    /// Boundaries at `floor(2 T^(1 - 2^-m))`; requires the horizon up front
    /// and keeps the epoch count doubly logarithmic.
    SmallEpoch,
    /// User-supplied strictly increasing boundaries.
    Custom(Vec<usize>),
}

/// Which sample count feeds the error bound inside the exploration weight.
/// `PerDefinition` follows the schedule kind: half the previous boundary for
/// doubling, the previous epoch's length otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NConvention {
    PerDefinition,
    HalfPrevBoundary,
    EpochLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GammaMode {
    /// `sqrt(D / regoff(|F|, n, delta))`.
    Standard { d: f64 },
    /// `sqrt(D / (B + log(|F| T / delta) / tau_{m-1}))`.
    Misspec { d: f64, b: f64 },
    /// `sqrt(D tau_{m-1} / (C + log(|F| T / delta)))`.
    Corruption { d: f64, c: f64 },
    /// `sqrt(tau_{m-1} A D / log(|F| T / delta))`.
    Shift { d: f64, a: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpsMode {
    /// `eps_m = 1 / T` (horizon known; the default).
    HorizonInverse,
    /// `eps_m = 1 / tau_{m+1}` (streaming fallback when the horizon is not
    /// known in advance).
    NextBoundaryInverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSchedule {
    pub mode: ScheduleMode,
    pub gamma_mode: GammaMode,
    pub delta: f64,
    pub n_convention: NConvention,
    pub eps_mode: EpsMode,
}

impl EpochSchedule {
    pub fn new(mode: ScheduleMode, gamma_mode: GammaMode, delta: f64) -> Self {
        Self {
            mode,
            gamma_mode,
            delta,
            n_convention: NConvention::PerDefinition,
            eps_mode: EpsMode::HorizonInverse,
        }
    }

    pub fn resolve(&self, horizon: usize) -> Result<ResolvedSchedule> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Domain {
                name: "delta",
                reason: format!("must lie in (0, 1), got {}", self.delta),
            });
        }
        let mut bounds = vec![0usize];
        match &self.mode {
            ScheduleMode::Doubling => {
                let mut tau = 2usize;
                loop {
                    bounds.push(tau.min(horizon));
                    if tau >= horizon {
                        break;
                    }
                    tau *= 2;
                }
            }
            ScheduleMode::SmallEpoch => {
                let t = horizon as f64;
                let mut m = 1;
                loop {
                    let tau = (2.0 * t.powf(1.0 - 2f64.powi(-m))).floor() as usize;
                    let tau = tau.min(horizon);
                    if tau > *bounds.last().unwrap() {
                        bounds.push(tau);
                    }
                    if tau >= horizon {
                        break;
                    }
                    m += 1;
                    if m > 64 {
                        bounds.push(horizon);
                        break;
                    }
                }
            }
            ScheduleMode::Custom(taus) => {
                for &tau in taus {
                    if tau <= *bounds.last().unwrap() {
                        return Err(Error::Domain {
                            name: "custom schedule",
                            reason: "boundaries must be strictly increasing and positive".into(),
                        });
                    }
                    bounds.push(tau.min(horizon));
                    if tau >= horizon {
                        break;
                    }
                }
                if *bounds.last().unwrap() < horizon {
                    bounds.push(horizon);
                }
            }
        }
        if bounds.len() < 2 || bounds[1] < 1 || horizon < bounds[1] {
            return Err(Error::Domain {
                name: "horizon",
                reason: format!(
                    "horizon {horizon} must cover the first epoch (tau_1 = {})",
                    bounds.get(1).copied().unwrap_or(0)
                ),
            });
        }
        Ok(ResolvedSchedule {
            schedule: self.clone(),
            boundaries: bounds,
            horizon,
        })
    }
}

/// A schedule bound to a concrete horizon: boundaries `tau_0 = 0 < tau_1 <
/// ... < tau_M = T` plus the derived per-epoch parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSchedule {
    schedule: EpochSchedule,
    boundaries: Vec<usize>,
    horizon: usize,
}

impl ResolvedSchedule {
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn num_epochs(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Epoch containing round `t` (1-based).
    pub fn epoch_of(&self, t: usize) -> usize {
        debug_assert!(t >= 1 && t <= self.horizon);
        match self.boundaries.binary_search(&t) {
            Ok(m) => m,
            Err(m) => m,
        }
    }

    /// Confidence split across epochs: `delta / (m (m + 1))`.
    pub fn delta_m(&self, m: usize) -> f64 {
        self.schedule.delta / (m as f64 * (m as f64 + 1.0))
    }

    /// Coverage regularizer for epoch `m`.
    pub fn eps_m(&self, m: usize) -> f64 {
        match self.schedule.eps_mode {
            EpsMode::HorizonInverse => 1.0 / self.horizon as f64,
            EpsMode::NextBoundaryInverse => {
                let next = if m + 1 < self.boundaries.len() {
                    self.boundaries[m + 1]
                } else {
                    2 * self.boundaries[m]
                };
                1.0 / next as f64
            }
        }
    }

    /// Exploration weight for epoch `m`; zero in the first epoch by
    /// convention (it is pure exploration).
    pub fn gamma_m(&self, m: usize, class_size: usize) -> Result<f64> {
        if m == 1 {
            return Ok(0.0);
        }
        let tau_prev = self.boundaries[m - 1];
        let tau_prev2 = self.boundaries[m - 2];
        let delta = self.schedule.delta;
        let horizon = self.horizon;
        let value = match self.schedule.gamma_mode {
            GammaMode::Standard { d } => {
                let n = match self.effective_n_convention() {
                    NConvention::HalfPrevBoundary => (tau_prev / 2).max(1),
                    NConvention::EpochLength => (tau_prev - tau_prev2).max(1),
                    NConvention::PerDefinition => unreachable!("resolved below"),
                };
                let bound = regoff_bound(class_size, n, delta, 1)?.max(1e-12);
                (d / bound).sqrt()
            }
            GammaMode::Misspec { d, b } => {
                let bound = regoff_bound(class_size, tau_prev, delta, horizon)?;
                (d / (b + bound).max(1e-12)).sqrt()
            }
            GammaMode::Corruption { d, c } => {
                let log_term = regoff_bound(class_size, 1, delta, horizon)?;
                (d * tau_prev as f64 / (c + log_term).max(1e-12)).sqrt()
            }
            GammaMode::Shift { d, a } => {
                let log_term = regoff_bound(class_size, 1, delta, horizon)?.max(1e-12);
                (tau_prev as f64 * a * d / log_term).sqrt()
            }
        };
        Ok(value)
    }

    fn effective_n_convention(&self) -> NConvention {
        match self.schedule.n_convention {
            NConvention::PerDefinition => match self.schedule.mode {
                ScheduleMode::Doubling => NConvention::HalfPrevBoundary,
                _ => NConvention::EpochLength,
            },
            other => other,
        }
    }
}

/// Free-function form mirroring the schedule operation: the exploration
/// weight for epoch `m` given the class size.
pub fn gamma_schedule(
    resolved: &ResolvedSchedule,
    m: usize,
    class_size: usize,
) -> Result<f64> {
    resolved.gamma_m(m, class_size)
}

// ---------------------------------------------------------------------------
// Ledger
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub epoch: usize,
    pub context: usize,
    pub action: usize,
    pub reward: f64,
    pub regret: f64,
    pub cum_regret: f64,
    pub solver_iters: usize,
}

/// Per-round solver parameters, for re-verifying certificates from a ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveMeta {
    pub gamma: f64,
    pub eps: f64,
    pub sec_bound: f64,
    pub certified_value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLedger {
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
    /// The action distribution actually played each round (virtual-policy
    /// view); parallel to `rounds`.
    pub policies: Vec<ActionMeasure>,
    /// Solver parameters per round; `None` for baseline policies.
    pub solve_meta: Vec<Option<SolveMeta>>,
    /// Offline-oracle fit per epoch (index 0 unused, epoch 1 has none).
    pub f_hat_by_epoch: Vec<Option<usize>>,
    pub oracle_calls: usize,
}

impl RunLedger {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Default::default()
        }
    }

    fn push(
        &mut self,
        t: usize,
        epoch: usize,
        context: usize,
        action: usize,
        reward: f64,
        regret: f64,
        solver_iters: usize,
        policy: ActionMeasure,
        meta: Option<SolveMeta>,
    ) {
        let cum = self.final_cum_regret() + regret;
        self.rounds.push(RoundRecord {
            t,
            epoch,
            context,
            action,
            reward,
            regret,
            cum_regret: cum,
            solver_iters,
        });
        self.policies.push(policy);
        self.solve_meta.push(meta);
    }

    pub fn final_cum_regret(&self) -> f64 {
        self.rounds.last().map(|r| r.cum_regret).unwrap_or(0.0)
    }

    pub fn cum_regret_at(&self, t: usize) -> f64 {
        if t == 0 || self.rounds.is_empty() {
            return 0.0;
        }
        self.rounds[t.min(self.rounds.len()) - 1].cum_regret
    }

    pub fn num_epochs(&self) -> usize {
        self.rounds.iter().map(|r| r.epoch).max().unwrap_or(0)
    }
}

/// Exact per-context cumulative regret, recomputed from the logged policies.
/// Contexts the run never saw report zero.
pub fn per_context_regret(
    ledger: &RunLedger,
    env: &Environment,
) -> Result<BTreeMap<usize, f64>> {
    let mut out: BTreeMap<usize, f64> = (0..env.num_contexts()).map(|x| (x, 0.0)).collect();
    for (record, policy) in ledger.rounds.iter().zip(&ledger.policies) {
        let r = env.instantaneous_regret(record.context, policy)?;
        *out.get_mut(&record.context).unwrap() += r;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Solver defaults and per-context design cache
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverDefaults {
    /// Forced step mode; by default Dirac sets use the aggressive step and
    /// everything else the fixed step.
    pub step_mode: Option<StepMode>,
    /// Forced termination bound; by default Smooth sets use the analytic
    /// bound and other kinds a short brute-force seed, with geometric
    /// escalation on failure either way.
    pub sec_bound_override: Option<f64>,
}

struct DesignOracle<'a> {
    class: &'a ContextualFunctionClass,
    benchmark: &'a BenchmarkSet,
    defaults: SolverDefaults,
    slices: Vec<Option<(FunctionClassSlice, Vec<usize>)>>,
    sec_seeds: HashMap<(usize, u64), f64>,
}

impl<'a> DesignOracle<'a> {
    fn new(
        class: &'a ContextualFunctionClass,
        benchmark: &'a BenchmarkSet,
        defaults: SolverDefaults,
    ) -> Self {
        Self {
            class,
            benchmark,
            defaults,
            slices: vec![None; class.num_contexts()],
            sec_seeds: HashMap::new(),
        }
    }

    fn slice(&mut self, x: usize) -> Result<&(FunctionClassSlice, Vec<usize>)> {
        if self.slices[x].is_none() {
            self.slices[x] = Some(self.class.slice(x)?);
        }
        Ok(self.slices[x].as_ref().unwrap())
    }

    fn step_mode(&self, x: usize) -> Result<StepMode> {
        if let Some(mode) = self.defaults.step_mode {
            return Ok(mode);
        }
        Ok(match self.benchmark.resolve(Some(x))? {
            BenchmarkSet::Dirac => StepMode::AggressiveDirac,
            _ => StepMode::FixedEps,
        })
    }

    fn sec_seed(&mut self, x: usize, eps: f64) -> Result<f64> {
        if let Some(s) = self.defaults.sec_bound_override {
            return Ok(s);
        }
        let key = (x, eps.to_bits());
        if let Some(&s) = self.sec_seeds.get(&key) {
            return Ok(s);
        }
        let benchmark = self.benchmark;
        let (slice, _) = self.slice(x)?;
        let seed = match benchmark.resolve(Some(x))? {
            BenchmarkSet::Smooth { h, .. } => (1.0 / h) * (1.0 + 1.0 / eps).ln(),
            _ => crate::complexity::sec_lower_bound_search(slice, benchmark, eps, 2, Some(x))?
                .max(1.0),
        };
        self.sec_seeds.insert(key, seed);
        Ok(seed)
    }

    /// Solve the design problem at context `x`; `g_hat` is the class-level
    /// estimate index (remapped onto the deduped slice), or `None` for pure
    /// exploration.
    fn solve(
        &mut self,
        x: usize,
        g_hat: Option<usize>,
        gamma: f64,
        eps: f64,
    ) -> Result<(ActionMeasure, SolveMeta, usize)> {
        let step_mode = self.step_mode(x)?;
        let sec_seed = self.sec_seed(x, eps)?;
        let (slice, map) = self.slices[x].as_ref().expect("sec_seed populated the slice");
        let cfg = SolverConfig {
            gamma: if g_hat.is_some() { gamma } else { 1.0 },
            eps,
            sec_bound: sec_seed,
            step_mode: if g_hat.is_some() {
                step_mode
            } else {
                StepMode::FixedEps
            },
            max_iters_override: None,
        };
        let slice_index = g_hat.map(|f| map[f]);
        let cert = solve_with_escalation(slice_index, slice, self.benchmark, &cfg, Some(x))?;
        let meta = SolveMeta {
            gamma: cfg.gamma,
            eps,
            sec_bound: cert.sec_bound_used,
            certified_value: cert.certified_value,
        };
        Ok((cert.p_star, meta, cert.iterations))
    }
}

fn check_shapes(env: &Environment, class: &ContextualFunctionClass) -> Result<()> {
    if env.num_contexts() != class.num_contexts() {
        return Err(Error::DimensionMismatch {
            expected: env.num_contexts(),
            actual: class.num_contexts(),
        });
    }
    if env.num_actions() != class.num_actions() {
        return Err(Error::DimensionMismatch {
            expected: env.num_actions(),
            actual: class.num_actions(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

/// Epoch-based design bandit: pure exploration in the first epoch, then one
/// offline regression per epoch (on the previous epoch's window) and a
/// per-context design solve reused across the epoch.
pub fn run_epoch_design(
    env: &Environment,
    class: &ContextualFunctionClass,
    schedule: &EpochSchedule,
    defaults: &SolverDefaults,
    horizon: usize,
    seed: u64,
) -> Result<RunLedger> {
    check_shapes(env, class)?;
    let resolved = schedule.resolve(horizon)?;
    let bounds = resolved.boundaries().to_vec();
    let mut oracle = DesignOracle::new(class, &env.benchmark, *defaults);
    let mut rng = rng_for_seed(seed);
    let mut ledger = RunLedger::new(seed);
    ledger.f_hat_by_epoch = vec![None; resolved.num_epochs() + 1];
    let mut data = Dataset::default();

    let mut epoch = 0usize;
    let mut gamma = 0.0;
    let mut eps = resolved.eps_m(1);
    let mut f_hat: Option<usize> = None;
    let mut designs: HashMap<usize, (ActionMeasure, SolveMeta, usize)> = HashMap::new();

    for t in 1..=horizon {
        let m = resolved.epoch_of(t);
        if m != epoch {
            epoch = m;
            designs.clear();
            eps = resolved.eps_m(m);
            if m >= 2 {
                let window = data.window(bounds[m - 2], bounds[m - 1]);
                let fit = erm_offline(class, &window)?;
                f_hat = Some(fit);
                ledger.f_hat_by_epoch[m] = Some(fit);
                ledger.oracle_calls += 1;
                gamma = resolved.gamma_m(m, class.num_functions())?;
            }
        }
        let step = env.step(t, &mut rng);
        let x = step.context;
        if !designs.contains_key(&x) {
            let solved = oracle.solve(x, f_hat, gamma, eps)?;
            designs.insert(x, solved);
        }
        let (policy, meta, iters) = designs.get(&x).unwrap().clone();
        let action = policy.sample_with(next_unit(&mut rng));
        let reward = step.rewards[action];
        let regret = env.instantaneous_regret(x, &policy)?;
        data.push(x, action, reward);
        ledger.push(t, m, x, action, reward, regret, iters, policy, Some(meta));
    }
    Ok(ledger)
}

/// Per-round online-oracle variant: follow-the-leader regression on the full
/// prefix, then a fresh design solve every round. Oracle calls equal the
/// horizon.
pub fn run_online_design(
    env: &Environment,
    class: &ContextualFunctionClass,
    gamma: f64,
    eps: Option<f64>,
    defaults: &SolverDefaults,
    horizon: usize,
    seed: u64,
) -> Result<RunLedger> {
    check_shapes(env, class)?;
    if !(gamma > 0.0) {
        return Err(Error::Domain {
            name: "gamma",
            reason: format!("must be positive, got {gamma}"),
        });
    }
    let eps = eps.unwrap_or(1.0 / horizon as f64);
    let mut oracle = DesignOracle::new(class, &env.benchmark, *defaults);
    let mut running = RunningErm::new(class);
    let mut rng = rng_for_seed(seed);
    let mut ledger = RunLedger::new(seed);

    for t in 1..=horizon {
        let f_hat = running.best();
        ledger.oracle_calls += 1;
        let step = env.step(t, &mut rng);
        let x = step.context;
        let (policy, meta, iters) = oracle.solve(x, Some(f_hat), gamma, eps)?;
        let action = policy.sample_with(next_unit(&mut rng));
        let reward = step.rewards[action];
        let regret = env.instantaneous_regret(x, &policy)?;
        running.observe(class, x, action, reward);
        ledger.push(t, 1, x, action, reward, regret, iters, policy, Some(meta));
    }
    Ok(ledger)
}

/// Inverse-gap-weighted sampling distribution around the greedy action:
/// `p(a) = 1 / (K + gamma * (g_hat(best) - g_hat(a)))` off the greedy arm,
/// remainder on it. At `gamma = 0` this is uniform.
pub fn igw_distribution(g_hat: &[f64], gamma: f64) -> ActionMeasure {
    let k = g_hat.len();
    let mut best = 0;
    for (a, &v) in g_hat.iter().enumerate() {
        if v > g_hat[best] {
            best = a;
        }
    }
    let mut weights = vec![0.0; k];
    let mut rest = 0.0;
    for a in 0..k {
        if a != best {
            weights[a] = 1.0 / (k as f64 + gamma * (g_hat[best] - g_hat[a]));
            rest += weights[a];
        }
    }
    weights[best] = 1.0 - rest;
    ActionMeasure::new(weights).expect("IGW weights are nonnegative")
}

/// Inverse-gap-weighting baseline on the same epoch structure as the design
/// bandit; Dirac benchmark sets only.
pub fn run_igw(
    env: &Environment,
    class: &ContextualFunctionClass,
    schedule: &EpochSchedule,
    horizon: usize,
    seed: u64,
) -> Result<RunLedger> {
    check_shapes(env, class)?;
    for x in 0..env.num_contexts() {
        if !matches!(env.benchmark.resolve(Some(x))?, BenchmarkSet::Dirac) {
            return Err(Error::UnsupportedKind {
                reason: "inverse gap weighting requires a Dirac benchmark set",
            });
        }
    }
    let resolved = schedule.resolve(horizon)?;
    let bounds = resolved.boundaries().to_vec();
    let mut rng = rng_for_seed(seed);
    let mut ledger = RunLedger::new(seed);
    ledger.f_hat_by_epoch = vec![None; resolved.num_epochs() + 1];
    let mut data = Dataset::default();
    let mut epoch = 0usize;
    let mut gamma = 0.0;
    let mut f_hat = 0usize;

    for t in 1..=horizon {
        let m = resolved.epoch_of(t);
        if m != epoch {
            epoch = m;
            if m >= 2 {
                let window = data.window(bounds[m - 2], bounds[m - 1]);
                f_hat = erm_offline(class, &window)?;
                ledger.f_hat_by_epoch[m] = Some(f_hat);
                ledger.oracle_calls += 1;
                gamma = resolved.gamma_m(m, class.num_functions())?;
            }
        }
        let step = env.step(t, &mut rng);
        let x = step.context;
        let g_hat = if m == 1 {
            vec![0.0; class.num_actions()]
        } else {
            class.context_row(f_hat, x).to_vec()
        };
        let policy = igw_distribution(&g_hat, if m == 1 { 0.0 } else { gamma });
        let action = policy.sample_with(next_unit(&mut rng));
        let reward = step.rewards[action];
        let regret = env.instantaneous_regret(x, &policy)?;
        data.push(x, action, reward);
        ledger.push(t, m, x, action, reward, regret, 0, policy, None);
    }
    Ok(ledger)
}

/// Uniform-sampling control baseline.
pub fn run_uniform(env: &Environment, horizon: usize, seed: u64) -> Result<RunLedger> {
    let mut rng = rng_for_seed(seed);
    let mut ledger = RunLedger::new(seed);
    let policy = ActionMeasure::uniform(env.num_actions());
    for t in 1..=horizon {
        let step = env.step(t, &mut rng);
        let action = policy.sample_with(next_unit(&mut rng));
        let reward = step.rewards[action];
        let regret = env.instantaneous_regret(step.context, &policy)?;
        ledger.push(
            t,
            1,
            step.context,
            action,
            reward,
            regret,
            0,
            policy.clone(),
            None,
        );
    }
    Ok(ledger)
}

/// Greedy control baseline: uniform warm-up, a single offline regression,
/// then the plug-in greedy action forever.
pub fn run_greedy(
    env: &Environment,
    class: &ContextualFunctionClass,
    warmup: usize,
    horizon: usize,
    seed: u64,
) -> Result<RunLedger> {
    check_shapes(env, class)?;
    let mut rng = rng_for_seed(seed);
    let mut ledger = RunLedger::new(seed);
    let uniform = ActionMeasure::uniform(env.num_actions());
    let mut data = Dataset::default();
    let mut f_hat: Option<usize> = None;
    for t in 1..=horizon {
        if t > warmup && f_hat.is_none() {
            f_hat = Some(erm_offline(class, &data)?);
            ledger.oracle_calls += 1;
        }
        let step = env.step(t, &mut rng);
        let x = step.context;
        let (policy, epoch) = match f_hat {
            None => (uniform.clone(), 1),
            Some(f) => {
                let row = class.context_row(f, x);
                let mut best = 0;
                for (a, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = a;
                    }
                }
                (ActionMeasure::dirac(env.num_actions(), best), 2)
            }
        };
        let action = policy.sample_with(next_unit(&mut rng));
        let reward = step.rewards[action];
        let regret = env.instantaneous_regret(x, &policy)?;
        if epoch == 1 {
            data.push(x, action, reward);
        }
        ledger.push(t, epoch, x, action, reward, regret, 0, policy, None);
    }
    Ok(ledger)
}

/// Run one closure per seed on a bounded pool of worker threads, returning
/// results in seed order. Runs share no mutable state.
pub fn run_seeds<F>(seeds: &[u64], workers: usize, f: F) -> Result<Vec<RunLedger>>
where
    F: Fn(u64) -> Result<RunLedger> + Sync,
{
    let workers = workers.max(1).min(seeds.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<std::sync::Mutex<Option<Result<RunLedger>>>> =
        seeds.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= seeds.len() {
                    break;
                }
                let out = f(seeds[i]);
                *results[i].lock().unwrap() = Some(out);
            });
        }
    });
    results
        .into_iter()
        .map(|cell| cell.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::coverage;
    use crate::env::{Adversary, NoiseModel};

    fn tiny_env() -> (Environment, ContextualFunctionClass) {
        let truth = vec![vec![0.8, 0.3], vec![0.2, 0.7]];
        let class = ContextualFunctionClass::new(
            vec![
                truth.clone(),
                vec![vec![0.3, 0.8], vec![0.7, 0.2]],
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            ],
            Some(0),
        )
        .unwrap();
        let env = Environment::new(
            vec![0.5, 0.5],
            truth,
            NoiseModel::Bernoulli,
            Adversary::None,
            BenchmarkSet::Dirac,
        )
        .unwrap();
        (env, class)
    }

    fn standard_schedule() -> EpochSchedule {
        EpochSchedule::new(
            ScheduleMode::Doubling,
            GammaMode::Standard { d: 2.0 },
            0.05,
        )
    }

    #[test]
    fn doubling_boundaries_and_oracle_calls() {
        let schedule = standard_schedule();
        let resolved = schedule.resolve(1024).unwrap();
        assert_eq!(resolved.num_epochs(), 10);
        let (env, class) = tiny_env();
        let ledger = run_epoch_design(
            &env,
            &class,
            &schedule,
            &SolverDefaults::default(),
            1024,
            3,
        )
        .unwrap();
        assert_eq!(ledger.oracle_calls, 9);
        assert_eq!(ledger.rounds.len(), 1024);
    }

    #[test]
    fn small_epoch_boundaries() {
        let schedule = EpochSchedule::new(
            ScheduleMode::SmallEpoch,
            GammaMode::Standard { d: 2.0 },
            0.05,
        );
        let resolved = schedule.resolve(10_000).unwrap();
        assert_eq!(resolved.boundaries(), &[0, 200, 2000, 6324, 10_000]);
        // ceil(log2 log2 10^4) = 4 epochs, so at most 4 oracle calls.
        assert!(resolved.num_epochs() <= 4);
    }

    #[test]
    fn gamma_first_epoch_is_zero() {
        let resolved = standard_schedule().resolve(64).unwrap();
        assert_eq!(resolved.gamma_m(1, 20).unwrap(), 0.0);
    }

    #[test]
    fn gamma_standard_matches_hand_computation() {
        // tau_{m-1} = 64 under doubling: n = 32, |F| = 20, delta = 0.05,
        // D = 5 gives gamma = sqrt(5 / (ln 400 / 32)) ~ 5.168.
        let schedule = EpochSchedule::new(
            ScheduleMode::Doubling,
            GammaMode::Standard { d: 5.0 },
            0.05,
        );
        let resolved = schedule.resolve(128).unwrap();
        let m = resolved.epoch_of(128);
        assert_eq!(resolved.boundaries()[m - 1], 64);
        let gamma = resolved.gamma_m(m, 20).unwrap();
        let want = (5.0 / ((400.0f64).ln() / 32.0)).sqrt();
        assert!((gamma - want).abs() <= 1e-12);
        assert!((gamma - 5.168).abs() < 1e-3);
    }

    #[test]
    fn corruption_gamma_with_zero_budget_matches_inflated_standard() {
        let schedule = EpochSchedule::new(
            ScheduleMode::Doubling,
            GammaMode::Corruption { d: 5.0, c: 0.0 },
            0.05,
        );
        let resolved = schedule.resolve(128).unwrap();
        let m = resolved.epoch_of(100);
        let tau_prev = resolved.boundaries()[m - 1] as f64;
        let gamma = resolved.gamma_m(m, 20).unwrap();
        let log_term = (20.0 * 128.0 / 0.05f64).ln();
        let want = (5.0 * tau_prev / log_term).sqrt();
        assert!((gamma - want).abs() <= 1e-12);
    }

    #[test]
    fn gamma_nondecreasing_in_epoch() {
        for mode in [
            GammaMode::Standard { d: 3.0 },
            GammaMode::Misspec { d: 3.0, b: 0.01 },
            GammaMode::Corruption { d: 3.0, c: 50.0 },
            GammaMode::Shift { d: 3.0, a: 2.0 },
        ] {
            let schedule = EpochSchedule::new(ScheduleMode::Doubling, mode, 0.05);
            let resolved = schedule.resolve(4096).unwrap();
            let mut prev = 0.0;
            for m in 1..=resolved.num_epochs() {
                let g = resolved.gamma_m(m, 20).unwrap();
                assert!(g >= prev, "mode {mode:?} epoch {m}: {g} < {prev}");
                prev = g;
            }
        }
    }

    #[test]
    fn degenerate_instance_has_zero_regret() {
        let class =
            ContextualFunctionClass::new(vec![vec![vec![0.6]]], Some(0)).unwrap();
        let env = Environment::new(
            vec![1.0],
            vec![vec![0.6]],
            NoiseModel::Bernoulli,
            Adversary::None,
            BenchmarkSet::Dirac,
        )
        .unwrap();
        let ledger = run_epoch_design(
            &env,
            &class,
            &standard_schedule(),
            &SolverDefaults::default(),
            64,
            1,
        )
        .unwrap();
        assert_eq!(ledger.final_cum_regret(), 0.0);
        assert_eq!(ledger.oracle_calls, ledger.num_epochs() - 1);
    }

    #[test]
    fn runs_are_deterministic() {
        let (env, class) = tiny_env();
        let a = run_epoch_design(
            &env,
            &class,
            &standard_schedule(),
            &SolverDefaults::default(),
            256,
            42,
        )
        .unwrap();
        let b = run_epoch_design(
            &env,
            &class,
            &standard_schedule(),
            &SolverDefaults::default(),
            256,
            42,
        )
        .unwrap();
        assert_eq!(a, b);
        let c = run_epoch_design(
            &env,
            &class,
            &standard_schedule(),
            &SolverDefaults::default(),
            256,
            43,
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn online_variant_counts_one_oracle_call_per_round() {
        let (env, class) = tiny_env();
        let ledger =
            run_online_design(&env, &class, 10.0, None, &SolverDefaults::default(), 64, 7)
                .unwrap();
        assert_eq!(ledger.oracle_calls, 64);
        assert_eq!(ledger.rounds.len(), 64);
    }

    #[test]
    fn online_variant_certificates_hold_per_round() {
        let (env, class) = tiny_env();
        let ledger =
            run_online_design(&env, &class, 10.0, None, &SolverDefaults::default(), 48, 5)
                .unwrap();
        for meta in ledger.solve_meta.iter().flatten() {
            assert!(meta.certified_value <= 10.0 * meta.sec_bound / meta.gamma + 1e-9);
        }
    }

    #[test]
    fn policies_are_distributions_in_hull() {
        let truth = vec![vec![0.9, 0.4, 0.1, 0.6]];
        let class = ContextualFunctionClass::new(
            vec![truth.clone(), vec![vec![0.1, 0.5, 0.8, 0.2]]],
            Some(0),
        )
        .unwrap();
        let set = BenchmarkSet::Smooth {
            h: 0.5,
            mu: ActionMeasure::uniform(4),
        };
        let env = Environment::new(
            vec![1.0],
            truth,
            NoiseModel::Bernoulli,
            Adversary::None,
            set.clone(),
        )
        .unwrap();
        let ledger = run_epoch_design(
            &env,
            &class,
            &standard_schedule(),
            &SolverDefaults::default(),
            128,
            11,
        )
        .unwrap();
        for p in &ledger.policies {
            assert!(p.is_distribution());
            assert!(set.contains(p, Some(0)).unwrap());
        }
    }

    #[test]
    fn per_round_low_regret_and_good_coverage() {
        let (env, class) = tiny_env();
        let ledger = run_epoch_design(
            &env,
            &class,
            &standard_schedule(),
            &SolverDefaults::default(),
            256,
            9,
        )
        .unwrap();
        let vertices = BenchmarkSet::Dirac.vertices(2, None).unwrap();
        for (i, record) in ledger.rounds.iter().enumerate() {
            if record.epoch < 2 {
                continue;
            }
            let meta = ledger.solve_meta[i].unwrap();
            let f_hat = ledger.f_hat_by_epoch[record.epoch].unwrap();
            let (slice, map) = class.slice(record.context).unwrap();
            let g_hat = slice.row(map[f_hat]);
            let policy = &ledger.policies[i];
            let reward_max = vertices
                .iter()
                .map(|v| v.expected_value(g_hat).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            let lr = reward_max - policy.expected_value(g_hat).unwrap();
            assert!(lr <= 2.0 * meta.sec_bound / meta.gamma + 1e-9);
            for v in &vertices {
                let cov = coverage(policy, v, &slice, meta.eps).unwrap();
                let r_lam = reward_max - v.expected_value(g_hat).unwrap();
                assert!(cov <= 8.0 * meta.sec_bound + meta.gamma * r_lam + 1e-9);
            }
        }
    }

    #[test]
    fn igw_distribution_properties() {
        let g_hat = [0.2, 0.9, 0.5];
        let p = igw_distribution(&g_hat, 7.0);
        assert!(p.is_distribution());
        assert!(p.weight(1) >= 1.0 / 3.0);
        let p0 = igw_distribution(&g_hat, 0.0);
        for a in 0..3 {
            assert!((p0.weight(a) - 1.0 / 3.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn igw_satisfies_good_coverage_with_analytic_bound() {
        let (env, class) = tiny_env();
        let ledger = run_igw(&env, &class, &standard_schedule(), 128, 13).unwrap();
        let eps = 1.0 / 128.0;
        let vertices = BenchmarkSet::Dirac.vertices(2, None).unwrap();
        for (i, record) in ledger.rounds.iter().enumerate() {
            if record.epoch < 2 {
                continue;
            }
            let f_hat = ledger.f_hat_by_epoch[record.epoch].unwrap();
            let (slice, map) = class.slice(record.context).unwrap();
            let g_hat = slice.row(map[f_hat]);
            let sec = crate::complexity::sec_upper_bound(&slice, &BenchmarkSet::Dirac, eps)
                .unwrap();
            let resolved = standard_schedule().resolve(128).unwrap();
            let gamma = resolved.gamma_m(record.epoch, class.num_functions()).unwrap();
            let reward_max = g_hat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in &vertices {
                let cov = coverage(&ledger.policies[i], v, &slice, eps).unwrap();
                let r_lam = reward_max - v.expected_value(g_hat).unwrap();
                assert!(cov <= 8.0 * sec + gamma * r_lam + 1e-9);
            }
        }
    }

    #[test]
    fn igw_rejects_non_dirac_sets() {
        let truth = vec![vec![0.9, 0.4, 0.1, 0.6]];
        let class = ContextualFunctionClass::new(vec![truth.clone()], Some(0)).unwrap();
        let env = Environment::new(
            vec![1.0],
            truth,
            NoiseModel::Bernoulli,
            Adversary::None,
            BenchmarkSet::Smooth {
                h: 0.5,
                mu: ActionMeasure::uniform(4),
            },
        )
        .unwrap();
        assert!(matches!(
            run_igw(&env, &class, &standard_schedule(), 16, 1),
            Err(Error::UnsupportedKind { .. })
        ));
    }

    #[test]
    fn uniform_has_linear_regret_and_greedy_recovers_noiseless() {
        let truth = vec![vec![1.0, 0.0]];
        let class = ContextualFunctionClass::new(
            vec![truth.clone(), vec![vec![0.0, 1.0]]],
            Some(0),
        )
        .unwrap();
        let env = Environment::new(
            vec![1.0],
            truth,
            NoiseModel::UniformAdditive { width: 0.0 },
            Adversary::None,
            BenchmarkSet::Dirac,
        )
        .unwrap();
        let uniform = run_uniform(&env, 400, 3).unwrap();
        // Expected per-round regret is exactly 0.5 on (1, 0).
        let per_round = uniform.final_cum_regret() / 400.0;
        assert!((per_round - 0.5).abs() <= 1e-12);
        let first_half = uniform.cum_regret_at(200) / 200.0;
        assert!((first_half / per_round - 1.0).abs() <= 0.05);

        let greedy = run_greedy(&env, &class, 8, 400, 3).unwrap();
        for record in greedy.rounds.iter().skip(8) {
            assert_eq!(record.regret, 0.0);
        }
        assert_eq!(greedy.oracle_calls, 1);
    }

    #[test]
    fn per_context_regret_sums_to_total() {
        let (env, class) = tiny_env();
        let ledger = run_epoch_design(
            &env,
            &class,
            &standard_schedule(),
            &SolverDefaults::default(),
            256,
            21,
        )
        .unwrap();
        let map = per_context_regret(&ledger, &env).unwrap();
        let total: f64 = map.values().sum();
        assert!((total - ledger.final_cum_regret()).abs() <= 1e-9);
        // Single-context environment: everything lands on context 0.
        let single = Environment::new(
            vec![1.0],
            vec![vec![0.8, 0.3]],
            NoiseModel::Bernoulli,
            Adversary::None,
            BenchmarkSet::Dirac,
        )
        .unwrap();
        let single_class =
            ContextualFunctionClass::new(vec![vec![vec![0.8, 0.3]], vec![vec![0.3, 0.8]]], Some(0))
                .unwrap();
        let ledger2 = run_epoch_design(
            &single,
            &single_class,
            &standard_schedule(),
            &SolverDefaults::default(),
            128,
            2,
        )
        .unwrap();
        let map2 = per_context_regret(&ledger2, &single).unwrap();
        assert!((map2[&0] - ledger2.final_cum_regret()).abs() <= 1e-9);
    }

    #[test]
    fn cumulative_regret_is_nondecreasing() {
        let (env, class) = tiny_env();
        let ledger = run_epoch_design(
            &env,
            &class,
            &standard_schedule(),
            &SolverDefaults::default(),
            200,
            17,
        )
        .unwrap();
        for pair in ledger.rounds.windows(2) {
            assert!(pair[1].cum_regret >= pair[0].cum_regret - 1e-12);
        }
    }

    #[test]
    fn run_seeds_preserves_order_and_results() {
        let (env, class) = tiny_env();
        let seeds = [5u64, 6, 7, 8];
        let batch = run_seeds(&seeds, 4, |s| {
            run_epoch_design(
                &env,
                &class,
                &standard_schedule(),
                &SolverDefaults::default(),
                64,
                s,
            )
        })
        .unwrap();
        for (s, ledger) in seeds.iter().zip(&batch) {
            assert_eq!(ledger.seed, *s);
            let serial = run_epoch_design(
                &env,
                &class,
                &standard_schedule(),
                &SolverDefaults::default(),
                64,
                *s,
            )
            .unwrap();
            assert_eq!(*ledger, serial);
        }
    }

    #[test]
    fn horizon_must_cover_first_epoch() {
        let schedule = standard_schedule();
        assert!(schedule.resolve(1).is_err());
        assert!(schedule.resolve(2).is_ok());
    }
}
