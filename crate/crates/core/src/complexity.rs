//! Brute-force and analytic evaluators for the structural complexity
//! measures: sequential extrapolation coefficient (SEC), the min-max design
//! value (DOEC), the decision-estimation coefficient (DEC), and the Eluder
//! dimension, plus the cheating-code instance family exhibiting their
//! separation.
//!
//! Brute-force values are one-sided and labeled as such: the SEC search is a
//! certified lower bound over vertex sequences of bounded length; the grid
//! minimizations are upper bounds converging as the grid refines.

use serde::{Deserialize, Serialize};

use crate::coverage::coverage;
use crate::error::{Error, Result};
use crate::types::{ActionMeasure, BenchmarkSet, FunctionClassSlice};

/// Default cap on simplex grid sizes.
pub const DEFAULT_GRID_CAP: u128 = 10_000_000;

/// Default budget on coverage evaluations inside the SEC sequence search.
pub const DEFAULT_SEC_BUDGET: u128 = 2_000_000;

/// Beam width for sequence search beyond the exhaustive length.
const SEC_BEAM_WIDTH: usize = 32;

/// Sequence lengths up to this are searched exhaustively.
const SEC_EXHAUSTIVE_LEN: usize = 4;

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// Barycentric lattice specification for brute-force min/max over simplices:
/// all compositions of `resolution` among the coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: usize,
    pub max_points: u128,
}

impl GridSpec {
    pub fn new(resolution: usize) -> Self {
        Self {
            resolution,
            max_points: DEFAULT_GRID_CAP,
        }
    }

    pub fn with_cap(resolution: usize, max_points: u128) -> Self {
        Self {
            resolution,
            max_points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::Domain {
                name: "resolution",
                reason: format!("must be at least 2, got {}", self.resolution),
            });
        }
        Ok(())
    }

    /// Number of lattice points on a `dims`-dimensional simplex, saturating.
    pub fn point_count(&self, dims: usize) -> u128 {
        binomial_saturating(self.resolution + dims - 1, dims - 1)
    }

    fn check_budget(&self, dims: usize) -> Result<()> {
        self.validate()?;
        let needed = self.point_count(dims);
        if needed > self.max_points {
            return Err(Error::ResourceBudget {
                what: "simplex grid points",
                needed,
                cap: self.max_points,
            });
        }
        Ok(())
    }
}

fn binomial_saturating(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if out == u128::MAX {
            return out;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// SEC: sequence sums, search, analytic bounds
// ---------------------------------------------------------------------------

/// Value of one vertex sequence in the sequential-extrapolation sum:
/// `sum_i Coverage_{N eps}(lambda_{1:i}, lambda_i; G)` with
/// `lambda_{1:i} = lambda_1 + ... + lambda_i` (the prefix including term i).
///
/// Any such value is a certified lower bound on the sequential extrapolation
/// coefficient at `eps`.
pub fn sec_sequence_value(
    class: &FunctionClassSlice,
    sequence: &[ActionMeasure],
    eps: f64,
) -> Result<f64> {
    if sequence.is_empty() {
        return Ok(0.0);
    }
    let reg = sequence.len() as f64 * eps;
    let mut prefix = ActionMeasure::zero(class.num_actions());
    let mut total = 0.0;
    for lambda in sequence {
        prefix = prefix.plus_scaled(lambda, 1.0)?;
        total += coverage(&prefix, lambda, class, reg)?;
    }
    Ok(total)
}

/// Best vertex-restricted sequence of length at most `n_max`: exhaustive up
/// to length 4, beam search (width 32) beyond. The result is a lower bound on
/// the sequential extrapolation coefficient, never the exact value.
pub fn sec_lower_bound_search(
    class: &FunctionClassSlice,
    benchmark: &BenchmarkSet,
    eps: f64,
    n_max: usize,
    x: Option<usize>,
) -> Result<f64> {
    sec_lower_bound_search_with_budget(class, benchmark, eps, n_max, x, DEFAULT_SEC_BUDGET)
}

pub fn sec_lower_bound_search_with_budget(
    class: &FunctionClassSlice,
    benchmark: &BenchmarkSet,
    eps: f64,
    n_max: usize,
    x: Option<usize>,
    budget: u128,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain {
            name: "eps",
            reason: format!("must be positive, got {eps}"),
        });
    }
    let vertices = benchmark.vertices(class.num_actions(), x)?;
    let v = vertices.len() as u128;
    let mut spent: u128 = 0;
    let mut best: f64 = 0.0;
    for n in 1..=n_max {
        let cost = if n <= SEC_EXHAUSTIVE_LEN {
            // Every node of the depth-n tree evaluates one coverage.
            let mut c: u128 = 0;
            let mut layer: u128 = 1;
            for _ in 0..n {
                layer = layer.saturating_mul(v);
                c = c.saturating_add(layer);
            }
            c
        } else {
            (n as u128).saturating_mul(SEC_BEAM_WIDTH as u128).saturating_mul(v)
        };
        spent = spent.saturating_add(cost);
        if spent > budget {
            return Err(Error::ResourceBudget {
                what: "sequence-search coverage evaluations",
                needed: spent,
                cap: budget,
            });
        }
        let reg = n as f64 * eps;
        let value = if n <= SEC_EXHAUSTIVE_LEN {
            let mut best_n: f64 = 0.0;
            let prefix = ActionMeasure::zero(class.num_actions());
            exhaustive_sequences(class, &vertices, reg, n, &prefix, 0.0, &mut best_n)?;
            best_n
        } else {
            beam_sequences(class, &vertices, reg, n)?
        };
        best = best.max(value);
    }
    Ok(best)
}

fn exhaustive_sequences(
    class: &FunctionClassSlice,
    vertices: &[ActionMeasure],
    reg: f64,
    remaining: usize,
    prefix: &ActionMeasure,
    acc: f64,
    best: &mut f64,
) -> Result<()> {
    if remaining == 0 {
        *best = best.max(acc);
        return Ok(());
    }
    for v in vertices {
        let next = prefix.plus_scaled(v, 1.0)?;
        let term = coverage(&next, v, class, reg)?;
        exhaustive_sequences(class, vertices, reg, remaining - 1, &next, acc + term, best)?;
    }
    Ok(())
}

fn beam_sequences(
    class: &FunctionClassSlice,
    vertices: &[ActionMeasure],
    reg: f64,
    n: usize,
) -> Result<f64> {
    let mut beam: Vec<(ActionMeasure, f64)> =
        vec![(ActionMeasure::zero(class.num_actions()), 0.0)];
    for _ in 0..n {
        let mut candidates = Vec::with_capacity(beam.len() * vertices.len());
        for (prefix, acc) in &beam {
            for v in vertices {
                let next = prefix.plus_scaled(v, 1.0)?;
                let term = coverage(&next, v, class, reg)?;
                candidates.push((next, acc + term));
            }
        }
        // Stable: ties keep generation order.
        candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("sums are finite"));
        candidates.truncate(SEC_BEAM_WIDTH);
        beam = candidates;
    }
    Ok(beam
        .iter()
        .map(|(_, acc)| *acc)
        .fold(0.0f64, f64::max))
}

/// Analytic upper bound on the sequential extrapolation coefficient.
///
/// - Dirac sets: `16 * Edim(G, sqrt(eps)) * ceil(log2(1/sqrt(eps)))^2`.
/// - Smooth sets: `(1/h) * ln(1 + 1/eps)`.
/// - Explicit sets carry no analytic bound; use the brute-force search.
pub fn sec_upper_bound(
    class: &FunctionClassSlice,
    benchmark: &BenchmarkSet,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain {
            name: "eps",
            reason: format!("must be positive, got {eps}"),
        });
    }
    match benchmark.resolve(None)? {
        BenchmarkSet::Dirac => {
            let edim = eluder_dimension(class, eps.sqrt())? as f64;
            let k = (1.0 / eps.sqrt()).log2().ceil().max(1.0);
            Ok(16.0 * edim * k * k)
        }
        BenchmarkSet::Smooth { h, .. } => Ok((1.0 / h) * (1.0 + 1.0 / eps).ln()),
        BenchmarkSet::Explicit(_) => Err(Error::UnsupportedKind {
            reason: "no analytic sequential-extrapolation bound for explicit benchmark sets",
        }),
        BenchmarkSet::PerContext(_) => unreachable!("resolved above"),
    }
}

// ---------------------------------------------------------------------------
// Eluder dimension
// ---------------------------------------------------------------------------

/// Exact Eluder dimension by exhaustive search: the longest sequence of
/// actions each independent of its predecessors at some scale `eps' >=
/// eps_prime`, where a point is independent of a set if some function pair
/// differs by more than `eps'` there while its squared differences over the
/// set总 stay within `eps'^2`.
///
/// The scale is searched over the finite set of achievable gap values; for
/// each achievable gap `v > eps_prime` the limit `eps' -> v` from below is
/// also tested, which dominates every scale in the open interval below `v`.
pub fn eluder_dimension(class: &FunctionClassSlice, eps_prime: f64) -> Result<usize> {
    if !(eps_prime > 0.0) {
        return Err(Error::Domain {
            name: "eps_prime",
            reason: format!("must be positive, got {eps_prime}"),
        });
    }
    let n = class.num_actions();
    let m = class.num_functions();
    if n > 32 {
        return Err(Error::ResourceBudget {
            what: "eluder search actions",
            needed: n as u128,
            cap: 32,
        });
    }
    // Squared-gap rows per unordered pair.
    let mut pair_sq: Vec<Vec<f64>> = Vec::new();
    let mut gaps: Vec<f64> = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let row: Vec<f64> = (0..n)
                .map(|a| {
                    let d = class.value(i, a) - class.value(j, a);
                    d * d
                })
                .collect();
            for v in &row {
                gaps.push(v.sqrt());
            }
            pair_sq.push(row);
        }
    }
    if pair_sq.is_empty() {
        return Ok(0);
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    gaps.dedup();

    // Candidate scales: eps_prime itself (strict gap test), and each
    // achievable gap above it in the limit from below (inclusive gap test,
    // strict sum test).
    #[derive(Clone, Copy)]
    struct Scale {
        gap_min: f64,
        gap_strict: bool,
        sum_max: f64,
        sum_strict: bool,
    }
    let mut scales = vec![Scale {
        gap_min: eps_prime,
        gap_strict: true,
        sum_max: eps_prime * eps_prime,
        sum_strict: false,
    }];
    for &v in gaps.iter().filter(|&&v| v > eps_prime) {
        scales.push(Scale {
            gap_min: v,
            gap_strict: false,
            sum_max: v * v,
            sum_strict: true,
        });
    }

    let mut best = 0usize;
    for scale in scales {
        // Repeats never extend a sequence (the witness pair would need both
        // a large gap at the repeated point and a small squared sum over a
        // set containing it), so search over subsets of distinct actions.
        let admits = |set: u32, z: usize| -> bool {
            pair_sq.iter().any(|row| {
                let gap_ok = if scale.gap_strict {
                    row[z].sqrt() > scale.gap_min
                } else {
                    row[z].sqrt() >= scale.gap_min
                };
                if !gap_ok {
                    return false;
                }
                let sum: f64 = (0..n).filter(|a| set >> a & 1 == 1).map(|a| row[a]).sum();
                if scale.sum_strict {
                    sum < scale.sum_max
                } else {
                    sum <= scale.sum_max
                }
            })
        };
        fn dfs(set: u32, n: usize, admits: &dyn Fn(u32, usize) -> bool) -> usize {
            let mut best = 0;
            for z in 0..n {
                if set >> z & 1 == 0 && admits(set, z) {
                    best = best.max(1 + dfs(set | 1 << z, n, admits));
                }
            }
            best
        }
        best = best.max(dfs(0, n, &admits));
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// DOEC / DEC over simplex grids
// ---------------------------------------------------------------------------

/// Grid upper bound on the min-max design value: the minimum over lattice
/// mixtures of benchmark vertices of the worst-case objective
/// `E_lambda[g_hat] - E_p[g_hat] + Coverage(p, lambda)/gamma`. Converges to
/// the true value from above as the resolution grows.
pub fn doec_bruteforce(
    g_hat_index: usize,
    class: &FunctionClassSlice,
    benchmark: &BenchmarkSet,
    gamma: f64,
    eps: f64,
    grid: &GridSpec,
    x: Option<usize>,
) -> Result<f64> {
    if !(gamma > 0.0) || !(eps > 0.0) {
        return Err(Error::Domain {
            name: "gamma/eps",
            reason: "both must be positive".into(),
        });
    }
    let g_hat = class.row(g_hat_index);
    let vertices = benchmark.vertices(class.num_actions(), x)?;
    let d = vertices.len();
    grid.check_budget(d)?;

    let n = class.num_actions();
    let m = class.num_functions();
    let pairs = m * (m - 1) / 2;
    // Per-vertex numerators and expected squared diffs.
    let mut num = vec![vec![0.0; pairs]; d]; // (E_v[g_i - g_j])^2
    let mut svh = vec![vec![0.0; pairs]; d]; // E_v[(g_i - g_j)^2]
    let mut rew = vec![0.0; d];
    for (vi, v) in vertices.iter().enumerate() {
        rew[vi] = v.expected_value(g_hat)?;
        let mut pi = 0;
        for i in 0..m {
            for j in (i + 1)..m {
                let mut mean = 0.0;
                let mut meansq = 0.0;
                for a in 0..n {
                    let dv = class.value(i, a) - class.value(j, a);
                    mean += v.weight(a) * dv;
                    meansq += v.weight(a) * dv * dv;
                }
                num[vi][pi] = mean * mean;
                svh[vi][pi] = meansq;
                pi += 1;
            }
        }
    }

    // Depth-first over lattice mixtures with per-level accumulators: level k
    // holds the denominators and expected reward of the partial mixture over
    // vertices 0..k, so no per-leaf rescan and no add/subtract drift.
    let mut scan = DoecScan {
        res: grid.resolution,
        gamma,
        d,
        pairs,
        num: &num,
        svh: &svh,
        rew: &rew,
        den: vec![vec![eps; pairs]; d + 1],
        e_p: vec![0.0; d + 1],
        best: f64::INFINITY,
    };
    scan.recurse(0, grid.resolution);
    Ok(scan.best)
}

struct DoecScan<'a> {
    res: usize,
    gamma: f64,
    d: usize,
    pairs: usize,
    num: &'a [Vec<f64>],
    svh: &'a [Vec<f64>],
    rew: &'a [f64],
    den: Vec<Vec<f64>>,
    e_p: Vec<f64>,
    best: f64,
}

impl DoecScan<'_> {
    fn recurse(&mut self, k: usize, remaining: usize) {
        if k == self.d - 1 {
            let w = remaining as f64 / self.res as f64;
            for p in 0..self.pairs {
                self.den[k + 1][p] = self.den[k][p] + w * self.svh[k][p];
            }
            let leaf_e = self.e_p[k] + w * self.rew[k];
            let mut worst = f64::NEG_INFINITY;
            for v in 0..self.d {
                let mut cov: f64 = 0.0;
                for p in 0..self.pairs {
                    let c = self.num[v][p] / self.den[k + 1][p];
                    if c > cov {
                        cov = c;
                    }
                }
                let val = self.rew[v] - leaf_e + cov / self.gamma;
                if val > worst {
                    worst = val;
                }
            }
            if worst < self.best {
                self.best = worst;
            }
            return;
        }
        for w_units in 0..=remaining {
            let w = w_units as f64 / self.res as f64;
            for p in 0..self.pairs {
                self.den[k + 1][p] = self.den[k][p] + w * self.svh[k][p];
            }
            self.e_p[k + 1] = self.e_p[k] + w * self.rew[k];
            self.recurse(k + 1, remaining - w_units);
        }
    }
}

fn enumerate_compositions(
    total: usize,
    dims: usize,
    scratch: &mut Vec<usize>,
    level: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if level == dims - 1 {
        scratch[level] = total;
        f(scratch);
        return;
    }
    for w in 0..=total {
        scratch[level] = w;
        enumerate_compositions(total - w, dims, scratch, level + 1, f);
    }
}

/// Grid upper bound on the decision-estimation value for a designated
/// estimate: the minimum over lattice distributions on the full simplex of
/// the worst case over true functions of
/// `max_lambda E_lambda[g*] - E_p[g*] - gamma * E_p[(g_hat - g*)^2]`.
pub fn dec_bruteforce(
    g_hat_index: usize,
    class: &FunctionClassSlice,
    benchmark: &BenchmarkSet,
    gamma: f64,
    grid: &GridSpec,
    x: Option<usize>,
) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Domain {
            name: "gamma",
            reason: format!("must be positive, got {gamma}"),
        });
    }
    let n = class.num_actions();
    grid.check_budget(n)?;
    let g_hat = class.row(g_hat_index);
    let vertices = benchmark.vertices(n, x)?;
    let m = class.num_functions();

    // bench[g*] = best benchmark reward under g*; combined[g*][a] folds the
    // linear reward term and the quadratic estimation penalty.
    let mut bench = vec![f64::NEG_INFINITY; m];
    let mut combined = vec![vec![0.0; n]; m];
    for gs in 0..m {
        for v in &vertices {
            bench[gs] = bench[gs].max(v.expected_value(class.row(gs))?);
        }
        for a in 0..n {
            let diff = g_hat[a] - class.value(gs, a);
            combined[gs][a] = class.value(gs, a) + gamma * diff * diff;
        }
    }

    let res = grid.resolution;
    let mut best = f64::INFINITY;
    let mut scratch = vec![0usize; n];
    enumerate_compositions(res, n, &mut scratch, 0, &mut |weights| {
        let mut worst = f64::NEG_INFINITY;
        for gs in 0..m {
            let mut acc = 0.0;
            for (a, &wu) in weights.iter().enumerate() {
                acc += wu as f64 / res as f64 * combined[gs][a];
            }
            let val = bench[gs] - acc;
            if val > worst {
                worst = val;
            }
        }
        if worst < best {
            best = worst;
        }
    });
    Ok(best)
}

// ---------------------------------------------------------------------------
// Cheating code
// ---------------------------------------------------------------------------

/// The structured instance separating active-design exploration from
/// worst-case sequential extrapolation: `2^k` indicator-style arms plus `k`
/// half-scale code arms whose bits spell out the optimal arm's index.
#[derive(Debug, Clone)]
pub struct CheatingCode {
    pub k: usize,
    pub num_actions: usize,
    pub class: FunctionClassSlice,
}

/// Build the instance for a given `k` (action count `2^k + k`, `2^k`
/// functions).
pub fn cheating_code_instance(k: usize) -> Result<CheatingCode> {
    if !(1..=10).contains(&k) {
        return Err(Error::Domain {
            name: "k",
            reason: format!("must lie in [1, 10], got {k}"),
        });
    }
    let arms = 1usize << k;
    let num_actions = arms + k;
    let mut rows = Vec::with_capacity(arms);
    for i in 0..arms {
        let mut row = vec![0.0; num_actions];
        row[i] = 1.0;
        for l in 0..k {
            row[arms + l] = 0.5 * ((i >> l) & 1) as f64;
        }
        rows.push(row);
    }
    Ok(CheatingCode {
        k,
        num_actions,
        class: FunctionClassSlice::new(rows)?,
    })
}

impl CheatingCode {
    /// Ids of the code arms.
    pub fn code_actions(&self) -> std::ops::Range<usize> {
        (1 << self.k)..self.num_actions
    }

    /// The explicit certificate distribution: `(1 - beta)` on the greedy arm
    /// of the designated estimate plus `beta` uniform over the code arms.
    pub fn p_beta(&self, g_hat_index: usize, beta: f64) -> Result<ActionMeasure> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Domain {
                name: "beta",
                reason: format!("must lie in [0, 1], got {beta}"),
            });
        }
        let row = self.class.row(g_hat_index);
        let mut greedy = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[greedy] {
                greedy = a;
            }
        }
        let mut weights = vec![0.0; self.num_actions];
        weights[greedy] = 1.0 - beta;
        for a in self.code_actions() {
            weights[a] += beta / self.k as f64;
        }
        ActionMeasure::new(weights)
    }

    /// The canonical point-mass sequence over the `2^k` indicator arms whose
    /// extrapolation sum lower-bounds the sequential coefficient.
    pub fn canonical_sequence(&self) -> Vec<ActionMeasure> {
        (0..(1 << self.k))
            .map(|a| ActionMeasure::dirac(self.num_actions, a))
            .collect()
    }
}
