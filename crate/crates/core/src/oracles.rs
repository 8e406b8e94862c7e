//! Offline and online regression oracles over finite contextual function
//! classes: exact ERM by full scan, follow-the-leader as the online
//! instantiation, and the out-of-sample error bound used to set exploration
//! schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ContextualFunctionClass;

/// A batch of (context, action, reward) observations with rewards in [0, 1].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<(usize, usize, f64)>,
}

impl Dataset {
    pub fn new(records: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(_, _, r) in &records {
            if !r.is_finite() || !(0.0..=1.0).contains(&r) {
                return Err(Error::Domain {
                    name: "reward",
                    reason: format!("must lie in [0, 1], got {r}"),
                });
            }
        }
        Ok(Self { records })
    }

    pub fn push(&mut self, context: usize, action: usize, reward: f64) {
        debug_assert!((0.0..=1.0).contains(&reward));
        self.records.push((context, action, reward));
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[(usize, usize, f64)] {
        &self.records
    }

    /// The records in positions `[from, to)`.
    pub fn window(&self, from: usize, to: usize) -> Dataset {
        Dataset {
            records: self.records[from..to.min(self.records.len())].to_vec(),
        }
    }
}

/// Exact offline ERM: the smallest function id minimizing the empirical
/// square loss. An empty dataset ties every member, so id 0 is returned.
pub fn erm_offline(class: &ContextualFunctionClass, data: &Dataset) -> Result<usize> {
    let losses = square_losses(class, data)?;
    let mut best = 0;
    for (f, &loss) in losses.iter().enumerate() {
        if loss < losses[best] {
            best = f;
        }
    }
    Ok(best)
}

/// Per-member empirical square losses, accumulated in record order.
pub fn square_losses(class: &ContextualFunctionClass, data: &Dataset) -> Result<Vec<f64>> {
    let mut losses = vec![0.0; class.num_functions()];
    for &(x, a, r) in data.records() {
        if x >= class.num_contexts() {
            return Err(Error::IndexOutOfRange {
                index: x,
                len: class.num_contexts(),
            });
        }
        if a >= class.num_actions() {
            return Err(Error::IndexOutOfRange {
                index: a,
                len: class.num_actions(),
            });
        }
        for (f, loss) in losses.iter_mut().enumerate() {
            let d = class.value(f, x, a) - r;
            *loss += d * d;
        }
    }
    Ok(losses)
}

/// Follow-the-leader online oracle: ERM on the observed prefix. With an
/// empty prefix the first member is used.
pub fn online_ftl(class: &ContextualFunctionClass, prefix: &Dataset) -> Result<usize> {
    erm_offline(class, prefix)
}

/// Incrementally maintained per-member losses, equal to recomputing
/// [`erm_offline`] from scratch at every step.
#[derive(Debug, Clone)]
pub struct RunningErm {
    losses: Vec<f64>,
}

impl RunningErm {
    pub fn new(class: &ContextualFunctionClass) -> Self {
        Self {
            losses: vec![0.0; class.num_functions()],
        }
    }

    pub fn observe(&mut self, class: &ContextualFunctionClass, x: usize, a: usize, r: f64) {
        for (f, loss) in self.losses.iter_mut().enumerate() {
            let d = class.value(f, x, a) - r;
            *loss += d * d;
        }
    }

    pub fn best(&self) -> usize {
        let mut best = 0;
        for (f, &loss) in self.losses.iter().enumerate() {
            if loss < self.losses[best] {
                best = f;
            }
        }
        best
    }
}

/// Out-of-sample square-error bound for an ERM over `class_size` functions
/// trained on `n` samples: `ln(class_size * horizon / delta) / n`.
/// `horizon = 1` recovers the base form; larger horizons give the inflated
/// form the robustness schedules use.
pub fn regoff_bound(class_size: usize, n: usize, delta: f64, horizon: usize) -> Result<f64> {
    if class_size == 0 {
        return Err(Error::Domain {
            name: "class_size",
            reason: "must be positive".into(),
        });
    }
    if n == 0 {
        return Err(Error::Domain {
            name: "n",
            reason: "must be at least 1".into(),
        });
    }
    if horizon == 0 {
        return Err(Error::Domain {
            name: "horizon",
            reason: "must be at least 1".into(),
        });
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain {
            name: "delta",
            reason: format!("must lie in (0, 1], got {delta}"),
        });
    }
    Ok((class_size as f64 * horizon as f64 / delta).ln() / n as f64)
}
