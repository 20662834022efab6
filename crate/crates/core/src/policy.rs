//! Estimators of the state distribution a policy induces.
//!
//! Two routes are offered: normalized visit counts from rollouts, and power
//! iteration on the Markov chain of the greedy policy (with the goal
//! redirected to the start so the chain is recurrent).

use serde::{Deserialize, Serialize};

use crate::agent::QTable;
use crate::error::{Error, Result};
use crate::gridworld::GridworldEnv;
use crate::ot::ProbabilityVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitWindow {
    LastEpisode,
    AllEpisodes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryMethod {
    Empirical,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationaryConfig {
    pub method: StationaryMethod,
    pub window: VisitWindow,
    pub smoothing: f64,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for StationaryConfig {
    fn default() -> Self {
        Self {
            method: StationaryMethod::Empirical,
            window: VisitWindow::LastEpisode,
            smoothing: 1e-6,
            damping: 0.05,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

impl StationaryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "stationary.smoothing must be >= 0, got {}",
                self.smoothing
            )));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidConfig(format!(
                "stationary.damping must be in [0, 1), got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig(
                "stationary.tol and stationary.max_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-state visit tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitCounter {
    counts: Vec<u64>,
    reachable: Vec<bool>,
    window: VisitWindow,
}

impl VisitCounter {
    /// `reachable` marks states that may carry mass (non-obstacle cells).
    pub fn new(reachable: Vec<bool>, window: VisitWindow) -> Self {
        Self {
            counts: vec![0; reachable.len()],
            reachable,
            window,
        }
    }

    pub fn from_counts(
        counts: Vec<u64>,
        reachable: Vec<bool>,
        window: VisitWindow,
    ) -> Result<Self> {
        if counts.len() != reachable.len() {
            return Err(Error::DimensionMismatch {
                expected: reachable.len(),
                found: counts.len(),
            });
        }
        Ok(Self {
            counts,
            reachable,
            window,
        })
    }

    pub fn record(&mut self, state: usize) {
        self.counts[state] += 1;
    }

    /// Called at the start of every episode; clears tallies for `LastEpisode`.
    pub fn begin_episode(&mut self) {
        if self.window == VisitWindow::LastEpisode {
            self.counts.iter_mut().for_each(|c| *c = 0);
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn window(&self) -> VisitWindow {
        self.window
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Normalized visit counts, with `smoothing` pseudo-counts on reachable states.
pub fn empirical_distribution(counter: &VisitCounter, smoothing: f64) -> Result<ProbabilityVector> {
    if !(smoothing >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "smoothing must be >= 0, got {smoothing}"
        )));
    }
    let weights: Vec<f64> = counter
        .counts
        .iter()
        .zip(&counter.reachable)
        .map(|(&c, &r)| c as f64 + if r { smoothing } else { 0.0 })
        .collect();
    ProbabilityVector::from_weights(weights).map_err(|e| match e {
        Error::ZeroMass => Error::InvalidConfig("no visits recorded and smoothing is zero".into()),
        other => other,
    })
}

/// Row-stochastic transition matrix over the state index space.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyMatrix {
    n: usize,
    rows: Vec<f64>,
    free: Vec<bool>,
}

impl PolicyMatrix {
    /// Checks row-stochasticity; `free` selects the states the damping
    /// distribution (and the initial iterate) is spread over.
    pub fn new(rows: Vec<Vec<f64>>, free: Vec<bool>) -> Result<Self> {
        let n = rows.len();
        if free.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: free.len(),
            });
        }
        if !free.iter().any(|&f| f) {
            return Err(Error::EmptyStateSpace);
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "row {i} has a negative or non-finite entry"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!("row {i} sums to {s}")));
            }
            flat.extend_from_slice(row);
        }
        Ok(Self {
            n,
            rows: flat,
            free,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i * self.n + j]
    }

    pub fn free(&self) -> &[bool] {
        &self.free
    }

    fn uniform_free(&self) -> Vec<f64> {
        let k = self.free.iter().filter(|&&f| f).count() as f64;
        self.free
            .iter()
            .map(|&f| if f { 1.0 / k } else { 0.0 })
            .collect()
    }

    /// `(1 - damping) * v^T M + damping * u`, with `u` uniform over free states.
    pub fn apply(&self, v: &[f64], damping: f64) -> Vec<f64> {
        let n = self.n;
        let u = self.uniform_free();
        let mut out = vec![0.0; n];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(&self.rows[i * n..(i + 1) * n]) {
                *o += vi * m;
            }
        }
        out.iter_mut()
            .zip(&u)
            .for_each(|(o, &ui)| *o = (1.0 - damping) * *o + damping * ui);
        out
    }

    /// `|| v^T M_damped - v^T ||_1`.
    pub fn residual(&self, v: &[f64], damping: f64) -> f64 {
        self.apply(v, damping)
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// Greedy index over four action values; lowest index wins ties.
pub(crate) fn greedy(values: &[f64; 4]) -> usize {
    let mut best = 0;
    for a in 1..4 {
        if values[a] > values[best] {
            best = a;
        }
    }
    best
}

/// Markov chain of the greedy policy, with goal -> start restart closure.
pub fn induced_chain(env: &GridworldEnv, qtable: &QTable) -> Result<PolicyMatrix> {
    let n = env.n_states();
    if qtable.n_states() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: qtable.n_states(),
        });
    }
    let mut rows = vec![vec![0.0; n]; n];
    for (s, row) in rows.iter_mut().enumerate() {
        let next = if env.is_obstacle(s) {
            s
        } else if s == env.goal() {
            env.start()
        } else {
            let action = crate::gridworld::Action::from_index(greedy(qtable.row(s))).unwrap();
            env.step(s, action)?.next_state
        };
        row[next] = 1.0;
    }
    PolicyMatrix::new(rows, env.free_mask())
}

/// Damped power iteration from the uniform distribution over free states.
///
/// Returns the first iterate `v` with `residual(v, damping) <= tol`.
pub fn stationary_distribution(
    chain: &PolicyMatrix,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ProbabilityVector> {
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::InvalidConfig(format!(
            "damping must be in [0, 1), got {damping}"
        )));
    }
    let mut v = chain.uniform_free();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut next = chain.apply(&v, damping);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        if residual <= tol {
            return ProbabilityVector::from_weights(v);
        }
        v = next;
    }
    Err(Error::StationaryNotConverged {
        iterations: max_iter,
        residual,
    })
}
