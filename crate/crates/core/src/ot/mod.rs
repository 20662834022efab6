//! Discrete optimal transport between distributions on a common state space.
//!
//! Plans are always indexed by the full state space: zero-mass states stay in
//! the vectors and simply carry no flow.

mod network_simplex;
mod sinkhorn;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when accepting user-supplied distributions.
pub const NORMALIZATION_TOL: f64 = 1e-6;
/// Marginal tolerance for exact plans.
pub const EXACT_MARGINAL_TOL: f64 = 1e-7;

/// Symmetric, nonnegative ground cost with zero diagonal, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    /// Squared Euclidean distances between grid coordinates.
    pub fn from_coords(coords: &[(i64, i64)]) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyStateSpace);
        }
        let n = coords.len();
        let mut entries = vec![0.0; n * n];
        for (i, &(xi, yi)) in coords.iter().enumerate() {
            for (j, &(xj, yj)) in coords.iter().enumerate() {
                let (dx, dy) = (xi - xj, yi - yj);
                entries[i * n + j] = (dx * dx + dy * dy) as f64;
            }
        }
        Ok(Self { n, entries })
    }

    /// Builds a cost from explicit rows, checking the matrix invariants.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyStateSpace);
        }
        let mut entries = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "cost diagonal entry {i} is not zero"
                )));
            }
            for j in 0..n {
                let c = entries[i * n + j];
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::InvalidConfig(format!("cost entry ({i},{j}) = {c}")));
                }
                if (c - entries[j * n + i]).abs() > 1e-12 * c.abs().max(1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "cost is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }
}

/// Squared Euclidean cost matrix over grid coordinates.
pub fn build_cost_matrix(coords: &[(i64, i64)]) -> Result<CostMatrix> {
    CostMatrix::from_coords(coords)
}

/// A probability distribution over state indices.
///
/// Construction accepts inputs whose total is within [`NORMALIZATION_TOL`] of
/// one and rescales them so the stored mass sums to one to machine precision.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbabilityVector {
    mass: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        let sum = Self::checked_sum(&mass)?;
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self::rescaled(mass, sum))
    }

    /// Normalizes arbitrary nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let sum = Self::checked_sum(&weights)?;
        if sum <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(Self::rescaled(weights, sum))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_weights(vec![1.0; n])
    }

    fn checked_sum(mass: &[f64]) -> Result<f64> {
        if mass.is_empty() {
            return Err(Error::EmptyStateSpace);
        }
        if let Some((index, &value)) = mass
            .iter()
            .enumerate()
            .find(|(_, m)| !m.is_finite() || **m < 0.0)
        {
            return Err(Error::InvalidMass { index, value });
        }
        Ok(mass.iter().sum())
    }

    fn rescaled(mut mass: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            mass.iter_mut().for_each(|m| *m /= sum);
        }
        Self { mass }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mass
    }

    /// Total-variation distance, `0.5 * ||p - q||_1`.
    pub fn total_variation(&self, other: &Self) -> f64 {
        0.5 * self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.mass[i]
    }
}

/// Coupling between a source and a target distribution, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    n: usize,
    flow: Vec<f64>,
    source: ProbabilityVector,
    target: ProbabilityVector,
}

impl TransportPlan {
    /// Wraps a flow matrix without checking feasibility; see [`verify_plan`].
    pub fn from_parts(
        flow: Vec<f64>,
        source: ProbabilityVector,
        target: ProbabilityVector,
    ) -> Result<Self> {
        let n = source.len();
        if target.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: target.len(),
            });
        }
        if flow.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: flow.len(),
            });
        }
        Ok(Self {
            n,
            flow,
            source,
            target,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.flow[i * self.n + j]
    }

    pub fn flow(&self) -> &[f64] {
        &self.flow
    }

    pub fn source(&self) -> &ProbabilityVector {
        &self.source
    }

    pub fn target(&self) -> &ProbabilityVector {
        &self.target
    }

    /// Total transport cost `<flow, cost>`.
    pub fn objective(&self, cost: &CostMatrix) -> f64 {
        self.flow
            .iter()
            .zip(cost.as_slice())
            .map(|(f, c)| f * c)
            .sum()
    }

    /// Largest absolute row-sum and column-sum deviations from the marginals.
    pub fn marginal_residuals(&self) -> (f64, f64) {
        let n = self.n;
        let row = (0..n)
            .map(|i| (self.flow[i * n..(i + 1) * n].iter().sum::<f64>() - self.source[i]).abs())
            .fold(0.0, f64::max);
        let col = (0..n)
            .map(|j| ((0..n).map(|i| self.flow[i * n + j]).sum::<f64>() - self.target[j]).abs())
            .fold(0.0, f64::max);
        (row, col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtMethod {
    Exact,
    Sinkhorn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OtSolverConfig {
    pub method: OtMethod,
    pub sinkhorn_reg: f64,
    pub sinkhorn_tol: f64,
    pub sinkhorn_max_iter: usize,
}

impl Default for OtSolverConfig {
    fn default() -> Self {
        Self {
            method: OtMethod::Exact,
            sinkhorn_reg: 0.05,
            sinkhorn_tol: 1e-6,
            sinkhorn_max_iter: 10_000,
        }
    }
}

impl OtSolverConfig {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn sinkhorn(reg: f64, tol: f64, max_iter: usize) -> Self {
        Self {
            method: OtMethod::Sinkhorn,
            sinkhorn_reg: reg,
            sinkhorn_tol: tol,
            sinkhorn_max_iter: max_iter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sinkhorn_reg > 0.0 && self.sinkhorn_reg.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sinkhorn_reg must be positive, got {}",
                self.sinkhorn_reg
            )));
        }
        if !(self.sinkhorn_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sinkhorn_tol must be positive, got {}",
                self.sinkhorn_tol
            )));
        }
        if self.sinkhorn_max_iter == 0 {
            return Err(Error::InvalidConfig(
                "sinkhorn_max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Optimal coupling of `source` and `target` under `cost`.
pub fn solve_ot(
    source: &ProbabilityVector,
    target: &ProbabilityVector,
    cost: &CostMatrix,
    config: &OtSolverConfig,
) -> Result<TransportPlan> {
    let n = cost.len();
    for len in [source.len(), target.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    config.validate()?;
    let flow = match config.method {
        OtMethod::Exact => {
            network_simplex::solve(source.as_slice(), target.as_slice(), cost.as_slice())?
        }
        OtMethod::Sinkhorn => sinkhorn::solve(
            source.as_slice(),
            target.as_slice(),
            cost.as_slice(),
            config.sinkhorn_reg,
            config.sinkhorn_tol,
            config.sinkhorn_max_iter,
        )?,
    };
    TransportPlan::from_parts(flow, source.clone(), target.clone())
}

/// `W_p = <plan, cost>^(1/p)`.
pub fn wasserstein_distance(plan: &TransportPlan, cost: &CostMatrix, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidExponent(p));
    }
    if plan.len() != cost.len() {
        return Err(Error::DimensionMismatch {
            expected: cost.len(),
            found: plan.len(),
        });
    }
    Ok(plan.objective(cost).max(0.0).powf(1.0 / p))
}

/// Checks nonnegativity and both marginal constraints within `tol`.
pub fn verify_plan(plan: &TransportPlan, tol: f64) -> bool {
    if plan.flow.iter().any(|&f| !f.is_finite() || f < -tol) {
        return false;
    }
    let (row, col) = plan.marginal_residuals();
    row <= tol && col <= tol
}
