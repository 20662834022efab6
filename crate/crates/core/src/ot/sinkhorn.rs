//! Log-domain Sinkhorn iterations for entropic-regularized transport.

use crate::error::{Error, Result};

const MASS_FLOOR: f64 = 1e-12;

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn floored(mass: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = mass.iter().map(|&m| m.max(MASS_FLOOR)).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|m| *m /= total);
    out
}

/// Runs Sinkhorn until the row-marginal L1 violation drops to `tol`, then
/// rounds the plan onto the exact marginals `supply` and `demand`.
pub(crate) fn solve(
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
    reg: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let (rows, cols) = (supply.len(), demand.len());
    let a = floored(supply);
    let b = floored(demand);
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();

    let mut f = vec![0.0; rows];
    let mut g = vec![0.0; cols];
    let mut violation = f64::INFINITY;
    let mut converged = false;

    for _ in 0..max_iter {
        for i in 0..rows {
            let row = &cost[i * cols..(i + 1) * cols];
            f[i] = reg * log_a[i] - reg * log_sum_exp((0..cols).map(|j| (g[j] - row[j]) / reg));
        }
        for j in 0..cols {
            g[j] = reg * log_b[j]
                - reg * log_sum_exp((0..rows).map(|i| (f[i] - cost[i * cols + j]) / reg));
        }
        // columns are exact after the g-update; rows carry the residual
        violation = (0..rows)
            .map(|i| {
                let row = &cost[i * cols..(i + 1) * cols];
                let s: f64 = (0..cols)
                    .map(|j| ((f[i] + g[j] - row[j]) / reg).exp())
                    .sum();
                (s - a[i]).abs()
            })
            .sum();
        if violation <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SinkhornNotConverged {
            iterations: max_iter,
            violation,
        });
    }

    let mut plan = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            plan[i * cols + j] = ((f[i] + g[j] - cost[i * cols + j]) / reg).exp();
        }
    }
    round_to_marginals(&mut plan, supply, demand);
    Ok(plan)
}

/// Projects a nonnegative matrix onto the transport polytope of the given
/// marginals: scale rows and columns down to fit, then distribute the
/// remaining deficit as a rank-one correction.
pub(crate) fn round_to_marginals(plan: &mut [f64], supply: &[f64], demand: &[f64]) {
    let (rows, cols) = (supply.len(), demand.len());
    for i in 0..rows {
        let row = &mut plan[i * cols..(i + 1) * cols];
        let s: f64 = row.iter().sum();
        if s > supply[i] {
            let scale = if s > 0.0 { supply[i] / s } else { 0.0 };
            row.iter_mut().for_each(|x| *x *= scale);
        }
    }
    for j in 0..cols {
        let s: f64 = (0..rows).map(|i| plan[i * cols + j]).sum();
        if s > demand[j] {
            let scale = if s > 0.0 { demand[j] / s } else { 0.0 };
            (0..rows).for_each(|i| plan[i * cols + j] *= scale);
        }
    }
    let row_err: Vec<f64> = (0..rows)
        .map(|i| (supply[i] - plan[i * cols..(i + 1) * cols].iter().sum::<f64>()).max(0.0))
        .collect();
    let col_err: Vec<f64> = (0..cols)
        .map(|j| (demand[j] - (0..rows).map(|i| plan[i * cols + j]).sum::<f64>()).max(0.0))
        .collect();
    let total: f64 = row_err.iter().sum();
    if total > 0.0 {
        for i in 0..rows {
            for j in 0..cols {
                plan[i * cols + j] += row_err[i] * col_err[j] / total;
            }
        }
    }
}
