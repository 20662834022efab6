//! Test-only oracles, independent of the solver code paths they check.
#![allow(dead_code)]

use otq_core::agent::QTable;
use otq_core::gridworld::{Action, GridworldEnv};
use otq_core::policy::{
    empirical_distribution, induced_chain, stationary_distribution, VisitCounter, VisitWindow,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum transport cost by enumerating every basis of the transportation
/// polytope: each basic feasible solution is supported on a spanning tree of
/// the complete bipartite row/column graph, whose flows follow from peeling
/// leaves. Returns (objective, flow) of the best feasible basis.
pub fn brute_force_ot(source: &[f64], target: &[f64], cost: &[f64]) -> (f64, Vec<f64>) {
    let (m, n) = (source.len(), target.len());
    let cells = m * n;
    let k = m + n - 1;
    let mut best = (f64::INFINITY, Vec::new());
    let mut chosen: Vec<usize> = (0..k).collect();
    loop {
        if let Some(flow) = tree_flow(&chosen, source, target) {
            let obj: f64 = flow.iter().zip(cost).map(|(f, c)| f * c).sum();
            if obj < best.0 {
                best = (obj, flow);
            }
        }
        // next k-combination of 0..cells
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if chosen[i] != i + cells - k {
                break;
            }
            if i == 0 {
                return best;
            }
        }
        chosen[i] += 1;
        for j in i + 1..k {
            chosen[j] = chosen[j - 1] + 1;
        }
    }
}

fn tree_flow(cells: &[usize], source: &[f64], target: &[f64]) -> Option<Vec<f64>> {
    let (m, n) = (source.len(), target.len());
    // node ids: rows 0..m, columns m..m+n
    let mut residual: Vec<f64> = source.iter().chain(target).copied().collect();
    let mut degree = vec![0usize; m + n];
    let ends: Vec<(usize, usize)> = cells.iter().map(|&c| (c / n, m + c % n)).collect();
    for &(r, c) in &ends {
        degree[r] += 1;
        degree[c] += 1;
    }
    let mut solved = vec![false; cells.len()];
    let mut flow = vec![0.0; m * n];
    for _ in 0..cells.len() {
        // a leaf: node with exactly one unsolved incident cell
        let leaf = (0..m + n).find(|&v| degree[v] == 1)?;
        let e =
            (0..cells.len()).find(|&e| !solved[e] && (ends[e].0 == leaf || ends[e].1 == leaf))?;
        let (r, c) = ends[e];
        let value = residual[leaf];
        flow[cells[e]] = value;
        residual[r] -= value;
        residual[c] -= value;
        solved[e] = true;
        degree[r] -= 1;
        degree[c] -= 1;
    }
    // peeling consumed every cell, so the support is a spanning tree
    if residual.iter().any(|r| r.abs() > 1e-12) || flow.iter().any(|&f| f < -1e-12) {
        return None;
    }
    Some(flow)
}

/// Random probability vector; roughly one entry in four is zeroed.
pub fn random_distribution(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.25) {
                    0.0
                } else {
                    rng.gen::<f64>()
                }
            })
            .collect();
        let s: f64 = w.iter().sum();
        if s > 0.0 {
            return w.iter().map(|x| x / s).collect();
        }
    }
}

/// Squared Euclidean distances between random points in the unit square.
pub fn random_cost_rows(rng: &mut impl Rng, n: usize) -> Vec<Vec<f64>> {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
    pts.iter()
        .map(|a| {
            pts.iter()
                .map(|b| (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2))
                .collect()
        })
        .collect()
}

/// Random row-stochastic matrix with strictly positive entries.
pub fn random_chain(rng: &mut impl Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let s: f64 = w.iter().sum();
            w.iter().map(|x| x / s).collect()
        })
        .collect()
}

/// Stationary distribution by Gaussian elimination on `v^T (M - I) = 0`,
/// `sum v = 1`.
pub fn stationary_by_linear_solve(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    // A v = b with A = (M^T - I), last equation replaced by normalization
    let mut a = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = rows[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[n - 1][j] = 1.0;
    }
    a[n - 1][n] = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

pub fn corridor(len: i64, start: i64) -> GridworldEnv {
    GridworldEnv::from_json(&format!(
        r#"{{"width":{len},"height":1,"start":[{start},0],"goal":[{},0]}}"#,
        len - 1
    ))
    .unwrap()
}

pub fn prefer(env: &GridworldEnv, action: Action) -> QTable {
    let mut values = vec![[0.0; 4]; env.n_states()];
    for row in &mut values {
        row[action.index()] = 1.0;
    }
    QTable::from_values(values, 0.1, 0.95)
}

/// Visit counts of a greedy rollout that restarts at the goal, simulated
/// directly on the environment rather than through the induced chain. With
/// probability `damping` a step jumps to a uniformly chosen free cell instead.
pub fn rollout_counts(
    env: &GridworldEnv,
    q: &QTable,
    steps: usize,
    damping: f64,
    seed: u64,
) -> Vec<u64> {
    let free: Vec<usize> = (0..env.n_states())
        .filter(|&s| !env.is_obstacle(s))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0; env.n_states()];
    let mut s = env.start();
    counts[s] += 1;
    for _ in 0..steps {
        s = if rng.gen::<f64>() < damping {
            free[rng.gen_range(0..free.len())]
        } else if s == env.goal() {
            env.start()
        } else {
            env.step(s, q.greedy_action(s)).unwrap().next_state
        };
        counts[s] += 1;
    }
    counts
}

/// Corridors whose constant greedy policy reaches the goal: (length, start, action).
pub const CORRIDORS: [(i64, i64, Action); 5] = [
    (3, 0, Action::Right),
    (6, 0, Action::Right),
    (7, 2, Action::Right),
    (5, 3, Action::Right),
    (6, 4, Action::Left),
];

/// Total variation between the empirical estimate of a 10,000-step damped
/// rollout and the power-iteration stationary distribution (damping 0.05).
pub fn corridor_tv(len: i64, start: i64, action: Action, seed: u64) -> f64 {
    let env = corridor(len, start);
    let q = prefer(&env, action);
    let counts = rollout_counts(&env, &q, 10_000, 0.05, seed);
    let counter =
        VisitCounter::from_counts(counts, env.free_mask(), VisitWindow::AllEpisodes).unwrap();
    let empirical = empirical_distribution(&counter, 0.0).unwrap();
    let chain = induced_chain(&env, &q).unwrap();
    let exact = stationary_distribution(&chain, 0.05, 1e-8, 10_000).unwrap();
    empirical.total_variation(&exact)
}
