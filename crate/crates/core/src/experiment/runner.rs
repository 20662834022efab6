use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::convergence::ConvergenceRule;
use super::export::quantize;
use crate::agent::{train, AgentMode, EpisodeRecord, TrainSetup};
use crate::error::{Error, Result};
use crate::ot::build_cost_matrix;
use crate::risk::build_risk_distribution;

/// A (seed, mode) run that aborted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub seed: u64,
    pub mode: AgentMode,
    pub message: String,
}

/// Per-episode records of every completed run, ordered by seed, then mode,
/// then episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub records: Vec<EpisodeRecord>,
    pub failures: Vec<RunFailure>,
}

/// Trains both modes for every configured seed.
pub fn run_comparison(config: &ExperimentConfig) -> Result<ExperimentResults> {
    run_modes(config, &[AgentMode::Baseline, AgentMode::OtAssisted])
}

/// Trains the given modes for every configured seed. Runs execute in
/// parallel; a failing run is reported in `failures` without stopping others.
pub fn run_modes(config: &ExperimentConfig, modes: &[AgentMode]) -> Result<ExperimentResults> {
    config.validate()?;
    let env = config.build_env()?;
    let risk = build_risk_distribution(&env, &config.risk)?;
    let cost = build_cost_matrix(&env.state_coords())?;

    let jobs: Vec<(u64, AgentMode)> = config
        .train
        .seeds
        .iter()
        .flat_map(|&seed| modes.iter().map(move |&mode| (seed, mode)))
        .collect();

    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(seed, mode)| {
            let setup = TrainSetup {
                env: &env,
                risk: &risk,
                cost: &cost,
                agent: crate::agent::AgentConfig {
                    seed,
                    mode,
                    ..config.agent
                },
                ot: config.ot,
                stationary: config.stationary,
                wasserstein_p: config.train.wasserstein_p,
            };
            train(&setup, config.train.episodes, &mut ()).map_err(|e| Error::Run {
                context: format!("seed {seed}, mode {mode}"),
                source: Box::new(e),
            })
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (&(seed, mode), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(out) => records.extend(out.records),
            Err(e) => failures.push(RunFailure {
                seed,
                mode,
                message: e.to_string(),
            }),
        }
    }
    Ok(ExperimentResults {
        config: config.clone(),
        records,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub seeds: Vec<u64>,
    pub total_collisions: u64,
    pub convergence_episode: BTreeMap<u64, Option<usize>>,
    pub final_wasserstein_mean: f64,
    pub return_per_episode: SeriesStats,
    pub return_discounted_per_episode: SeriesStats,
    pub length_per_episode: SeriesStats,
    pub collisions_per_episode: SeriesStats,
    pub wasserstein_per_episode: SeriesStats,
}

/// Number of trailing episodes averaged for `final_wasserstein_mean`.
pub const FINAL_WASSERSTEIN_EPISODES: usize = 50;

/// Cross-seed statistics, computed from values as they appear in the CSV
/// export so the two always agree.
pub fn summarize(
    records: &[EpisodeRecord],
    rule: &ConvergenceRule,
) -> BTreeMap<AgentMode, ModeSummary> {
    let mut by_mode: BTreeMap<AgentMode, BTreeMap<u64, Vec<&EpisodeRecord>>> = BTreeMap::new();
    for r in records {
        by_mode
            .entry(r.mode)
            .or_default()
            .entry(r.seed)
            .or_default()
            .push(r);
    }
    by_mode
        .into_iter()
        .map(|(mode, runs)| {
            let series = |f: &dyn Fn(&EpisodeRecord) -> f64| -> Vec<Vec<f64>> {
                runs.values()
                    .map(|rs| rs.iter().map(|r| quantize(f(r))).collect())
                    .collect()
            };
            let returns = series(&|r| r.return_undiscounted);
            let wasserstein = series(&|r| r.wasserstein);
            let convergence_episode = runs
                .keys()
                .zip(&returns)
                .map(|(&seed, ret)| (seed, rule.detect(ret)))
                .collect();
            let finals: Vec<f64> = wasserstein
                .iter()
                .map(|w| {
                    let tail = &w[w.len().saturating_sub(FINAL_WASSERSTEIN_EPISODES)..];
                    tail.iter().sum::<f64>() / tail.len() as f64
                })
                .collect();
            let summary = ModeSummary {
                seeds: runs.keys().copied().collect(),
                total_collisions: runs.values().flatten().map(|r| r.collisions as u64).sum(),
                convergence_episode,
                final_wasserstein_mean: finals.iter().sum::<f64>() / finals.len() as f64,
                return_per_episode: series_stats(&returns),
                return_discounted_per_episode: series_stats(&series(&|r| r.return_discounted)),
                length_per_episode: series_stats(&series(&|r| r.length as f64)),
                collisions_per_episode: series_stats(&series(&|r| r.collisions as f64)),
                wasserstein_per_episode: series_stats(&wasserstein),
            };
            (mode, summary)
        })
        .collect()
}

/// Mean and sample standard deviation across runs, per episode. Runs of
/// unequal length are aggregated over the episodes they share.
pub fn series_stats(runs: &[Vec<f64>]) -> SeriesStats {
    let len = runs.iter().map(Vec::len).min().unwrap_or(0);
    let k = runs.len() as f64;
    let mut mean = Vec::with_capacity(len);
    let mut std = Vec::with_capacity(len);
    for e in 0..len {
        let m = runs.iter().map(|r| r[e]).sum::<f64>() / k;
        let var = if runs.len() > 1 {
            runs.iter().map(|r| (r[e] - m).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        mean.push(m);
        std.push(var.sqrt());
    }
    SeriesStats { mean, std }
}
