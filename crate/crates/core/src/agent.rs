//! Tabular Q-learning with an optional optimal-transport shaping term.
//!
//! In `OtAssisted` mode the TD error of a transition `s -> s'` gains
//! `beta * T(s, s') * c(s, s')`, where `T` is the optimal plan moving the
//! policy's state distribution onto the risk distribution. Each pair's bonus
//! is consumed by its first use and restored only when the plan is recomputed
//! at the end of the episode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{Action, GridworldEnv};
use crate::ot::{
    solve_ot, wasserstein_distance, CostMatrix, OtSolverConfig, ProbabilityVector, TransportPlan,
};
use crate::policy::{
    empirical_distribution, greedy, induced_chain, stationary_distribution, StationaryConfig,
    StationaryMethod, VisitCounter,
};

/// Deterministic random stream driving exploration.
pub type ExplorationRng = ChaCha8Rng;

pub fn exploration_rng(seed: u64) -> ExplorationRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<[f64; 4]>,
    alpha: f64,
    gamma: f64,
}

impl QTable {
    pub fn zeros(n_states: usize, alpha: f64, gamma: f64) -> Self {
        Self {
            values: vec![[0.0; 4]; n_states],
            alpha,
            gamma,
        }
    }

    pub fn from_values(values: Vec<[f64; 4]>, alpha: f64, gamma: f64) -> Self {
        Self {
            values,
            alpha,
            gamma,
        }
    }

    pub fn n_states(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, state: usize) -> &[f64; 4] {
        &self.values[state]
    }

    pub fn get(&self, state: usize, action: Action) -> f64 {
        self.values[state][action.index()]
    }

    pub fn values(&self) -> &[[f64; 4]] {
        &self.values
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn greedy_action(&self, state: usize) -> Action {
        Action::from_index(greedy(&self.values[state])).unwrap()
    }

    pub fn max_value(&self, state: usize) -> f64 {
        self.values[state]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub decay: f64,
    #[serde(rename = "min")]
    pub minimum: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            initial: 1.0,
            decay: 0.995,
            minimum: 0.01,
        }
    }
}

impl EpsilonSchedule {
    /// Exploration rate for the zero-based `episode`.
    pub fn value(&self, episode: usize) -> f64 {
        let exp = i32::try_from(episode).unwrap_or(i32::MAX);
        (self.initial * self.decay.powi(exp)).max(self.minimum)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.initial)
            && self.decay > 0.0
            && self.decay <= 1.0
            && (0.0..=1.0).contains(&self.minimum)
            && self.minimum <= self.initial;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid epsilon schedule {self:?}"
            )))
        }
    }
}

/// Per-transition shaping bonuses `T(s, s') * c(s, s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapingTable {
    n: usize,
    bonus: Vec<f64>,
}

impl ShapingTable {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            bonus: vec![0.0; n * n],
        }
    }

    pub fn from_plan(plan: &TransportPlan, cost: &CostMatrix) -> Result<Self> {
        let mut table = Self::zeros(plan.len());
        table.rebuild(plan, cost)?;
        Ok(table)
    }

    /// Refills every entry from a fresh plan.
    pub fn rebuild(&mut self, plan: &TransportPlan, cost: &CostMatrix) -> Result<()> {
        if plan.len() != self.n || cost.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: plan.len(),
            });
        }
        for ((b, &f), &c) in self.bonus.iter_mut().zip(plan.flow()).zip(cost.as_slice()) {
            *b = (f * c).max(0.0);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, s: usize, s_next: usize) -> f64 {
        self.bonus[s * self.n + s_next]
    }

    /// Returns the bonus for `(s, s_next)` and zeroes it.
    pub fn take(&mut self, s: usize, s_next: usize) -> f64 {
        std::mem::take(&mut self.bonus[s * self.n + s_next])
    }

    pub fn max(&self) -> f64 {
        self.bonus.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    Baseline,
    OtAssisted,
}

impl AgentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentMode::Baseline => "baseline",
            AgentMode::OtAssisted => "ot_assisted",
        }
    }
}

impl std::str::FromStr for AgentMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(AgentMode::Baseline),
            "ot_assisted" | "ot" => Ok(AgentMode::OtAssisted),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for AgentMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    pub epsilon: EpsilonSchedule,
    pub mode: AgentMode,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.95,
            beta: 1.0,
            epsilon: EpsilonSchedule::default(),
            mode: AgentMode::OtAssisted,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "agent.alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "agent.gamma must be in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "agent.beta must be >= 0, got {}",
                self.beta
            )));
        }
        self.epsilon.validate()
    }

    /// Sensitivity actually applied in updates; baseline runs never shape.
    pub fn effective_beta(&self) -> f64 {
        match self.mode {
            AgentMode::Baseline => 0.0,
            AgentMode::OtAssisted => self.beta,
        }
    }
}

/// Epsilon-greedy action choice. Always draws one uniform from `rng`, plus
/// one more when exploring.
pub fn select_action(qtable: &QTable, state: usize, epsilon: f64, rng: &mut impl Rng) -> Action {
    let u: f64 = rng.gen();
    if u < epsilon {
        Action::from_index(rng.gen_range(0..Action::COUNT)).unwrap()
    } else {
        qtable.greedy_action(state)
    }
}

/// Shaped Q-learning update. Returns the bonus consumed from `shaping`.
#[allow(clippy::too_many_arguments)]
pub fn q_update(
    qtable: &mut QTable,
    s: usize,
    a: Action,
    r: f64,
    s_next: usize,
    terminal: bool,
    beta: f64,
    shaping: &mut ShapingTable,
) -> f64 {
    let target_max = if terminal {
        0.0
    } else {
        qtable.max_value(s_next)
    };
    let bonus = shaping.take(s, s_next);
    let q = &mut qtable.values[s][a.index()];
    *q += qtable.alpha * (r + qtable.gamma * target_max - *q + beta * bonus);
    bonus
}

/// One environment transition as seen by the learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub episode: usize,
    pub state: usize,
    pub action: Action,
    pub next_state: usize,
    pub reward: f64,
    pub collided: bool,
    /// Shaping bonus consumed by this update (before scaling by beta).
    pub bonus: f64,
}

/// Hook for instrumenting training.
pub trait StepObserver {
    fn on_step(&mut self, _event: &StepEvent) {}
    fn on_episode_end(&mut self, _record: &EpisodeRecord, _qtable: &QTable) {}
}

impl StepObserver for () {}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeStats {
    pub return_undiscounted: f64,
    pub return_discounted: f64,
    pub length: usize,
    pub collisions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub seed: u64,
    pub mode: AgentMode,
    #[serde(rename = "return")]
    pub return_undiscounted: f64,
    pub return_discounted: f64,
    pub length: usize,
    pub collisions: usize,
    pub epsilon: f64,
    pub wasserstein: f64,
}

/// Runs one episode from the start state, updating `qtable` and `visits`.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    env: &GridworldEnv,
    qtable: &mut QTable,
    config: &AgentConfig,
    episode: usize,
    epsilon: f64,
    shaping: &mut ShapingTable,
    rng: &mut impl Rng,
    visits: &mut VisitCounter,
    observer: &mut dyn StepObserver,
) -> Result<EpisodeStats> {
    let beta = config.effective_beta();
    let gamma = qtable.gamma;
    let mut stats = EpisodeStats::default();
    let mut discount = 1.0;
    let mut state = env.start();
    visits.record(state);
    while stats.length < env.max_steps() {
        let action = select_action(qtable, state, epsilon, rng);
        let out = env.step(state, action)?;
        let bonus = q_update(
            qtable,
            state,
            action,
            out.reward,
            out.next_state,
            out.terminal,
            beta,
            shaping,
        );
        observer.on_step(&StepEvent {
            episode,
            state,
            action,
            next_state: out.next_state,
            reward: out.reward,
            collided: out.collided,
            bonus,
        });
        stats.length += 1;
        stats.return_undiscounted += out.reward;
        stats.return_discounted += discount * out.reward;
        discount *= gamma;
        stats.collisions += usize::from(out.collided);
        visits.record(out.next_state);
        state = out.next_state;
        if out.terminal {
            break;
        }
    }
    Ok(stats)
}

/// Everything a training run needs besides the episode count.
#[derive(Debug, Clone)]
pub struct TrainSetup<'a> {
    pub env: &'a GridworldEnv,
    pub risk: &'a ProbabilityVector,
    pub cost: &'a CostMatrix,
    pub agent: AgentConfig,
    pub ot: OtSolverConfig,
    pub stationary: StationaryConfig,
    pub wasserstein_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub records: Vec<EpisodeRecord>,
    pub qtable: QTable,
}

/// Estimate of the policy's state distribution after an episode.
pub fn estimate_policy_distribution(
    env: &GridworldEnv,
    qtable: &QTable,
    visits: &VisitCounter,
    config: &StationaryConfig,
) -> Result<ProbabilityVector> {
    match config.method {
        StationaryMethod::Empirical => empirical_distribution(visits, config.smoothing),
        StationaryMethod::Power => {
            let chain = induced_chain(env, qtable)?;
            stationary_distribution(&chain, config.damping, config.tol, config.max_iter)
        }
    }
}

/// Trains from an all-zero Q-table. After every episode the policy
/// distribution is re-estimated and transported onto the risk distribution;
/// the resulting plan feeds the logged Wasserstein distance and, in
/// `OtAssisted` mode, the next episode's shaping table.
pub fn train(
    setup: &TrainSetup<'_>,
    episodes: usize,
    observer: &mut dyn StepObserver,
) -> Result<TrainOutcome> {
    let TrainSetup {
        env,
        risk,
        cost,
        agent,
        ot,
        stationary,
        wasserstein_p,
    } = setup;
    agent.validate()?;
    ot.validate()?;
    stationary.validate()?;
    if episodes == 0 {
        return Err(Error::InvalidConfig("episodes must be at least 1".into()));
    }
    let n = env.n_states();
    for len in [risk.len(), cost.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }

    let mut qtable = QTable::zeros(n, agent.alpha, agent.gamma);
    let mut shaping = ShapingTable::zeros(n);
    let mut rng = exploration_rng(agent.seed);
    let mut visits = VisitCounter::new(env.free_mask(), stationary.window);
    let mut records = Vec::with_capacity(episodes);

    for episode in 0..episodes {
        let epsilon = agent.epsilon.value(episode);
        visits.begin_episode();
        let stats = run_episode(
            env,
            &mut qtable,
            agent,
            episode,
            epsilon,
            &mut shaping,
            &mut rng,
            &mut visits,
            observer,
        )?;

        let policy_dist = estimate_policy_distribution(env, &qtable, &visits, stationary)?;
        let plan = solve_ot(&policy_dist, risk, cost, ot)?;
        let wasserstein = wasserstein_distance(&plan, cost, *wasserstein_p)?;
        if agent.mode == AgentMode::OtAssisted {
            shaping.rebuild(&plan, cost)?;
        }

        let record = EpisodeRecord {
            episode,
            seed: agent.seed,
            mode: agent.mode,
            return_undiscounted: stats.return_undiscounted,
            return_discounted: stats.return_discounted,
            length: stats.length,
            collisions: stats.collisions,
            epsilon,
            wasserstein,
        };
        observer.on_episode_end(&record, &qtable);
        records.push(record);
    }
    Ok(TrainOutcome { records, qtable })
}
