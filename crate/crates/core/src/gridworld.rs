//! Deterministic Gridworld MDP.
//!
//! States are the row-major cell indices `y * width + x`, obstacle cells
//! included. `Up` decreases `y`. Moving into an obstacle leaves the agent in
//! place with the obstacle reward; moving off the grid is a no-op with the
//! ordinary step reward.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Coord = (i64, i64);

/// Layout shipped with the crate and used by the experiment defaults.
pub const CANONICAL_LAYOUT: &str = include_str!("../layouts/canonical_15x15.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl Action {
    pub const COUNT: usize = 4;
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn delta(self) -> Coord {
        match self {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rewards {
    pub step: f64,
    pub obstacle: f64,
    pub goal: f64,
}

impl Default for Rewards {
    fn default() -> Self {
        Self {
            step: -1.0,
            obstacle: -10.0,
            goal: 10.0,
        }
    }
}

pub const DEFAULT_MAX_STEPS: usize = 500;

/// JSON environment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvDescription {
    pub width: i64,
    pub height: i64,
    #[serde(default)]
    pub obstacles: Vec<[i64; 2]>,
    pub start: [i64; 2],
    pub goal: [i64; 2],
    #[serde(default)]
    pub rewards: Rewards,
    #[serde(default)]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: usize,
    pub reward: f64,
    pub terminal: bool,
    pub collided: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridworldEnv {
    width: usize,
    height: usize,
    obstacle_mask: Vec<bool>,
    start: usize,
    goal: usize,
    rewards: Rewards,
    max_steps: usize,
}

/// Validates a description into an environment.
pub fn load_env(desc: &EnvDescription) -> Result<GridworldEnv> {
    if desc.width <= 0 || desc.height <= 0 {
        return Err(Error::InvalidEnv(format!(
            "width and height must be positive, got {}x{}",
            desc.width, desc.height
        )));
    }
    let (width, height) = (desc.width as usize, desc.height as usize);
    let inside = |[x, y]: [i64; 2]| x >= 0 && y >= 0 && x < desc.width && y < desc.height;
    let index = |[x, y]: [i64; 2]| y as usize * width + x as usize;

    let mut obstacle_mask = vec![false; width * height];
    let mut seen = BTreeSet::new();
    for &cell in &desc.obstacles {
        if !inside(cell) {
            return Err(Error::InvalidEnv(format!(
                "obstacle {cell:?} lies outside the grid"
            )));
        }
        if !seen.insert(cell) {
            return Err(Error::InvalidEnv(format!("duplicate obstacle {cell:?}")));
        }
        obstacle_mask[index(cell)] = true;
    }
    for (name, cell) in [("start", desc.start), ("goal", desc.goal)] {
        if !inside(cell) {
            return Err(Error::InvalidEnv(format!(
                "{name} {cell:?} lies outside the grid"
            )));
        }
        if obstacle_mask[index(cell)] {
            return Err(Error::InvalidEnv(format!(
                "{name} {cell:?} is on an obstacle"
            )));
        }
    }
    if desc.start == desc.goal {
        return Err(Error::InvalidEnv("start and goal coincide".into()));
    }
    let max_steps = desc.max_steps.unwrap_or(DEFAULT_MAX_STEPS);
    if max_steps == 0 {
        return Err(Error::InvalidEnv("max_steps must be positive".into()));
    }
    let r = desc.rewards;
    if ![r.step, r.obstacle, r.goal].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidEnv("rewards must be finite".into()));
    }
    Ok(GridworldEnv {
        width,
        height,
        obstacle_mask,
        start: index(desc.start),
        goal: index(desc.goal),
        rewards: desc.rewards,
        max_steps,
    })
}

impl GridworldEnv {
    pub fn from_json(json: &str) -> Result<Self> {
        load_env(&serde_json::from_str(json)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The shipped 15x15 layout.
    pub fn canonical() -> Self {
        Self::from_json(CANONICAL_LAYOUT).expect("shipped layout is valid")
    }

    pub fn description(&self) -> EnvDescription {
        let cell = |s: usize| {
            let (x, y) = self.coords(s);
            [x, y]
        };
        EnvDescription {
            width: self.width as i64,
            height: self.height as i64,
            obstacles: (0..self.n_states())
                .filter(|&s| self.obstacle_mask[s])
                .map(cell)
                .collect(),
            start: cell(self.start),
            goal: cell(self.goal),
            rewards: self.rewards,
            max_steps: Some(self.max_steps),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_states(&self) -> usize {
        self.width * self.height
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn rewards(&self) -> Rewards {
        self.rewards
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps.max(1);
        self
    }

    pub fn is_obstacle(&self, state: usize) -> bool {
        self.obstacle_mask[state]
    }

    /// Non-obstacle mask over the state index space.
    pub fn free_mask(&self) -> Vec<bool> {
        self.obstacle_mask.iter().map(|&o| !o).collect()
    }

    pub fn coords(&self, state: usize) -> Coord {
        ((state % self.width) as i64, (state / self.width) as i64)
    }

    /// Index of an in-grid coordinate.
    pub fn index_of(&self, (x, y): Coord) -> Option<usize> {
        (x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height)
            .then(|| y as usize * self.width + x as usize)
    }

    /// The four von-Neumann neighbours of `state`; `None` marks off-grid.
    pub fn neighbours(&self, state: usize) -> [Option<usize>; 4] {
        let (x, y) = self.coords(state);
        Action::ALL.map(|a| {
            let (dx, dy) = a.delta();
            self.index_of((x + dx, y + dy))
        })
    }

    /// All coordinates in state-index order.
    pub fn state_coords(&self) -> Vec<Coord> {
        (0..self.n_states()).map(|s| self.coords(s)).collect()
    }

    pub fn step(&self, state: usize, action: Action) -> Result<StepOutcome> {
        if state >= self.n_states() {
            return Err(Error::InvalidState {
                state,
                reason: "out of range",
            });
        }
        if self.obstacle_mask[state] {
            return Err(Error::InvalidState {
                state,
                reason: "obstacle cell",
            });
        }
        if state == self.goal {
            return Err(Error::InvalidState {
                state,
                reason: "goal is terminal",
            });
        }
        let outcome = match self.neighbours(state)[action.index()] {
            Some(next) if next == self.goal => StepOutcome {
                next_state: next,
                reward: self.rewards.goal,
                terminal: true,
                collided: false,
            },
            Some(next) if self.obstacle_mask[next] => StepOutcome {
                next_state: state,
                reward: self.rewards.obstacle,
                terminal: false,
                collided: true,
            },
            Some(next) => StepOutcome {
                next_state: next,
                reward: self.rewards.step,
                terminal: false,
                collided: false,
            },
            None => StepOutcome {
                next_state: state,
                reward: self.rewards.step,
                terminal: false,
                collided: false,
            },
        };
        Ok(outcome)
    }
}
