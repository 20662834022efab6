//! Risk-sensitive tabular Q-learning with an optimal-transport shaping term.
//!
//! The learner's state-visitation distribution is transported onto an expert
//! risk distribution after every episode; the resulting plan, weighted by the
//! ground cost, becomes a per-transition bonus in the next episode's
//! Q-learning updates.
//!
//! Modules:
//! - [`ot`]: cost matrices, exact (network simplex) and Sinkhorn solvers,
//!   Wasserstein distance.
//! - [`gridworld`]: the deterministic Gridworld MDP and its JSON layout format.
//! - [`risk`]: the adjacency-based safety distribution.
//! - [`policy`]: empirical and power-iteration estimates of the policy's
//!   state distribution.
//! - [`agent`]: Q-learning, the shaped update, and the training loop.
//! - [`experiment`]: multi-seed comparisons, aggregation and CSV/JSON export.

pub mod agent;
pub mod error;
pub mod experiment;
pub mod gridworld;
pub mod ot;
pub mod policy;
pub mod risk;

pub use error::{Error, Result};
