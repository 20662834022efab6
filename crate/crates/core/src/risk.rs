//! Expert safety-preference distribution over Gridworld states.
//!
//! Every free cell starts at `base_safety` and loses `adjacency_penalty` for
//! each of its four neighbours that is off-grid or an obstacle, floored at
//! `floor`. The goal is pinned to `goal_safety`, obstacles get zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::GridworldEnv;
use crate::ot::ProbabilityVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskSpec {
    pub base_safety: f64,
    pub adjacency_penalty: f64,
    pub goal_safety: f64,
    pub floor: f64,
}

impl Default for RiskSpec {
    fn default() -> Self {
        Self {
            base_safety: 1.0,
            adjacency_penalty: 0.3,
            goal_safety: 1.0,
            floor: 0.05,
        }
    }
}

impl RiskSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.base_safety > 0.0
            && self.adjacency_penalty >= 0.0
            && self.floor > 0.0
            && self.goal_safety >= 0.0
            && [
                self.base_safety,
                self.adjacency_penalty,
                self.goal_safety,
                self.floor,
            ]
            .iter()
            .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid risk spec {self:?}")))
        }
    }
}

/// Number of border or obstacle cells among the four neighbours of `state`.
pub fn hazard_adjacency(env: &GridworldEnv, state: usize) -> usize {
    env.neighbours(state)
        .iter()
        .filter(|n| n.is_none_or(|s| env.is_obstacle(s)))
        .count()
}

/// Unnormalized safety value of one state.
pub fn raw_safety(env: &GridworldEnv, spec: &RiskSpec, state: usize) -> Result<f64> {
    if state >= env.n_states() {
        return Err(Error::InvalidState {
            state,
            reason: "out of range",
        });
    }
    if state == env.goal() {
        return Ok(spec.goal_safety);
    }
    if env.is_obstacle(state) {
        return Ok(0.0);
    }
    let k = hazard_adjacency(env, state) as f64;
    Ok((spec.base_safety - spec.adjacency_penalty * k).max(spec.floor))
}

/// Normalized risk distribution `P^s`.
pub fn build_risk_distribution(env: &GridworldEnv, spec: &RiskSpec) -> Result<ProbabilityVector> {
    spec.validate()?;
    let raw = (0..env.n_states())
        .map(|s| raw_safety(env, spec, s))
        .collect::<Result<Vec<_>>>()?;
    ProbabilityVector::from_weights(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn env(json: &str) -> GridworldEnv {
        GridworldEnv::from_json(json).unwrap()
    }

    #[test]
    fn interior_corner_and_goal_values() {
        let env = GridworldEnv::canonical();
        let spec = RiskSpec::default();
        // (7, 3) has no hazardous neighbours in the shipped layout
        let interior = env.index_of((7, 3)).unwrap();
        assert_eq!(hazard_adjacency(&env, interior), 0);
        assert_eq!(raw_safety(&env, &spec, interior).unwrap(), 1.0);
        assert_abs_diff_eq!(
            raw_safety(&env, &spec, env.start()).unwrap(),
            0.4,
            epsilon = 1e-12
        );
        assert_eq!(raw_safety(&env, &spec, env.goal()).unwrap(), 1.0);
        assert_eq!(
            raw_safety(&env, &spec, env.index_of((6, 6)).unwrap()).unwrap(),
            0.0
        );
        assert!(raw_safety(&env, &spec, 225).is_err());
    }

    #[test]
    fn floor_applies_to_enclosed_cells() {
        // centre cell is boxed in by obstacles on all four sides
        let e = env(
            r#"{"width":3,"height":3,"obstacles":[[1,0],[0,1],[2,1],[1,2]],"start":[1,1],"goal":[0,0]}"#,
        );
        assert_eq!(raw_safety(&e, &RiskSpec::default(), 4).unwrap(), 0.05);
    }

    #[test]
    fn two_cell_corridor() {
        // left cell: three border sides -> 1 - 0.9 = 0.1; goal -> 1.0
        let e = env(r#"{"width":2,"height":1,"start":[0,0],"goal":[1,0]}"#);
        let p = build_risk_distribution(&e, &RiskSpec::default()).unwrap();
        assert_abs_diff_eq!(p[0], 0.1 / 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 1.0 / 1.1, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_tie_gives_equal_mass() {
        let e = env(r#"{"width":2,"height":1,"start":[0,0],"goal":[1,0]}"#);
        let spec = RiskSpec {
            goal_safety: 0.1,
            ..RiskSpec::default()
        };
        let p = build_risk_distribution(&e, &spec).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn canonical_distribution_is_normalized_with_empty_obstacles() {
        let env = GridworldEnv::canonical();
        let p = build_risk_distribution(&env, &RiskSpec::default()).unwrap();
        assert_abs_diff_eq!(p.as_slice().iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        for s in 0..env.n_states() {
            if env.is_obstacle(s) {
                assert_eq!(p[s], 0.0);
            } else {
                assert!(p[s] > 0.0);
            }
        }
    }

    #[test]
    fn monotone_in_hazard_count() {
        let env = GridworldEnv::canonical();
        let p = build_risk_distribution(&env, &RiskSpec::default()).unwrap();
        let free: Vec<usize> = (0..env.n_states())
            .filter(|&s| !env.is_obstacle(s) && s != env.goal())
            .collect();
        for &a in &free {
            for &b in &free {
                if hazard_adjacency(&env, a) > hazard_adjacency(&env, b) {
                    assert!(p[a] <= p[b]);
                }
            }
        }
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let env = GridworldEnv::canonical();
        let spec = RiskSpec {
            floor: 0.0,
            ..RiskSpec::default()
        };
        assert!(matches!(
            build_risk_distribution(&env, &spec),
            Err(Error::InvalidConfig(_))
        ));
    }
}
