use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GameInstance, Player, STOCHASTIC_TOLERANCE};

/// A stationary Markov policy: `probs[x][a]` is the probability of the
/// `a`-th feasible action at state `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    pub player: Player,
    pub probs: Vec<Vec<f64>>,
}

impl StationaryPolicy {
    pub fn new(instance: &GameInstance, player: Player, probs: Vec<Vec<f64>>) -> Result<Self> {
        let policy = StationaryPolicy { player, probs };
        policy.check(instance)?;
        Ok(policy)
    }

    pub fn uniform(instance: &GameInstance, player: Player) -> Self {
        let probs = instance
            .actions(player)
            .iter()
            .map(|acts| vec![1.0 / acts.len() as f64; acts.len()])
            .collect();
        StationaryPolicy { player, probs }
    }

    /// Plays `choice[x]` with probability one at every state.
    pub fn deterministic(instance: &GameInstance, player: Player, choice: &[usize]) -> Result<Self> {
        let probs = instance
            .actions(player)
            .iter()
            .zip(choice)
            .map(|(acts, &c)| (0..acts.len()).map(|a| if a == c { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(instance, player, probs)
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.probs[x]
    }

    pub fn check(&self, instance: &GameInstance) -> Result<()> {
        let err = |message: String| Error::Policy {
            player: self.player.number(),
            message,
        };
        let acts = instance.actions(self.player);
        if self.probs.len() != acts.len() {
            return Err(err(format!(
                "expected {} states, found {}",
                acts.len(),
                self.probs.len()
            )));
        }
        for (x, (row, labels)) in self.probs.iter().zip(acts).enumerate() {
            if row.len() != labels.len() {
                return Err(err(format!(
                    "state {x}: expected {} actions, found {}",
                    labels.len(),
                    row.len()
                )));
            }
            if let Some(a) = row.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(err(format!("state {x}, action {a}: {} is not a probability", row[a])));
            }
            let mass: f64 = row.iter().sum();
            if (mass - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(err(format!("state {x}: probabilities sum to {mass}")));
            }
        }
        Ok(())
    }

    /// `(1 - weight) * self + weight * other`.
    pub fn mix(&self, other: &StationaryPolicy, weight: f64) -> StationaryPolicy {
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(r, s)| r.iter().zip(s).map(|(a, b)| (1.0 - weight) * a + weight * b).collect())
            .collect();
        StationaryPolicy {
            player: self.player,
            probs,
        }
    }

    /// Max-norm distance between two policy tables of the same shape.
    pub fn max_abs_diff(&self, other: &StationaryPolicy) -> f64 {
        self.probs
            .iter()
            .flatten()
            .zip(other.probs.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// File form of a policy profile: `pi1[x][a1]` and `pi2[x][a2]`, with optional
/// labels that must match the instance when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyProfile {
    pub pi1: Vec<Vec<f64>>,
    pub pi2: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions1: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions2: Option<Vec<Vec<String>>>,
}

impl PolicyProfile {
    /// A labelled profile for `instance`.
    pub fn from_policies(instance: &GameInstance, pi1: &StationaryPolicy, pi2: &StationaryPolicy) -> Self {
        PolicyProfile {
            pi1: pi1.probs.clone(),
            pi2: pi2.probs.clone(),
            states: Some(instance.states.clone()),
            actions1: Some(instance.actions1.clone()),
            actions2: Some(instance.actions2.clone()),
        }
    }

    /// Checks labels and stochasticity against `instance`.
    pub fn policies(&self, instance: &GameInstance) -> Result<(StationaryPolicy, StationaryPolicy)> {
        let mismatch = |field: &str| Error::shape(field, "labels do not match the instance");
        if self.states.as_ref().is_some_and(|s| *s != instance.states) {
            return Err(mismatch("states"));
        }
        if self.actions1.as_ref().is_some_and(|s| *s != instance.actions1) {
            return Err(mismatch("actions1"));
        }
        if self.actions2.as_ref().is_some_and(|s| *s != instance.actions2) {
            return Err(mismatch("actions2"));
        }
        Ok((
            StationaryPolicy::new(instance, Player::One, self.pi1.clone())?,
            StationaryPolicy::new(instance, Player::Two, self.pi2.clone())?,
        ))
    }
}

/// Serializes a policy as its bare `[state][action]` table.
pub fn serialize_table<S: serde::Serializer>(policy: &StationaryPolicy, s: S) -> std::result::Result<S::Ok, S::Error> {
    policy.probs.serialize(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::blank;

    #[test]
    fn uniform_and_deterministic_are_valid() {
        let g = blank(3, 2, 4);
        StationaryPolicy::uniform(&g, Player::Two).check(&g).unwrap();
        let d = StationaryPolicy::deterministic(&g, Player::One, &[0, 1, 1]).unwrap();
        assert_eq!(d.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_rows() {
        let g = blank(2, 2, 2);
        assert!(StationaryPolicy::new(&g, Player::One, vec![vec![0.5, 0.5]]).is_err());
        assert!(StationaryPolicy::new(&g, Player::One, vec![vec![0.5, 0.6], vec![1.0, 0.0]]).is_err());
        assert!(StationaryPolicy::new(&g, Player::One, vec![vec![1.5, -0.5], vec![1.0, 0.0]]).is_err());
        assert!(StationaryPolicy::new(&g, Player::One, vec![vec![1.0], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn mixing_stays_stochastic() {
        let g = blank(2, 3, 1);
        let a = StationaryPolicy::deterministic(&g, Player::One, &[0, 2]).unwrap();
        let b = StationaryPolicy::uniform(&g, Player::One);
        let m = a.mix(&b, 0.25);
        m.check(&g).unwrap();
        assert!((m.probs[0][0] - (0.75 + 0.25 / 3.0)).abs() < 1e-15);
        assert!((a.max_abs_diff(&m) - 0.25 * (1.0 - 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn profile_roundtrip_and_label_check() {
        let g = blank(2, 2, 3);
        let pi1 = StationaryPolicy::new(&g, Player::One, vec![vec![0.1, 0.9], vec![1.0 / 3.0, 2.0 / 3.0]]).unwrap();
        let pi2 = StationaryPolicy::uniform(&g, Player::Two);
        let text = serde_json::to_string(&PolicyProfile::from_policies(&g, &pi1, &pi2)).unwrap();
        let back: PolicyProfile = serde_json::from_str(&text).unwrap();
        let (q1, q2) = back.policies(&g).unwrap();
        assert_eq!(q1, pi1);
        assert_eq!(q2, pi2);

        let mut bad = back.clone();
        bad.states = Some(vec!["u".into(), "v".into()]);
        assert!(bad.policies(&g).is_err());
        let bare: PolicyProfile = serde_json::from_str(r#"{"pi2": [[1,0,0],[0,0,1]], "pi1": [[1,0],[0,1]]}"#).unwrap();
        assert!(bare.policies(&g).is_ok());
    }
}
