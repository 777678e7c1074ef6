//! Discounted occupation measures of stationary policy profiles.
//!
//! For a profile `(pi1, pi2)` the state marginal solves
//! `mu_X = (1 - beta) eta + beta mu_X P`, where `P` is the state kernel induced
//! by the profile, and the full measure factors as
//! `mu(x, a1, a2) = mu_X(x) pi1(a1 | x) pi2(a2 | x)`. Payoffs and constraint
//! values are integrals of the additive components against the two
//! state-action marginals.

mod policy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{assemble_kernel, GameInstance, Player};
use crate::numerics::solve_linear;

pub use policy::{serialize_table, PolicyProfile, StationaryPolicy};

/// States with marginal mass at or below this value are treated as unvisited.
pub const ZERO_MASS: f64 = 1e-12;

/// State-to-state kernel `P[x][y]`.
pub type StateKernel = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationMeasure {
    /// `joint[x][a1][a2]`
    pub joint: Vec<Vec<Vec<f64>>>,
    pub state: Vec<f64>,
    /// `marginal1[x][a1]`
    pub marginal1: Vec<Vec<f64>>,
    /// `marginal2[x][a2]`
    pub marginal2: Vec<Vec<f64>>,
}

impl OccupationMeasure {
    /// Builds the cached marginals from a joint table.
    pub fn from_joint(joint: Vec<Vec<Vec<f64>>>) -> Self {
        let marginal1: Vec<Vec<f64>> = joint
            .iter()
            .map(|by_a1| by_a1.iter().map(|row| row.iter().sum()).collect())
            .collect();
        let marginal2: Vec<Vec<f64>> = joint
            .iter()
            .map(|by_a1| {
                let n2 = by_a1.first().map_or(0, Vec::len);
                (0..n2).map(|a2| by_a1.iter().map(|row| row[a2]).sum()).collect()
            })
            .collect();
        let state = marginal1.iter().map(|r| r.iter().sum()).collect();
        OccupationMeasure {
            joint,
            state,
            marginal1,
            marginal2,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.state.iter().sum()
    }

    pub fn marginal(&self, player: Player) -> MarginalMeasure {
        let table = match player {
            Player::One => self.marginal1.clone(),
            Player::Two => self.marginal2.clone(),
        };
        MarginalMeasure::new(player, table)
    }

    fn marginal_table(&self, player: Player) -> &[Vec<f64>] {
        match player {
            Player::One => &self.marginal1,
            Player::Two => &self.marginal2,
        }
    }

    fn check(&self, instance: &GameInstance) -> Result<()> {
        let nx = instance.n_states();
        let bad = |m: String| Err(Error::InvalidArgument(format!("occupation measure: {m}")));
        if self.joint.len() != nx || self.state.len() != nx {
            return bad(format!("expected {nx} states"));
        }
        for x in 0..nx {
            let (n1, n2) = (instance.actions1[x].len(), instance.actions2[x].len());
            if self.joint[x].len() != n1
                || self.joint[x].iter().any(|r| r.len() != n2)
                || self.marginal1[x].len() != n1
                || self.marginal2[x].len() != n2
            {
                return bad(format!("action dimensions disagree at state {x}"));
            }
        }
        Ok(())
    }
}

/// A single player's state-action marginal `gamma(x, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalMeasure {
    pub player: Player,
    pub table: Vec<Vec<f64>>,
    pub state: Vec<f64>,
}

impl MarginalMeasure {
    pub fn new(player: Player, table: Vec<Vec<f64>>) -> Self {
        let state = table.iter().map(|r| r.iter().sum()).collect();
        MarginalMeasure {
            player,
            table,
            state,
        }
    }

    /// Builds `state ⊗ policy`.
    pub fn product(state: &[f64], policy: &StationaryPolicy) -> Self {
        let table = state
            .iter()
            .zip(&policy.probs)
            .map(|(m, row)| row.iter().map(|p| m * p).collect())
            .collect();
        MarginalMeasure::new(policy.player, table)
    }

    pub fn total_mass(&self) -> f64 {
        self.state.iter().sum()
    }

    /// `(1 - weight) * self + weight * other`.
    pub fn mix(&self, other: &MarginalMeasure, weight: f64) -> MarginalMeasure {
        let table = self
            .table
            .iter()
            .zip(&other.table)
            .map(|(r, s)| r.iter().zip(s).map(|(a, b)| (1.0 - weight) * a + weight * b).collect())
            .collect();
        MarginalMeasure::new(self.player, table)
    }

    pub fn max_abs_diff(&self, other: &MarginalMeasure) -> f64 {
        self.table
            .iter()
            .flatten()
            .zip(other.table.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_profile(instance: &GameInstance, pi1: &StationaryPolicy, pi2: &StationaryPolicy) -> Result<()> {
    if pi1.player != Player::One || pi2.player != Player::Two {
        return Err(Error::InvalidArgument(
            "profile must list player 1's policy first".into(),
        ));
    }
    pi1.check(instance)?;
    pi2.check(instance)
}

/// `P(y | x) = sum_{a1,a2} Q(y | x, a1, a2) pi1(a1 | x) pi2(a2 | x)`.
///
/// Computed through the additive split: the double sum collapses to
/// `sum_a1 pi1 q1 + sum_a2 pi2 q2` because each policy row sums to one.
pub fn kernel_under_profile(
    instance: &GameInstance,
    pi1: &StationaryPolicy,
    pi2: &StationaryPolicy,
) -> Result<StateKernel> {
    check_profile(instance, pi1, pi2)?;
    let nx = instance.n_states();
    Ok((0..nx)
        .map(|x| {
            (0..nx)
                .map(|y| {
                    let from1: f64 = pi1.probs[x].iter().zip(&instance.q1[y][x]).map(|(p, q)| p * q).sum();
                    let from2: f64 = pi2.probs[x].iter().zip(&instance.q2[y][x]).map(|(p, q)| p * q).sum();
                    from1 + from2
                })
                .collect()
        })
        .collect())
}

/// Solves `(I - beta P^T) m = (1 - beta) eta`.
pub(crate) fn discounted_state_distribution(beta: f64, eta: &[f64], kernel: &StateKernel) -> Result<Vec<f64>> {
    let nx = eta.len();
    let a: Vec<Vec<f64>> = (0..nx)
        .map(|y| {
            (0..nx)
                .map(|x| if x == y { 1.0 } else { 0.0 } - beta * kernel[x][y])
                .collect()
        })
        .collect();
    let b: Vec<f64> = eta.iter().map(|e| (1.0 - beta) * e).collect();
    let m = solve_linear(&a, &b)?;
    Ok(m.into_iter().map(|v| v.max(0.0)).collect())
}

/// State marginal of the occupation measure of `(pi1, pi2)`.
pub fn occupation_x_marginal(
    instance: &GameInstance,
    pi1: &StationaryPolicy,
    pi2: &StationaryPolicy,
) -> Result<Vec<f64>> {
    let kernel = kernel_under_profile(instance, pi1, pi2)?;
    discounted_state_distribution(instance.beta, &instance.eta, &kernel)
}

/// Occupation measure in product form `mu_X(x) pi1(a1 | x) pi2(a2 | x)`.
pub fn occupation_measure(
    instance: &GameInstance,
    pi1: &StationaryPolicy,
    pi2: &StationaryPolicy,
) -> Result<OccupationMeasure> {
    let state = occupation_x_marginal(instance, pi1, pi2)?;
    let joint: Vec<Vec<Vec<f64>>> = state
        .iter()
        .enumerate()
        .map(|(x, m)| {
            pi1.probs[x]
                .iter()
                .map(|p1| pi2.probs[x].iter().map(|p2| m * p1 * p2).collect())
                .collect()
        })
        .collect();
    let marginal1 = state
        .iter()
        .zip(&pi1.probs)
        .map(|(m, row)| row.iter().map(|p| m * p).collect())
        .collect();
    let marginal2 = state
        .iter()
        .zip(&pi2.probs)
        .map(|(m, row)| row.iter().map(|p| m * p).collect())
        .collect();
    Ok(OccupationMeasure {
        joint,
        state,
        marginal1,
        marginal2,
    })
}

fn integrate(table: &[Vec<f64>], measure: &[Vec<f64>]) -> f64 {
    table
        .iter()
        .zip(measure)
        .map(|(r, m)| r.iter().zip(m).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

fn integrate_vector(table: &[Vec<Vec<f64>>], measure: &[Vec<f64>], p: usize) -> Vec<f64> {
    (0..p)
        .map(|k| {
            table
                .iter()
                .zip(measure)
                .map(|(r, m)| r.iter().zip(m).map(|(c, w)| c[k] * w).sum::<f64>())
                .sum()
        })
        .collect()
}

/// Expected discounted payoff `R_i`, normalized by `1 - beta`.
pub fn payoff(instance: &GameInstance, mu: &OccupationMeasure, player: Player) -> Result<f64> {
    mu.check(instance)?;
    let t = instance.tables(player);
    Ok(integrate(t.own_reward, mu.marginal_table(player))
        + integrate(t.opp_reward, mu.marginal_table(player.opponent())))
}

/// Constraint vector `C_i` in `R^p`.
pub fn constraint_value(instance: &GameInstance, mu: &OccupationMeasure, player: Player) -> Result<Vec<f64>> {
    mu.check(instance)?;
    let t = instance.tables(player);
    let own = integrate_vector(t.own_constraint, mu.marginal_table(player), instance.p);
    let opp = integrate_vector(t.opp_constraint, mu.marginal_table(player.opponent()), instance.p);
    Ok(own.iter().zip(&opp).map(|(a, b)| a + b).collect())
}

/// Recovers the policy `pi` with `gamma = gamma_X ⊗ pi`.
///
/// States whose marginal mass is at most [`ZERO_MASS`] get the uniform row.
pub fn disintegrate(gamma: &MarginalMeasure, instance: &GameInstance, player: Player) -> Result<StationaryPolicy> {
    let acts = instance.actions(player);
    if gamma.player != player || gamma.table.len() != acts.len() {
        return Err(Error::Policy {
            player: player.number(),
            message: "marginal does not match the player's state-action space".into(),
        });
    }
    let probs = gamma
        .table
        .iter()
        .zip(acts)
        .enumerate()
        .map(|(x, (row, labels))| {
            if row.len() != labels.len() {
                return Err(Error::Policy {
                    player: player.number(),
                    message: format!("marginal row {x} has {} actions", row.len()),
                });
            }
            let clipped: Vec<f64> = row.iter().map(|v| v.max(0.0)).collect();
            let mass: f64 = clipped.iter().sum();
            Ok(if mass > ZERO_MASS {
                clipped.into_iter().map(|v| v / mass).collect()
            } else {
                vec![1.0 / labels.len() as f64; labels.len()]
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StationaryPolicy { player, probs })
}

/// Direct summation of the first `horizon + 1` terms of the defining series,
/// propagating the state distribution through the full joint kernel.
pub fn truncated_series_oracle(
    instance: &GameInstance,
    pi1: &StationaryPolicy,
    pi2: &StationaryPolicy,
    horizon: usize,
) -> Result<OccupationMeasure> {
    check_profile(instance, pi1, pi2)?;
    let q = assemble_kernel(instance)?;
    let nx = instance.n_states();
    let beta = instance.beta;
    let mut joint: Vec<Vec<Vec<f64>>> = (0..nx)
        .map(|x| vec![vec![0.0; pi2.probs[x].len()]; pi1.probs[x].len()])
        .collect();
    let mut dist = instance.eta.clone();
    let mut weight = 1.0 - beta;
    for _ in 0..=horizon {
        let mut next = vec![0.0; nx];
        for x in 0..nx {
            if dist[x] == 0.0 {
                continue;
            }
            for (a1, p1) in pi1.probs[x].iter().enumerate() {
                for (a2, p2) in pi2.probs[x].iter().enumerate() {
                    let mass = dist[x] * p1 * p2;
                    joint[x][a1][a2] += weight * mass;
                    for (n, qy) in next.iter_mut().zip(q.slice(x, a1, a2)) {
                        *n += mass * qy;
                    }
                }
            }
        }
        dist = next;
        weight *= beta;
    }
    Ok(OccupationMeasure::from_joint(joint))
}

/// Max-norm residual of `mu_X = (1 - beta) eta + beta mu Q`, with `mu_X` taken
/// as the state marginal of `mu`'s joint table.
pub fn balance_residual(instance: &GameInstance, mu: &OccupationMeasure) -> f64 {
    let nx = instance.n_states();
    let beta = instance.beta;
    (0..nx)
        .map(|y| {
            let mut flow = 0.0;
            for x in 0..nx {
                for (a1, row) in mu.joint[x].iter().enumerate() {
                    for (a2, m) in row.iter().enumerate() {
                        flow += m * (instance.q1[y][x][a1] + instance.q2[y][x][a2]);
                    }
                }
            }
            let state_y: f64 = mu.joint[y].iter().flatten().sum();
            (state_y - (1.0 - beta) * instance.eta[y] - beta * flow).abs()
        })
        .fold(0.0, f64::max)
}

/// Total variation norm `sum |a - b|` of the difference of two measures on the same space.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum()
}

pub fn joint_total_variation(a: &OccupationMeasure, b: &OccupationMeasure) -> f64 {
    a.joint
        .iter()
        .flatten()
        .flatten()
        .zip(b.joint.iter().flatten().flatten())
        .map(|(u, v)| (u - v).abs())
        .sum()
}
