//! Reference computations shared by the integration and acceptance tests.
//! They deliberately avoid the crate's own linear algebra and LP code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use arat_core::model::{assemble_constraint, assemble_kernel, assemble_reward};
use arat_core::{GameInstance, Player, StationaryPolicy};

/// Exact quantities of a profile computed from the full joint kernel.
#[derive(Debug, Clone)]
pub struct Reference {
    pub state: Vec<f64>,
    /// `joint[x][a1][a2]`
    pub joint: Vec<Vec<Vec<f64>>>,
    pub payoffs: [f64; 2],
    pub constraints: [Vec<f64>; 2],
}

/// Solves `mu (I - beta P) = (1 - beta) eta` with nalgebra's LU.
pub fn reference(instance: &GameInstance, pi1: &StationaryPolicy, pi2: &StationaryPolicy) -> Reference {
    let nx = instance.n_states();
    let q = assemble_kernel(instance).unwrap();
    let mut m = DMatrix::<f64>::identity(nx, nx);
    for x in 0..nx {
        for (a1, w1) in pi1.probs[x].iter().enumerate() {
            for (a2, w2) in pi2.probs[x].iter().enumerate() {
                for y in 0..nx {
                    // Row y of (I - beta P)^T.
                    m[(y, x)] -= instance.beta * w1 * w2 * q.get(y, x, a1, a2);
                }
            }
        }
    }
    let rhs = DVector::from_iterator(nx, instance.eta.iter().map(|e| (1.0 - instance.beta) * e));
    let state: Vec<f64> = m.lu().solve(&rhs).expect("nonsingular").iter().copied().collect();
    let joint: Vec<Vec<Vec<f64>>> = (0..nx)
        .map(|x| {
            pi1.probs[x]
                .iter()
                .map(|w1| pi2.probs[x].iter().map(|w2| state[x] * w1 * w2).collect())
                .collect()
        })
        .collect();
    let integrate = |table: &Vec<Vec<Vec<f64>>>| -> f64 {
        joint
            .iter()
            .zip(table)
            .flat_map(|(j, t)| j.iter().flatten().zip(t.iter().flatten()))
            .map(|(a, b)| a * b)
            .sum()
    };
    let payoffs = [
        integrate(&assemble_reward(instance, Player::One).unwrap()),
        integrate(&assemble_reward(instance, Player::Two).unwrap()),
    ];
    let constraint = |player| -> Vec<f64> {
        let c = assemble_constraint(instance, player).unwrap();
        (0..instance.p)
            .map(|k| {
                let ck: Vec<Vec<Vec<f64>>> = c
                    .iter()
                    .map(|by_a1| by_a1.iter().map(|row| row.iter().map(|v| v[k]).collect()).collect())
                    .collect();
                integrate(&ck)
            })
            .collect()
    };
    let constraints = [constraint(Player::One), constraint(Player::Two)];
    Reference {
        state,
        joint,
        payoffs,
        constraints,
    }
}

/// A random stationary policy; roughly one row in four is deterministic.
pub fn random_policy(rng: &mut ChaCha8Rng, instance: &GameInstance, player: Player) -> StationaryPolicy {
    let probs = instance
        .actions(player)
        .iter()
        .map(|acts| {
            let n = acts.len();
            if rng.gen_bool(0.25) {
                let pick = rng.gen_range(0..n);
                (0..n).map(|a| if a == pick { 1.0 } else { 0.0 }).collect()
            } else {
                let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
                let total: f64 = w.iter().sum();
                w.into_iter().map(|v| v / total).collect()
            }
        })
        .collect();
    StationaryPolicy::new(instance, player, probs).unwrap()
}

/// Every composition of `steps` into `parts` nonnegative integers.
fn compositions(steps: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![steps]];
    }
    (0..=steps)
        .flat_map(|first| {
            compositions(steps - first, parts - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

/// All policies whose probabilities are multiples of `1/steps`.
pub fn grid_policies(instance: &GameInstance, player: Player, steps: usize) -> Vec<StationaryPolicy> {
    let rows: Vec<Vec<Vec<f64>>> = instance
        .actions(player)
        .iter()
        .map(|acts| {
            compositions(steps, acts.len())
                .into_iter()
                .map(|c| c.into_iter().map(|k| k as f64 / steps as f64).collect())
                .collect()
        })
        .collect();
    let mut out: Vec<Vec<Vec<f64>>> = vec![vec![]];
    for options in &rows {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |row| {
                    let mut next = prefix.clone();
                    next.push(row.clone());
                    next
                })
            })
            .collect();
    }
    out.into_iter()
        .map(|probs| StationaryPolicy { player, probs })
        .collect()
}

/// Solo optimum of one player in a decoupled game with at most one constraint.
///
/// The state distribution does not depend on the policies, so the problem is
/// an LP over `z(x, a) = mu_X(x) pi(a|x)` with one coupling row. Its vertices
/// are deterministic policies, plus policies that randomize at one state
/// between two actions so that the constraint holds with equality; all of
/// them are enumerated.
pub fn decoupled_solo_optimum(instance: &GameInstance, player: Player) -> (f64, Vec<Vec<f64>>) {
    assert!(instance.p <= 1);
    let u1 = StationaryPolicy::uniform(instance, Player::One);
    let u2 = StationaryPolicy::uniform(instance, Player::Two);
    let mu = reference(instance, &u1, &u2).state;
    let t = instance.tables(player);
    let nx = instance.n_states();
    let sizes: Vec<usize> = (0..nx).map(|x| instance.n_actions(player, x)).collect();
    let rho = t.level.first().copied();
    let c = |x: usize, a: usize| if rho.is_some() { t.own_constraint[x][a][0] } else { 0.0 };

    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut consider = |value: f64, cons: f64, policy: Vec<Vec<f64>>| {
        if rho.is_none_or(|r| cons >= r - 1e-12) && best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, policy));
        }
    };

    let mut choice = vec![0usize; nx];
    loop {
        let value: f64 = (0..nx).map(|x| mu[x] * t.own_reward[x][choice[x]]).sum();
        let cons: f64 = (0..nx).map(|x| mu[x] * c(x, choice[x])).sum();
        let det = |x: usize| -> Vec<f64> { (0..sizes[x]).map(|a| if a == choice[x] { 1.0 } else { 0.0 }).collect() };
        consider(value, cons, (0..nx).map(det).collect());
        if let Some(r) = rho {
            for x in 0..nx {
                let rest_v = value - mu[x] * t.own_reward[x][choice[x]];
                let rest_c = cons - mu[x] * c(x, choice[x]);
                for a in 0..sizes[x] {
                    for b in a + 1..sizes[x] {
                        let (ca, cb) = (c(x, a), c(x, b));
                        if mu[x] <= 0.0 || (ca - cb).abs() < 1e-14 {
                            continue;
                        }
                        // rest_c + mu (w ca + (1 - w) cb) = r
                        let w = ((r - rest_c) / mu[x] - cb) / (ca - cb);
                        if !(0.0..=1.0).contains(&w) {
                            continue;
                        }
                        let v = rest_v + mu[x] * (w * t.own_reward[x][a] + (1.0 - w) * t.own_reward[x][b]);
                        let mut policy: Vec<Vec<f64>> = (0..nx).map(det).collect();
                        policy[x] = vec![0.0; sizes[x]];
                        policy[x][a] = w;
                        policy[x][b] = 1.0 - w;
                        consider(v, r, policy);
                    }
                }
            }
        }
        // Next deterministic choice in mixed-radix order.
        let mut i = 0;
        while i < nx {
            choice[i] += 1;
            if choice[i] < sizes[i] {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
        if i == nx {
            break;
        }
    }
    best.expect("the uniform policy is feasible")
}

/// Max-norm distance on entries of states with mass above `floor`.
pub fn policy_distance_on_support(a: &[Vec<f64>], b: &[Vec<f64>], state: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .zip(state)
        .filter(|(_, m)| **m > floor)
        .flat_map(|((ra, rb), _)| ra.iter().zip(rb).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}
