//! Seeded random ARAT instances.
//!
//! Draw order from a `ChaCha8Rng` seeded with `seed_from_u64(seed)`:
//! 1. `s1(x) ~ U[0.2, 0.8]` for every state;
//! 2. for each state `x` and action of player 1, then of player 2, a weight
//!    vector over target states `w(y) ~ U[0.01, 1)`, normalized to mass
//!    `s1(x)` (player 1) or `1 - s1(x)` (player 2);
//! 3. rewards `r1_own, r1_opp, r2_own, r2_opp` then constraints
//!    `c1_own, c1_opp, c2_own, c2_opp`, all `U[-1, 1]`, in row-major order;
//! 4. `eta` as normalized standard exponentials (uniform on the simplex).
//!
//! Constraint levels are then set to `C_i(eta, uniform, uniform) - SLATER_MARGIN`.
//!
//! [`generate_decoupled`] makes the same draws, then keeps only the first
//! action's density column for every action and zeroes the opponent-dependent
//! reward and constraint tables. The state process then ignores both policies
//! and each player faces a fixed single-agent constrained problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GameInstance, Player};
use crate::error::{Error, Result};
use crate::occupation::{constraint_value, occupation_measure, StationaryPolicy};

/// Margin by which the uniform profile satisfies the generated constraints.
pub const SLATER_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    pub states: usize,
    pub actions1: usize,
    pub actions2: usize,
    pub p: usize,
    pub beta: f64,
}

impl GeneratorConfig {
    pub fn new(states: usize, actions1: usize, actions2: usize, p: usize, beta: f64) -> Self {
        GeneratorConfig {
            states,
            actions1,
            actions2,
            p,
            beta,
        }
    }
}

/// Uniform weights on the simplex, with a positive lower bound on each coordinate's draw.
fn density_row(rng: &mut ChaCha8Rng, nx: usize, mass: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..nx).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| mass * v / total).collect()
}

pub fn generate_random(seed: u64, config: &GeneratorConfig) -> Result<GameInstance> {
    let GeneratorConfig {
        states: nx,
        actions1: n1,
        actions2: n2,
        p,
        beta,
    } = *config;
    if nx == 0 || n1 == 0 || n2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "sizes must be positive (states {nx}, actions {n1}/{n2})"
        )));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("discount {beta} is outside (0, 1)")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let split: Vec<f64> = (0..nx).map(|_| rng.gen_range(0.2..=0.8)).collect();

    let mut q1 = vec![vec![vec![0.0; n1]; nx]; nx];
    let mut q2 = vec![vec![vec![0.0; n2]; nx]; nx];
    for x in 0..nx {
        for a in 0..n1 {
            for (y, v) in density_row(&mut rng, nx, split[x]).into_iter().enumerate() {
                q1[y][x][a] = v;
            }
        }
        for a in 0..n2 {
            for (y, v) in density_row(&mut rng, nx, 1.0 - split[x]).into_iter().enumerate() {
                q2[y][x][a] = v;
            }
        }
    }

    let mut table = |na: usize| -> Vec<Vec<f64>> {
        (0..nx)
            .map(|_| (0..na).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            .collect()
    };
    let r1_own = table(n1);
    let r1_opp = table(n2);
    let r2_own = table(n2);
    let r2_opp = table(n1);
    let mut ctable = |na: usize| -> Vec<Vec<Vec<f64>>> {
        (0..nx)
            .map(|_| {
                (0..na)
                    .map(|_| (0..p).map(|_| rng.gen_range(-1.0..=1.0)).collect())
                    .collect()
            })
            .collect()
    };
    let c1_own = ctable(n1);
    let c1_opp = ctable(n2);
    let c2_own = ctable(n2);
    let c2_opp = ctable(n1);

    let expo: Vec<f64> = (0..nx).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = expo.iter().sum();
    let eta: Vec<f64> = expo.into_iter().map(|e| e / total).collect();

    let mut instance = GameInstance {
        states: (0..nx).map(|x| format!("x{x}")).collect(),
        actions1: vec![(0..n1).map(|a| format!("a{a}")).collect(); nx],
        actions2: vec![(0..n2).map(|a| format!("b{a}")).collect(); nx],
        beta,
        eta,
        p,
        rho1: vec![0.0; p],
        rho2: vec![0.0; p],
        r1_own,
        r1_opp,
        r2_own,
        r2_opp,
        c1_own,
        c1_opp,
        c2_own,
        c2_opp,
        q1,
        q2,
    };
    instance.ensure_valid()?;
    set_levels_from_uniform(&mut instance, SLATER_MARGIN)?;
    Ok(instance)
}

/// A random instance in which neither player's payoff, constraints or
/// transitions depend on the other player's actions.
pub fn generate_decoupled(seed: u64, config: &GeneratorConfig) -> Result<GameInstance> {
    let mut instance = generate_random(seed, config)?;
    for q in [&mut instance.q1, &mut instance.q2] {
        for by_x in q.iter_mut() {
            for col in by_x.iter_mut() {
                let first = col[0];
                col.iter_mut().for_each(|v| *v = first);
            }
        }
    }
    let zero = |t: &mut Vec<Vec<f64>>| t.iter_mut().flatten().for_each(|v| *v = 0.0);
    zero(&mut instance.r1_opp);
    zero(&mut instance.r2_opp);
    for c in [&mut instance.c1_opp, &mut instance.c2_opp] {
        c.iter_mut().flatten().flatten().for_each(|v| *v = 0.0);
    }
    instance.ensure_valid()?;
    set_levels_from_uniform(&mut instance, SLATER_MARGIN)?;
    Ok(instance)
}

/// Sets `rho_i = C_i(eta, uniform, uniform) - margin` for both players.
pub fn set_levels_from_uniform(instance: &mut GameInstance, margin: f64) -> Result<()> {
    let pi1 = StationaryPolicy::uniform(instance, Player::One);
    let pi2 = StationaryPolicy::uniform(instance, Player::Two);
    let mu = occupation_measure(instance, &pi1, &pi2)?;
    instance.rho1 = constraint_value(instance, &mu, Player::One)?
        .into_iter()
        .map(|c| c - margin)
        .collect();
    instance.rho2 = constraint_value(instance, &mu, Player::Two)?
        .into_iter()
        .map(|c| c - margin)
        .collect();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_kernel, assemble_reward, validate};

    #[test]
    fn generated_instance_validates() {
        let g = generate_random(1, &GeneratorConfig::new(3, 2, 2, 1, 0.9)).unwrap();
        assert!(validate(&g).ok);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GeneratorConfig::new(4, 3, 2, 2, 0.95);
        let a = serde_json::to_string(&generate_random(1, &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_random(1, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_differ() {
        let cfg = GeneratorConfig::new(3, 2, 2, 1, 0.9);
        assert_ne!(generate_random(1, &cfg).unwrap(), generate_random(2, &cfg).unwrap());
    }

    #[test]
    fn kernel_slices_sum_to_one() {
        let g = generate_random(7, &GeneratorConfig::new(5, 3, 4, 1, 0.9)).unwrap();
        let q = assemble_kernel(&g).unwrap();
        for slice in q.probs.iter().flatten().flatten() {
            let s: f64 = slice.iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn assembled_rewards_have_zero_second_differences() {
        let g = generate_random(9, &GeneratorConfig::new(3, 3, 4, 0, 0.5)).unwrap();
        for player in Player::BOTH {
            let r = assemble_reward(&g, player).unwrap();
            for table in &r {
                for a in 0..3 {
                    for a_ in 0..3 {
                        for b in 0..4 {
                            for b_ in 0..4 {
                                let d = table[a][b] - table[a][b_] - table[a_][b] + table[a_][b_];
                                assert!(d.abs() < 1e-14);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn decoupled_kernel_ignores_actions() {
        let g = generate_decoupled(4, &GeneratorConfig::new(3, 3, 2, 1, 0.9)).unwrap();
        assert!(validate(&g).ok);
        let q = assemble_kernel(&g).unwrap();
        for x in 0..3 {
            for a1 in 0..3 {
                for a2 in 0..2 {
                    assert_eq!(q.slice(x, a1, a2), q.slice(x, 0, 0));
                }
            }
        }
        assert!(g.r1_opp.iter().flatten().all(|v| *v == 0.0));
        assert!(g.c2_opp.iter().flatten().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn bad_arguments_are_rejected() {
        assert!(generate_random(1, &GeneratorConfig::new(0, 1, 1, 0, 0.5)).is_err());
        assert!(generate_random(1, &GeneratorConfig::new(1, 0, 1, 0, 0.5)).is_err());
        assert!(generate_random(1, &GeneratorConfig::new(1, 1, 1, 0, 1.0)).is_err());
        assert!(generate_random(1, &GeneratorConfig::new(1, 1, 1, 0, 0.0)).is_err());
    }
}
