//! Monte Carlo estimates of occupation measures, payoffs and constraints.
//!
//! Each episode draws `X_0 ~ eta`, then for `t = 0..=T` draws `a1 ~ pi1(.|x)`,
//! `a2 ~ pi2(.|x)` and the next state from the assembled kernel, crediting the
//! visited tuple with weight `(1 - beta) beta^t`. The table therefore carries
//! mass `1 - beta^(T+1)` exactly; the missing tail bounds the truncation bias.
//!
//! Random streams: episode `e` uses `ChaCha8Rng::seed_from_u64(seed)` with
//! `set_stream(e)`, so every episode's draws depend only on `(seed, e)`.
//! Per-episode totals are accumulated in episode order.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{assemble_constraint, assemble_kernel, assemble_reward, GameInstance, Player};
use crate::occupation::StationaryPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationConfig {
    /// Last simulated time step `T`.
    pub horizon: usize,
    pub episodes: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn check(&self) -> Result<()> {
        if self.horizon == 0 || self.episodes == 0 {
            return Err(Error::InvalidArgument(format!(
                "horizon ({}) and episodes ({}) must be at least 1",
                self.horizon, self.episodes
            )));
        }
        Ok(())
    }
}

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Welford running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.count += 1;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
    }

    /// Estimate over `n >= count` samples, the missing ones being zero.
    fn estimate(&self, n: usize) -> Estimate {
        let mut full = *self;
        if full.count < n {
            // Merge a block of `n - count` zeros.
            let zeros = (n - full.count) as f64;
            let count = full.count as f64;
            let total = count + zeros;
            full.m2 += full.mean * full.mean * count * zeros / total;
            full.mean *= count / total;
            full.count = n;
        }
        let std_error = if n > 1 {
            (full.m2.max(0.0) / (n as f64 - 1.0) / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean: full.mean,
            std_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationEstimate {
    pub config: SimulationConfig,
    /// Empirical `mu(x, a1, a2)`.
    pub occupation: Vec<Vec<Vec<f64>>>,
    /// Per-cell standard errors of `occupation`.
    pub occupation_std_error: Vec<Vec<Vec<f64>>>,
    /// `1 - beta^(T+1)`.
    pub truncation_mass: f64,
    /// Indexed by player.
    pub payoffs: Vec<Estimate>,
    /// Indexed by player, then constraint.
    pub constraints: Vec<Vec<Estimate>>,
}

/// Everything an episode needs, over a flattened `[x][a1][a2]` cell layout.
struct Simulator {
    eta: WeightedIndex<f64>,
    pi1: Vec<WeightedIndex<f64>>,
    pi2: Vec<WeightedIndex<f64>>,
    /// Next-state sampler per cell.
    next: Vec<WeightedIndex<f64>>,
    offsets: Vec<usize>,
    n1: Vec<usize>,
    n2: Vec<usize>,
    /// `(1 - beta) beta^t` for `t = 0..=T`.
    weights: Vec<f64>,
    /// `rewards[i][cell]`
    rewards: [Vec<f64>; 2],
    /// `constraints[i][cell][k]`
    constraints: [Vec<Vec<f64>>; 2],
    base: ChaCha8Rng,
}

/// Discounted totals of one episode.
#[derive(Debug, Clone, PartialEq)]
struct Episode {
    /// Visited cells with their accumulated weight, in first-visit order.
    cells: Vec<(usize, f64)>,
    payoffs: [f64; 2],
    /// `constraints[k][i]`
    constraints: Vec<[f64; 2]>,
}

fn weighted(weights: &[f64], what: &str) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights).map_err(|e| Error::InvalidArgument(format!("cannot sample {what}: {e}")))
}

impl Simulator {
    fn new(instance: &GameInstance, pi1: &StationaryPolicy, pi2: &StationaryPolicy, config: &SimulationConfig) -> Result<Self> {
        let kernel = assemble_kernel(instance)?;
        let nx = instance.n_states();
        let n1: Vec<usize> = (0..nx).map(|x| instance.n_actions(Player::One, x)).collect();
        let n2: Vec<usize> = (0..nx).map(|x| instance.n_actions(Player::Two, x)).collect();
        let offsets: Vec<usize> = (0..nx)
            .scan(0, |acc, x| {
                let o = *acc;
                *acc += n1[x] * n2[x];
                Some(o)
            })
            .collect();
        let tuples: Vec<(usize, usize, usize)> = (0..nx)
            .flat_map(|x| {
                let n2x = n2[x];
                (0..n1[x]).flat_map(move |a1| (0..n2x).map(move |a2| (x, a1, a2)))
            })
            .collect();
        let flat_reward = |player| -> Result<Vec<f64>> {
            let r = assemble_reward(instance, player)?;
            Ok(tuples.iter().map(|&(x, a1, a2)| r[x][a1][a2]).collect())
        };
        let flat_constraint = |player| -> Result<Vec<Vec<f64>>> {
            let c = assemble_constraint(instance, player)?;
            Ok(tuples.iter().map(|&(x, a1, a2)| c[x][a1][a2].clone()).collect())
        };
        let beta = instance.beta;
        Ok(Simulator {
            eta: weighted(&instance.eta, "eta")?,
            pi1: pi1.probs.iter().map(|r| weighted(r, "pi1")).collect::<Result<_>>()?,
            pi2: pi2.probs.iter().map(|r| weighted(r, "pi2")).collect::<Result<_>>()?,
            next: tuples
                .iter()
                .map(|&(x, a1, a2)| weighted(kernel.slice(x, a1, a2), "the transition kernel"))
                .collect::<Result<_>>()?,
            weights: (0..=config.horizon)
                .scan(1.0 - beta, |w, _| {
                    let cur = *w;
                    *w *= beta;
                    Some(cur)
                })
                .collect(),
            rewards: [flat_reward(Player::One)?, flat_reward(Player::Two)?],
            constraints: [flat_constraint(Player::One)?, flat_constraint(Player::Two)?],
            base: ChaCha8Rng::seed_from_u64(config.seed),
            offsets,
            n1,
            n2,
        })
    }

    fn cells(&self) -> usize {
        self.offsets.last().map_or(0, |o| o + self.n1.last().unwrap() * self.n2.last().unwrap())
    }

    fn cell(&self, x: usize, a1: usize, a2: usize) -> usize {
        self.offsets[x] + a1 * self.n2[x] + a2
    }

    /// Episode `e`, drawn from its own stream. `scratch` must be all zeros and
    /// is left that way.
    fn run(&self, e: u64, p: usize, scratch: &mut [f64]) -> Episode {
        let mut rng = self.base.clone();
        rng.set_stream(e);
        let mut out = Episode {
            cells: Vec::new(),
            payoffs: [0.0; 2],
            constraints: vec![[0.0; 2]; p],
        };
        let mut order = Vec::new();
        let mut x = self.eta.sample(&mut rng);
        for &w in &self.weights {
            let a1 = self.pi1[x].sample(&mut rng);
            let a2 = self.pi2[x].sample(&mut rng);
            let c = self.cell(x, a1, a2);
            if scratch[c] == 0.0 {
                order.push(c);
            }
            scratch[c] += w;
            for i in 0..2 {
                out.payoffs[i] += w * self.rewards[i][c];
                for (k, ck) in out.constraints.iter_mut().enumerate() {
                    ck[i] += w * self.constraints[i][c][k];
                }
            }
            x = self.next[c].sample(&mut rng);
        }
        out.cells = order
            .into_iter()
            .map(|c| (c, std::mem::replace(&mut scratch[c], 0.0)))
            .collect();
        out
    }
}

pub fn simulate(
    instance: &GameInstance,
    pi1: &StationaryPolicy,
    pi2: &StationaryPolicy,
    config: &SimulationConfig,
) -> Result<SimulationEstimate> {
    config.check()?;
    if pi1.player != Player::One || pi2.player != Player::Two {
        return Err(Error::InvalidArgument("profile must list player 1's policy first".into()));
    }
    pi1.check(instance)?;
    pi2.check(instance)?;
    let sim = Simulator::new(instance, pi1, pi2, config)?;
    let p = instance.p;

    let mut scratch = vec![0.0; sim.cells()];
    let mut cell_moments = vec![Moments::default(); sim.cells()];
    let mut payoff_moments = [Moments::default(); 2];
    let mut constraint_moments = vec![[Moments::default(); 2]; p];
    for e in 0..config.episodes {
        let ep = sim.run(e as u64, p, &mut scratch);
        // Unvisited cells contribute zeros, which only enter through the count.
        for (c, w) in ep.cells {
            cell_moments[c].push(w);
        }
        for i in 0..2 {
            payoff_moments[i].push(ep.payoffs[i]);
            for (k, ck) in ep.constraints.iter().enumerate() {
                constraint_moments[k][i].push(ck[i]);
            }
        }
    }

    let m = config.episodes;
    let nx = instance.n_states();
    let table = |f: &dyn Fn(Estimate) -> f64| -> Vec<Vec<Vec<f64>>> {
        (0..nx)
            .map(|x| {
                (0..sim.n1[x])
                    .map(|a1| (0..sim.n2[x]).map(|a2| f(cell_moments[sim.cell(x, a1, a2)].estimate(m))).collect())
                    .collect()
            })
            .collect()
    };
    Ok(SimulationEstimate {
        config: *config,
        occupation: table(&|e| e.mean),
        occupation_std_error: table(&|e| e.std_error),
        truncation_mass: 1.0 - instance.beta.powi(config.horizon as i32 + 1),
        payoffs: payoff_moments.iter().map(|mo| mo.estimate(m)).collect(),
        constraints: (0..2)
            .map(|i| constraint_moments.iter().map(|mo| mo[i].estimate(m)).collect())
            .collect(),
    })
}
