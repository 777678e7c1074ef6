//! Constrained best responses as linear programs over state-action marginals.
//!
//! With the opponent's stationary policy fixed, player `i` faces a single-agent
//! constrained MDP whose kernel averages the opponent's transition component.
//! Its achievable state-action marginals `gamma(x, a)` are exactly the
//! nonnegative solutions of
//!
//! ```text
//! sum_a gamma(y, a) = (1 - beta) eta(y) + beta sum_{x,a} gamma(x, a) P_i(y | x, a)
//! ```
//!
//! and both the payoff and the constraint values are linear in `gamma`: the
//! opponent-dependent component contributes `gamma_X(x)` times the
//! opponent-averaged table at `x`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GameInstance, Player};
use crate::numerics::{lp_solve, LpProblem, LpStatus};
use crate::occupation::{disintegrate, MarginalMeasure, StationaryPolicy};

/// Flat LP variable index of `gamma(x, a)` for one player.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalLayout {
    offsets: Vec<usize>,
    sizes: Vec<usize>,
}

impl MarginalLayout {
    pub fn new(instance: &GameInstance, player: Player) -> Self {
        let sizes: Vec<usize> = instance.actions(player).iter().map(Vec::len).collect();
        let offsets = sizes
            .iter()
            .scan(0, |acc, n| {
                let off = *acc;
                *acc += n;
                Some(off)
            })
            .collect();
        MarginalLayout { offsets, sizes }
    }

    pub fn len(&self) -> usize {
        self.offsets.last().map_or(0, |o| o + self.sizes.last().unwrap())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, x: usize, a: usize) -> usize {
        self.offsets[x] + a
    }

    pub fn flatten(&self, table: &[Vec<f64>]) -> Vec<f64> {
        table.iter().flatten().copied().collect()
    }

    pub fn unflatten(&self, flat: &[f64]) -> Vec<Vec<f64>> {
        self.offsets
            .iter()
            .zip(&self.sizes)
            .map(|(&o, &n)| flat[o..o + n].to_vec())
            .collect()
    }
}

/// Single-agent data for player `i` against a fixed opponent policy.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponseProblem {
    pub player: Player,
    pub opponent: StationaryPolicy,
    /// `kernel[x][a][y] = q_i(y, x, a) + sum_b opponent(b | x) q_{-i}(y, x, b)`
    pub kernel: Vec<Vec<Vec<f64>>>,
    /// `objective[x][a] = r_i^own(x, a) + sum_b opponent(b | x) r_i^opp(x, b)`
    pub objective: Vec<Vec<f64>>,
    /// `constraints[x][a][k]`, built like `objective`.
    pub constraints: Vec<Vec<Vec<f64>>>,
    pub level: Vec<f64>,
}

impl BestResponseProblem {
    pub fn new(instance: &GameInstance, player: Player, opponent: &StationaryPolicy) -> Result<Self> {
        if opponent.player != player.opponent() {
            return Err(Error::InvalidArgument(format!(
                "best response of player {player} needs player {}'s policy",
                player.opponent()
            )));
        }
        opponent.check(instance)?;
        let t = instance.tables(player);
        let nx = instance.n_states();
        let p = instance.p;

        let mut kernel = Vec::with_capacity(nx);
        let mut objective = Vec::with_capacity(nx);
        let mut constraints = Vec::with_capacity(nx);
        for x in 0..nx {
            let opp = opponent.row(x);
            let opp_mass: Vec<f64> = (0..nx)
                .map(|y| opp.iter().zip(&t.opp_density[y][x]).map(|(w, q)| w * q).sum())
                .collect();
            let opp_reward: f64 = opp.iter().zip(&t.opp_reward[x]).map(|(w, r)| w * r).sum();
            let opp_constraint: Vec<f64> = (0..p)
                .map(|k| opp.iter().zip(&t.opp_constraint[x]).map(|(w, c)| w * c[k]).sum())
                .collect();
            let na = instance.n_actions(player, x);
            kernel.push(
                (0..na)
                    .map(|a| (0..nx).map(|y| t.own_density[y][x][a] + opp_mass[y]).collect())
                    .collect(),
            );
            objective.push((0..na).map(|a| t.own_reward[x][a] + opp_reward).collect());
            constraints.push(
                (0..na)
                    .map(|a| (0..p).map(|k| t.own_constraint[x][a][k] + opp_constraint[k]).collect())
                    .collect(),
            );
        }
        Ok(BestResponseProblem {
            player,
            opponent: opponent.clone(),
            kernel,
            objective,
            constraints,
            level: t.level.to_vec(),
        })
    }

    /// Occupation-measure balance rows plus the (redundant) total-mass row.
    fn balance_rows(&self, instance: &GameInstance, layout: &MarginalLayout, extra: usize) -> Vec<(Vec<f64>, f64)> {
        let nx = instance.n_states();
        let beta = instance.beta;
        let width = layout.len() + extra;
        let mut rows: Vec<(Vec<f64>, f64)> = (0..nx)
            .map(|y| {
                let mut coeffs = vec![0.0; width];
                for (x, by_a) in self.kernel.iter().enumerate() {
                    for (a, p) in by_a.iter().enumerate() {
                        let j = layout.index(x, a);
                        coeffs[j] -= beta * p[y];
                        if x == y {
                            coeffs[j] += 1.0;
                        }
                    }
                }
                (coeffs, (1.0 - beta) * instance.eta[y])
            })
            .collect();
        let mut mass = vec![1.0; width];
        mass[layout.len()..].iter_mut().for_each(|v| *v = 0.0);
        rows.push((mass, 1.0));
        rows
    }

    fn constraint_row(&self, layout: &MarginalLayout, k: usize, width: usize) -> Vec<f64> {
        let mut coeffs = vec![0.0; width];
        for (x, by_a) in self.constraints.iter().enumerate() {
            for (a, c) in by_a.iter().enumerate() {
                coeffs[layout.index(x, a)] = c[k];
            }
        }
        coeffs
    }

    /// Payoff of a marginal.
    pub fn value(&self, gamma: &MarginalMeasure) -> f64 {
        self.objective
            .iter()
            .zip(&gamma.table)
            .map(|(r, g)| r.iter().zip(g).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    /// Constraint vector of a marginal.
    pub fn constraint_values(&self, gamma: &MarginalMeasure) -> Vec<f64> {
        (0..self.level.len())
            .map(|k| {
                self.constraints
                    .iter()
                    .zip(&gamma.table)
                    .map(|(c, g)| c.iter().zip(g).map(|(ca, w)| ca[k] * w).sum::<f64>())
                    .sum()
            })
            .collect()
    }

    /// Max-norm residual of the balance equations at `gamma`.
    pub fn balance_residual(&self, instance: &GameInstance, gamma: &MarginalMeasure) -> f64 {
        let layout = MarginalLayout::new(instance, self.player);
        let flat = layout.flatten(&gamma.table);
        self.balance_rows(instance, &layout, 0)
            .iter()
            .map(|(c, b)| (c.iter().zip(&flat).map(|(u, v)| u * v).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }
}

/// The best-response LP for `player` against `opponent`: maximize the payoff
/// over marginals satisfying the balance equations and the `p` constraint rows.
pub fn build_feasible_lp(instance: &GameInstance, player: Player, opponent: &StationaryPolicy) -> Result<LpProblem> {
    let brp = BestResponseProblem::new(instance, player, opponent)?;
    Ok(lp_from_problem(instance, &brp))
}

fn lp_from_problem(instance: &GameInstance, brp: &BestResponseProblem) -> LpProblem {
    let layout = MarginalLayout::new(instance, brp.player);
    let mut lp = LpProblem::maximize(layout.flatten(&brp.objective));
    for (coeffs, rhs) in brp.balance_rows(instance, &layout, 0) {
        lp.equality(coeffs, rhs);
    }
    for (k, rho) in brp.level.iter().enumerate() {
        lp.at_least(brp.constraint_row(&layout, k, layout.len()), *rho);
    }
    lp
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestResponse {
    pub gamma: MarginalMeasure,
    pub value: f64,
    pub policy: StationaryPolicy,
    pub constraint_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status")]
pub enum BestResponseResult {
    Optimal(BestResponse),
    /// No policy meets the constraint levels against this opponent.
    Infeasible,
}

impl BestResponseResult {
    pub fn optimal(&self) -> Option<&BestResponse> {
        match self {
            BestResponseResult::Optimal(br) => Some(br),
            BestResponseResult::Infeasible => None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.optimal().is_some()
    }
}

pub fn constrained_best_response(
    instance: &GameInstance,
    player: Player,
    opponent: &StationaryPolicy,
) -> Result<BestResponseResult> {
    let brp = BestResponseProblem::new(instance, player, opponent)?;
    solve_problem(instance, &brp)
}

pub(crate) fn solve_problem(instance: &GameInstance, brp: &BestResponseProblem) -> Result<BestResponseResult> {
    let lp = lp_from_problem(instance, brp);
    let sol = lp_solve(&lp)?;
    match sol.status {
        LpStatus::Infeasible => Ok(BestResponseResult::Infeasible),
        LpStatus::Unbounded => Err(Error::InvalidArgument(
            "best-response LP reported unbounded on a bounded polytope".into(),
        )),
        LpStatus::Optimal => {
            let layout = MarginalLayout::new(instance, brp.player);
            let gamma = MarginalMeasure::new(brp.player, layout.unflatten(&sol.x));
            let policy = disintegrate(&gamma, instance, brp.player)?;
            Ok(BestResponseResult::Optimal(BestResponse {
                value: sol.objective,
                constraint_values: brp.constraint_values(&gamma),
                gamma,
                policy,
            }))
        }
    }
}

/// A marginal maximizing the smallest constraint slack.
#[derive(Debug, Clone, PartialEq)]
pub struct SlaterPoint {
    /// `max_gamma min_k (C_i(gamma) - rho_i)[k]`; `+inf` when `p = 0`.
    pub margin: f64,
    pub gamma: MarginalMeasure,
}

/// Solves `max t` subject to the balance equations and `C_i(gamma) >= rho_i + t 1_p`.
/// `None` only when the balance equations themselves are infeasible.
pub fn slater_point(instance: &GameInstance, player: Player, opponent: &StationaryPolicy) -> Result<Option<SlaterPoint>> {
    let brp = BestResponseProblem::new(instance, player, opponent)?;
    let layout = MarginalLayout::new(instance, player);
    let n = layout.len();
    let p = instance.p;

    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut lp = LpProblem::maximize(objective);
    lp.set_bounds(n, f64::NEG_INFINITY, None);
    for (coeffs, rhs) in brp.balance_rows(instance, &layout, 1) {
        lp.equality(coeffs, rhs);
    }
    for k in 0..p {
        let mut coeffs = brp.constraint_row(&layout, k, n + 1);
        coeffs[n] = -1.0;
        lp.at_least(coeffs, brp.level[k]);
    }
    if p == 0 {
        // Without constraint rows t is unbounded; pin it and report +inf.
        lp.set_bounds(n, 0.0, Some(0.0));
    }
    let sol = lp_solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let gamma = MarginalMeasure::new(player, layout.unflatten(&sol.x[..n]));
            let margin = if p == 0 { f64::INFINITY } else { sol.x[n] };
            Ok(Some(SlaterPoint { margin, gamma }))
        }
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::InvalidArgument(
            "Slater LP reported unbounded on a bounded polytope".into(),
        )),
    }
}

/// Largest uniform constraint slack attainable against `opponent`.
pub fn slater_margin(instance: &GameInstance, player: Player, opponent: &StationaryPolicy) -> Result<f64> {
    Ok(slater_point(instance, player, opponent)?.map_or(f64::NEG_INFINITY, |s| s.margin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::blank;
    use crate::model::{generate_random, GeneratorConfig};
    use crate::occupation::{constraint_value, occupation_measure, payoff};

    fn single_state_constrained(rho: f64) -> GameInstance {
        let mut g = blank(1, 2, 1);
        g.p = 1;
        g.rho1 = vec![rho];
        g.rho2 = vec![-1.0];
        g.r1_own = vec![vec![1.0, 0.0]];
        g.c1_own = vec![vec![vec![0.0], vec![1.0]]];
        g.c1_opp = vec![vec![vec![0.0]]];
        g.c2_own = vec![vec![vec![0.0]]];
        g.c2_opp = vec![vec![vec![0.0], vec![0.0]]];
        g
    }

    #[test]
    fn unconstrained_lp_has_only_balance_rows() {
        let g = generate_random(3, &GeneratorConfig::new(3, 2, 2, 0, 0.9)).unwrap();
        let opp = StationaryPolicy::uniform(&g, Player::Two);
        let lp = build_feasible_lp(&g, Player::One, &opp).unwrap();
        assert!(lp.inequalities.is_empty());
        assert_eq!(lp.equalities.len(), 3 + 1);
        assert_eq!(lp.num_vars(), 6);
    }

    #[test]
    fn single_state_rows_reduce_to_mass() {
        let g = blank(1, 3, 2);
        let opp = StationaryPolicy::uniform(&g, Player::Two);
        let lp = build_feasible_lp(&g, Player::One, &opp).unwrap();
        for row in &lp.equalities {
            // (1 - beta) sum gamma = (1 - beta), or sum gamma = 1.
            let scale = row.rhs;
            for c in &row.coefficients {
                assert!((c - scale).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn occupation_marginals_are_feasible_points() {
        let g = generate_random(12, &GeneratorConfig::new(4, 3, 2, 2, 0.9)).unwrap();
        let pi1 = StationaryPolicy::uniform(&g, Player::One);
        let pi2 = StationaryPolicy::deterministic(&g, Player::Two, &[0, 1, 1, 0]).unwrap();
        let mu = occupation_measure(&g, &pi1, &pi2).unwrap();
        let lp = build_feasible_lp(&g, Player::One, &pi2).unwrap();
        let x: Vec<f64> = mu.marginal1.iter().flatten().copied().collect();
        for row in &lp.equalities {
            assert!((row.dot(&x) - row.rhs).abs() <= 1e-9);
        }
        let c = constraint_value(&g, &mu, Player::One).unwrap();
        for (row, ck) in lp.inequalities.iter().zip(&c) {
            assert!((row.dot(&x) - ck).abs() < 1e-12);
        }
    }

    #[test]
    fn static_unconstrained_choice() {
        let mut g = blank(1, 2, 2);
        g.r1_own = vec![vec![1.0, 0.0]];
        g.r1_opp = vec![vec![0.5, -1.5]];
        let opp = StationaryPolicy::new(&g, Player::Two, vec![vec![0.25, 0.75]]).unwrap();
        let br = constrained_best_response(&g, Player::One, &opp).unwrap();
        let br = br.optimal().unwrap();
        assert_eq!(br.policy.probs[0], vec![1.0, 0.0]);
        assert!((br.value - (1.0 + 0.125 - 1.125)).abs() < 1e-12);
    }

    #[test]
    fn single_state_constraint_forces_even_mixture() {
        let g = single_state_constrained(0.5);
        let opp = StationaryPolicy::uniform(&g, Player::Two);
        let br = constrained_best_response(&g, Player::One, &opp).unwrap();
        let br = br.optimal().unwrap();
        assert!((br.value - 0.5).abs() < 1e-9);
        assert!((br.policy.probs[0][0] - 0.5).abs() < 1e-9);
        assert!((br.constraint_values[0] - 0.5).abs() < 1e-9);

        // Grid search over mixtures w on the first action, step 0.001.
        let best = (0..=1000)
            .map(|i| i as f64 / 1000.0)
            .filter(|w| 1.0 - w >= 0.5 - 1e-12)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((best - br.value).abs() < 1e-9);
    }

    #[test]
    fn unattainable_level_is_infeasible() {
        let g = single_state_constrained(2.0);
        let opp = StationaryPolicy::uniform(&g, Player::Two);
        assert_eq!(
            constrained_best_response(&g, Player::One, &opp).unwrap(),
            BestResponseResult::Infeasible
        );
    }

    #[test]
    fn slater_margin_bounds() {
        let opp_of = |g: &GameInstance| StationaryPolicy::uniform(g, Player::Two);
        let g = single_state_constrained(2.0);
        assert!(slater_margin(&g, Player::One, &opp_of(&g)).unwrap() <= -1.0);
        let g = single_state_constrained(-1.0);
        let m = slater_margin(&g, Player::One, &opp_of(&g)).unwrap();
        assert!(m >= 1.0);
        assert!((m - 2.0).abs() < 1e-9);
        let g = blank(2, 2, 2);
        assert_eq!(slater_margin(&g, Player::One, &opp_of(&g)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn generated_instances_have_the_configured_margin() {
        for seed in 0..10 {
            let g = generate_random(seed, &GeneratorConfig::new(3, 3, 2, 2, 0.9)).unwrap();
            for player in Player::BOTH {
                let opp = StationaryPolicy::uniform(&g, player.opponent());
                let m = slater_margin(&g, player, &opp).unwrap();
                assert!(m >= crate::model::SLATER_MARGIN - 1e-7, "seed {seed}: {m}");
            }
        }
    }

    #[test]
    fn extracted_policy_reproduces_value() {
        for seed in 0..10 {
            let g = generate_random(seed, &GeneratorConfig::new(4, 3, 3, 1, 0.9)).unwrap();
            let opp = StationaryPolicy::uniform(&g, Player::One);
            let res = constrained_best_response(&g, Player::Two, &opp).unwrap();
            let br = res.optimal().unwrap();
            let mu = occupation_measure(&g, &opp, &br.policy).unwrap();
            assert!((payoff(&g, &mu, Player::Two).unwrap() - br.value).abs() < 1e-7);
            let c = constraint_value(&g, &mu, Player::Two).unwrap();
            assert!((c[0] - br.constraint_values[0]).abs() < 1e-7);
            assert!(c[0] >= g.rho2[0] - 1e-9);
        }
    }

    #[test]
    fn wrong_opponent_is_rejected() {
        let g = blank(1, 2, 2);
        let same = StationaryPolicy::uniform(&g, Player::One);
        assert!(constrained_best_response(&g, Player::One, &same).is_err());
    }
}
