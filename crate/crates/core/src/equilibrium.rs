//! Damped best-response search for constrained equilibria, epsilon-Nash
//! verification, the feasibility-restoring mixture and the perturbation scheme.
//!
//! Each iteration evaluates both players' constrained best responses against
//! the opponent's current policy, maps the optimal marginals back to policies
//! and moves each policy a fraction `damping` of the way there. The iteration
//! is not guaranteed to converge; a run that stops for any other reason than a
//! small policy change followed by a passing verification reports
//! `converged: false`.

use serde::Serialize;

use crate::best_response::{slater_point, solve_problem, BestResponseProblem, BestResponseResult};
use crate::error::{Error, Result};
use crate::model::{GameInstance, Player};
use crate::numerics::FEASIBILITY_TOLERANCE;
use crate::occupation::{
    constraint_value, disintegrate, occupation_measure, payoff, serialize_table, MarginalMeasure, StationaryPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationConfig {
    pub max_iterations: usize,
    /// Weight on the new best response, in `(0, 1]`.
    pub damping: f64,
    /// Stop once the max-norm policy change of an iteration is at most this.
    pub tolerance: f64,
    /// Tolerance of the final epsilon-Nash check.
    pub epsilon: f64,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig {
            max_iterations: 500,
            damping: 0.5,
            tolerance: 1e-8,
            epsilon: 1e-6,
        }
    }
}

impl IterationConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!("damping {} is outside (0, 1]", self.damping)));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance {} must be finite and nonnegative", self.tolerance)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon {} must be finite and nonnegative", self.epsilon)));
        }
        Ok(())
    }
}

/// One player's half of the epsilon-Nash check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayerCheck {
    pub player: Player,
    pub payoff: f64,
    pub constraint_values: Vec<f64>,
    /// `min_k (C_i - rho_i)[k]`; `None` without constraints.
    pub slack: Option<f64>,
    pub feasible: bool,
    /// `None` when no stationary policy meets the levels against the opponent.
    pub best_response_value: Option<f64>,
    pub regret: Option<f64>,
    pub no_profitable_deviation: bool,
}

impl PlayerCheck {
    /// Smallest epsilon at which both of this player's conditions hold.
    pub fn defect(&self) -> f64 {
        let infeasibility = self.slack.map_or(0.0, |s| -s);
        infeasibility.max(self.regret.unwrap_or(0.0)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashVerification {
    pub epsilon: f64,
    pub players: Vec<PlayerCheck>,
    pub passed: bool,
}

impl NashVerification {
    pub fn defect(&self) -> f64 {
        self.players.iter().map(PlayerCheck::defect).fold(0.0, f64::max)
    }

    pub fn player(&self, player: Player) -> &PlayerCheck {
        &self.players[player.index()]
    }
}

/// Checks feasibility `C_i >= rho_i - epsilon` and no-regret
/// `R_i >= max over feasible deviations - epsilon` for both players.
///
/// Deviations range over stationary policies. A player with no feasible
/// deviation passes the second condition vacuously.
pub fn verify_epsilon_nash(
    instance: &GameInstance,
    pi1: &StationaryPolicy,
    pi2: &StationaryPolicy,
    epsilon: f64,
) -> Result<NashVerification> {
    let mu = occupation_measure(instance, pi1, pi2)?;
    let mut players = Vec::with_capacity(2);
    for player in Player::BOTH {
        let own_payoff = payoff(instance, &mu, player)?;
        let constraint_values = constraint_value(instance, &mu, player)?;
        let slack = min_slack(&constraint_values, instance.level(player));
        let opponent = if player == Player::One { pi2 } else { pi1 };
        let best = solve_problem(instance, &BestResponseProblem::new(instance, player, opponent)?)?;
        let best_response_value = best.optimal().map(|b| b.value);
        let regret = best_response_value.map(|v| v - own_payoff);
        players.push(PlayerCheck {
            player,
            payoff: own_payoff,
            feasible: slack.is_none_or(|s| s >= -epsilon),
            no_profitable_deviation: regret.is_none_or(|r| r <= epsilon),
            constraint_values,
            slack,
            best_response_value,
            regret,
        });
    }
    let passed = players.iter().all(|c| c.feasible && c.no_profitable_deviation);
    Ok(NashVerification {
        epsilon,
        players,
        passed,
    })
}

fn min_slack(values: &[f64], level: &[f64]) -> Option<f64> {
    values.iter().zip(level).map(|(c, r)| c - r).reduce(f64::min)
}

/// `(1 - sqrt(eps)) gamma_target + sqrt(eps) gamma_slater`.
///
/// If `gamma_slater` clears every level by `delta > 0` and `gamma_target`
/// misses them by at most `eps`, each constraint of the result is at least
/// [`mixture_lower_bound`]`(rho, delta, eps)`.
pub fn mix_restore_feasibility(
    gamma_target: &MarginalMeasure,
    gamma_slater: &MarginalMeasure,
    eps: f64,
) -> Result<MarginalMeasure> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("mixture parameter {eps} is outside (0, 1]")));
    }
    if gamma_target.player != gamma_slater.player
        || gamma_target.table.len() != gamma_slater.table.len()
        || gamma_target.table.iter().zip(&gamma_slater.table).any(|(a, b)| a.len() != b.len())
    {
        return Err(Error::InvalidArgument("marginals have different shapes".into()));
    }
    Ok(gamma_target.mix(gamma_slater, eps.sqrt()))
}

/// `rho + sqrt(eps) (delta - (1 - sqrt(eps)) sqrt(eps))`.
pub fn mixture_lower_bound(rho: f64, delta: f64, eps: f64) -> f64 {
    let s = eps.sqrt();
    rho + s * (delta - (1.0 - s) * s)
}

/// Something other than a plain best-response step that happened during a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IterationEvent {
    /// The best response was infeasible but a Slater point with positive
    /// margin existed, so the player moved to the restoring mixture instead.
    Restored {
        iteration: usize,
        player: Player,
        violation: f64,
        margin: f64,
    },
    /// No feasible response and no positive-margin Slater point; the run stopped.
    Infeasible {
        iteration: usize,
        player: Player,
        margin: Option<f64>,
    },
    /// A numerical failure; the run stopped.
    Error { iteration: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    #[serde(serialize_with = "serialize_table")]
    pub pi1: StationaryPolicy,
    #[serde(serialize_with = "serialize_table")]
    pub pi2: StationaryPolicy,
    pub payoffs: Vec<f64>,
    pub constraint_values: Vec<Vec<f64>>,
    pub slacks: Vec<Option<f64>>,
    pub regrets: Vec<Option<f64>>,
    pub converged: bool,
    /// Whether the last iteration's policy change was within tolerance.
    pub stopped_on_tolerance: bool,
    pub iterations: usize,
    pub policy_change_trace: Vec<f64>,
    /// Each player's Slater margin against the opponent's final policy;
    /// `None` without constraints.
    pub slater_margins: Vec<Option<f64>>,
    pub events: Vec<IterationEvent>,
    pub verification: NashVerification,
    pub config: IterationConfig,
}

enum Response {
    Policy(StationaryPolicy),
    Restored {
        policy: StationaryPolicy,
        violation: f64,
        margin: f64,
    },
    Infeasible(Option<f64>),
}

/// Keeps the current policy when it is already a best response, otherwise
/// returns the disintegrated LP solution.
fn respond(
    instance: &GameInstance,
    player: Player,
    current: &StationaryPolicy,
    opponent: &StationaryPolicy,
    state: &[f64],
) -> Result<Response> {
    let brp = BestResponseProblem::new(instance, player, opponent)?;
    let gamma = MarginalMeasure::product(state, current);
    let value = brp.value(&gamma);
    let violation = brp
        .constraint_values(&gamma)
        .iter()
        .zip(&brp.level)
        .map(|(c, r)| r - c)
        .fold(0.0, f64::max);
    match solve_problem(instance, &brp)? {
        BestResponseResult::Optimal(br) => {
            let keep = violation <= FEASIBILITY_TOLERANCE && br.value - value <= 1e-9 * (1.0 + value.abs());
            Ok(Response::Policy(if keep { current.clone() } else { br.policy }))
        }
        BestResponseResult::Infeasible => {
            let slater = slater_point(instance, player, opponent)?;
            match slater {
                Some(s) if s.margin > 0.0 => {
                    let restored = if violation >= 1.0 {
                        s.gamma
                    } else {
                        mix_restore_feasibility(&gamma, &s.gamma, violation.max(f64::MIN_POSITIVE))?
                    };
                    Ok(Response::Restored {
                        policy: disintegrate(&restored, instance, player)?,
                        violation,
                        margin: s.margin,
                    })
                }
                other => Ok(Response::Infeasible(other.map(|s| s.margin))),
            }
        }
    }
}

/// Damped best-response iteration from the uniform profile.
pub fn iterate(instance: &GameInstance, config: &IterationConfig) -> Result<EquilibriumReport> {
    instance.ensure_valid()?;
    config.check()?;
    let mut pi = [
        StationaryPolicy::uniform(instance, Player::One),
        StationaryPolicy::uniform(instance, Player::Two),
    ];
    let mut trace = Vec::new();
    let mut events = Vec::new();
    let mut stopped_on_tolerance = false;

    'outer: for iteration in 1..=config.max_iterations {
        let state = match occupation_measure(instance, &pi[0], &pi[1]) {
            Ok(mu) => mu.state,
            Err(e) => {
                events.push(IterationEvent::Error {
                    iteration,
                    message: e.to_string(),
                });
                break;
            }
        };
        let mut next = pi.clone();
        for player in Player::BOTH {
            let i = player.index();
            let response = match respond(instance, player, &pi[i], &pi[1 - i], &state) {
                Ok(r) => r,
                Err(e) => {
                    events.push(IterationEvent::Error {
                        iteration,
                        message: e.to_string(),
                    });
                    break 'outer;
                }
            };
            let target = match response {
                Response::Policy(p) => p,
                Response::Restored {
                    policy,
                    violation,
                    margin,
                } => {
                    events.push(IterationEvent::Restored {
                        iteration,
                        player,
                        violation,
                        margin,
                    });
                    policy
                }
                Response::Infeasible(margin) => {
                    events.push(IterationEvent::Infeasible {
                        iteration,
                        player,
                        margin,
                    });
                    break 'outer;
                }
            };
            next[i] = pi[i].mix(&target, config.damping);
        }
        let change = next[0].max_abs_diff(&pi[0]).max(next[1].max_abs_diff(&pi[1]));
        pi = next;
        trace.push(change);
        if change <= config.tolerance {
            stopped_on_tolerance = true;
            break;
        }
    }

    let [pi1, pi2] = pi;
    let verification = verify_epsilon_nash(instance, &pi1, &pi2, config.epsilon)?;
    let slater_margins = Player::BOTH
        .into_iter()
        .map(|player| {
            if instance.p == 0 {
                return Ok(None);
            }
            let opponent = if player == Player::One { &pi2 } else { &pi1 };
            Ok(Some(slater_point(instance, player, opponent)?.map_or(f64::NEG_INFINITY, |s| s.margin)))
        })
        .collect::<Result<Vec<_>>>()?;
    let failed = events
        .iter()
        .any(|e| !matches!(e, IterationEvent::Restored { .. }));
    Ok(EquilibriumReport {
        payoffs: verification.players.iter().map(|c| c.payoff).collect(),
        constraint_values: verification.players.iter().map(|c| c.constraint_values.clone()).collect(),
        slacks: verification.players.iter().map(|c| c.slack).collect(),
        regrets: verification.players.iter().map(|c| c.regret).collect(),
        converged: stopped_on_tolerance && !failed && verification.passed,
        stopped_on_tolerance,
        iterations: trace.len(),
        policy_change_trace: trace,
        slater_margins,
        events,
        verification,
        config: *config,
        pi1,
        pi2,
    })
}

/// `n/(n+1) nu + 1/(n+1) lambda` with `lambda` uniform over states.
pub fn perturbed_initial(nu: &[f64], n: usize) -> Vec<f64> {
    let w = 1.0 / (n as f64 + 1.0);
    let uniform = 1.0 / nu.len() as f64;
    nu.iter().map(|v| (1.0 - w) * v + w * uniform).collect()
}

/// `theta - bound/(n+1)` componentwise.
pub fn perturbed_level(theta: &[f64], bound: f64, n: usize) -> Vec<f64> {
    let shift = bound / (n as f64 + 1.0);
    theta.iter().map(|t| t - shift).collect()
}

/// The `n`-th game of the scheme, with the constant taken from
/// [`GameInstance::constraint_sup_norm`].
pub fn perturbed_instance(instance: &GameInstance, n: usize) -> GameInstance {
    let bound = 2.0 * instance.constraint_sup_norm();
    instance.with_initial_and_levels(
        perturbed_initial(&instance.eta, n),
        perturbed_level(&instance.rho1, bound, n),
        perturbed_level(&instance.rho2, bound, n),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationStep {
    pub n: usize,
    pub eta: Vec<f64>,
    pub rho1: Vec<f64>,
    pub rho2: Vec<f64>,
    pub report: EquilibriumReport,
    /// The step's final profile checked against the unperturbed game.
    pub original: NashVerification,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    /// Twice the largest absolute assembled constraint entry.
    pub bound: f64,
    pub steps: Vec<PerturbationStep>,
}

impl PerturbationReport {
    /// Verification of the last step's profile on the unperturbed game.
    pub fn final_verification(&self) -> Option<&NashVerification> {
        self.steps.last().map(|s| &s.original)
    }
}

/// Runs [`iterate`] on the perturbed games `n = 0..=n_max`.
pub fn perturbed_sequence(instance: &GameInstance, n_max: usize, config: &IterationConfig) -> Result<PerturbationReport> {
    instance.ensure_valid()?;
    config.check()?;
    let bound = 2.0 * instance.constraint_sup_norm();
    let steps = (0..=n_max)
        .map(|n| {
            let game = perturbed_instance(instance, n);
            let report = iterate(&game, config)?;
            let original = verify_epsilon_nash(instance, &report.pi1, &report.pi2, config.epsilon)?;
            Ok(PerturbationStep {
                n,
                eta: game.eta,
                rho1: game.rho1,
                rho2: game.rho2,
                report,
                original,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PerturbationReport { bound, steps })
}
