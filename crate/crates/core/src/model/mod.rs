//! Finite ARAT game instances.
//!
//! Rewards, constraints and transition densities are stored as two additive
//! components per player, one depending on the player's own action and one on
//! the opponent's. Action sets are per state: `actions1[x]` lists the labels
//! of the actions feasible for player 1 at state `x`, and every per-action
//! table is indexed by the position in that list.
//!
//! Index conventions, shared with the JSON instance format:
//!
//! | field                  | index             |
//! |------------------------|-------------------|
//! | `r1_own`, `r2_opp`     | `[x][a1]`         |
//! | `r1_opp`, `r2_own`     | `[x][a2]`         |
//! | `c1_own`, `c2_opp`     | `[x][a1][k]`      |
//! | `c1_opp`, `c2_own`     | `[x][a2][k]`      |
//! | `q1`                   | `[y][x][a1]`      |
//! | `q2`                   | `[y][x][a2]`      |

mod generate;
mod validate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{generate_decoupled, generate_random, set_levels_from_uniform, GeneratorConfig, SLATER_MARGIN};
pub use validate::{validate, ValidationReport, Violation, ViolationCode, STOCHASTIC_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn opponent(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

impl From<Player> for u8 {
    fn from(p: Player) -> u8 {
        p.number()
    }
}

impl TryFrom<u8> for Player {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Player::One),
            2 => Ok(Player::Two),
            _ => Err(format!("player must be 1 or 2, got {v}")),
        }
    }
}

impl std::fmt::Display for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// `[x][a]`
pub type StateActionTable = Vec<Vec<f64>>;
/// `[x][a][k]`
pub type ConstraintTable = Vec<Vec<Vec<f64>>>;
/// `[y][x][a]`
pub type DensityTable = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameInstance {
    pub states: Vec<String>,
    pub actions1: Vec<Vec<String>>,
    pub actions2: Vec<Vec<String>>,
    pub beta: f64,
    pub eta: Vec<f64>,
    pub p: usize,
    pub rho1: Vec<f64>,
    pub rho2: Vec<f64>,
    pub r1_own: StateActionTable,
    pub r1_opp: StateActionTable,
    pub r2_own: StateActionTable,
    pub r2_opp: StateActionTable,
    pub c1_own: ConstraintTable,
    pub c1_opp: ConstraintTable,
    pub c2_own: ConstraintTable,
    pub c2_opp: ConstraintTable,
    pub q1: DensityTable,
    pub q2: DensityTable,
}

/// The instance data seen from one player's side.
#[derive(Debug, Clone, Copy)]
pub struct PlayerTables<'a> {
    pub player: Player,
    pub own_reward: &'a StateActionTable,
    pub opp_reward: &'a StateActionTable,
    pub own_constraint: &'a ConstraintTable,
    pub opp_constraint: &'a ConstraintTable,
    /// Transition component driven by this player's action.
    pub own_density: &'a DensityTable,
    /// Transition component driven by the opponent's action.
    pub opp_density: &'a DensityTable,
    pub level: &'a [f64],
}

impl GameInstance {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn actions(&self, player: Player) -> &[Vec<String>] {
        match player {
            Player::One => &self.actions1,
            Player::Two => &self.actions2,
        }
    }

    pub fn n_actions(&self, player: Player, x: usize) -> usize {
        self.actions(player)[x].len()
    }

    pub fn level(&self, player: Player) -> &[f64] {
        match player {
            Player::One => &self.rho1,
            Player::Two => &self.rho2,
        }
    }

    pub fn tables(&self, player: Player) -> PlayerTables<'_> {
        match player {
            Player::One => PlayerTables {
                player,
                own_reward: &self.r1_own,
                opp_reward: &self.r1_opp,
                own_constraint: &self.c1_own,
                opp_constraint: &self.c1_opp,
                own_density: &self.q1,
                opp_density: &self.q2,
                level: &self.rho1,
            },
            Player::Two => PlayerTables {
                player,
                own_reward: &self.r2_own,
                opp_reward: &self.r2_opp,
                own_constraint: &self.c2_own,
                opp_constraint: &self.c2_opp,
                own_density: &self.q2,
                opp_density: &self.q1,
                level: &self.rho2,
            },
        }
    }

    /// Density component `q_i(y, x, a)` for player `i`'s action `a`.
    pub fn density(&self, player: Player) -> &DensityTable {
        match player {
            Player::One => &self.q1,
            Player::Two => &self.q2,
        }
    }

    /// Largest absolute entry of the assembled constraint functions of both players.
    pub fn constraint_sup_norm(&self) -> f64 {
        let mut sup = 0.0_f64;
        for player in Player::BOTH {
            let t = self.tables(player);
            let (a1_tab, a2_tab) = match player {
                Player::One => (t.own_constraint, t.opp_constraint),
                Player::Two => (t.opp_constraint, t.own_constraint),
            };
            for x in 0..self.n_states() {
                for k in 0..self.p {
                    let m1 = a1_tab[x].iter().map(|c| c[k]);
                    let hi1 = m1.clone().fold(f64::NEG_INFINITY, f64::max);
                    let lo1 = m1.fold(f64::INFINITY, f64::min);
                    let m2 = a2_tab[x].iter().map(|c| c[k]);
                    let hi2 = m2.clone().fold(f64::NEG_INFINITY, f64::max);
                    let lo2 = m2.fold(f64::INFINITY, f64::min);
                    sup = sup.max((hi1 + hi2).abs()).max((lo1 + lo2).abs());
                }
            }
        }
        sup
    }

    /// Checks that every table has the length implied by `states`, the action
    /// lists and `p`, and that every number is finite.
    pub fn check_shape(&self) -> Result<()> {
        let nx = self.n_states();
        if nx == 0 {
            return Err(Error::shape("states", "at least one state is required"));
        }
        for (name, acts) in [("actions1", &self.actions1), ("actions2", &self.actions2)] {
            if acts.len() != nx {
                return Err(Error::shape(
                    name,
                    format!("expected {nx} per-state action lists, found {}", acts.len()),
                ));
            }
        }
        if !self.beta.is_finite() {
            return Err(Error::shape("beta", "must be a finite number"));
        }
        check_vector("eta", &self.eta, nx)?;
        check_vector("rho1", &self.rho1, self.p)?;
        check_vector("rho2", &self.rho2, self.p)?;

        let n1: Vec<usize> = self.actions1.iter().map(Vec::len).collect();
        let n2: Vec<usize> = self.actions2.iter().map(Vec::len).collect();
        check_state_action("r1_own", &self.r1_own, &n1)?;
        check_state_action("r1_opp", &self.r1_opp, &n2)?;
        check_state_action("r2_own", &self.r2_own, &n2)?;
        check_state_action("r2_opp", &self.r2_opp, &n1)?;
        check_constraint("c1_own", &self.c1_own, &n1, self.p)?;
        check_constraint("c1_opp", &self.c1_opp, &n2, self.p)?;
        check_constraint("c2_own", &self.c2_own, &n2, self.p)?;
        check_constraint("c2_opp", &self.c2_opp, &n1, self.p)?;
        check_density("q1", &self.q1, &n1)?;
        check_density("q2", &self.q2, &n2)?;
        Ok(())
    }

    /// Fails with [`Error::InvalidInstance`] unless [`validate`] passes.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate(self);
        if report.ok {
            Ok(())
        } else {
            Err(Error::InvalidInstance(report))
        }
    }

    /// The same game with a different initial distribution and constraint levels.
    pub fn with_initial_and_levels(&self, eta: Vec<f64>, rho1: Vec<f64>, rho2: Vec<f64>) -> Self {
        GameInstance {
            eta,
            rho1,
            rho2,
            ..self.clone()
        }
    }
}

fn check_vector(field: &str, v: &[f64], len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::shape(field, format!("expected length {len}, found {}", v.len())));
    }
    if let Some(i) = v.iter().position(|e| !e.is_finite()) {
        return Err(Error::shape(format!("{field}[{i}]"), "not a finite number"));
    }
    Ok(())
}

fn check_state_action(field: &str, t: &StateActionTable, n_actions: &[usize]) -> Result<()> {
    if t.len() != n_actions.len() {
        return Err(Error::shape(
            field,
            format!("expected {} states, found {}", n_actions.len(), t.len()),
        ));
    }
    for (x, (row, &na)) in t.iter().zip(n_actions).enumerate() {
        check_vector(&format!("{field}[{x}]"), row, na)?;
    }
    Ok(())
}

fn check_constraint(field: &str, t: &ConstraintTable, n_actions: &[usize], p: usize) -> Result<()> {
    if t.len() != n_actions.len() {
        return Err(Error::shape(
            field,
            format!("expected {} states, found {}", n_actions.len(), t.len()),
        ));
    }
    for (x, (row, &na)) in t.iter().zip(n_actions).enumerate() {
        if row.len() != na {
            return Err(Error::shape(
                format!("{field}[{x}]"),
                format!("expected {na} actions, found {}", row.len()),
            ));
        }
        for (a, v) in row.iter().enumerate() {
            check_vector(&format!("{field}[{x}][{a}]"), v, p)?;
        }
    }
    Ok(())
}

fn check_density(field: &str, t: &DensityTable, n_actions: &[usize]) -> Result<()> {
    let nx = n_actions.len();
    if t.len() != nx {
        return Err(Error::shape(field, format!("expected {nx} target states, found {}", t.len())));
    }
    for (y, by_x) in t.iter().enumerate() {
        if by_x.len() != nx {
            return Err(Error::shape(
                format!("{field}[{y}]"),
                format!("expected {nx} source states, found {}", by_x.len()),
            ));
        }
        for (x, (row, &na)) in by_x.iter().zip(n_actions).enumerate() {
            check_vector(&format!("{field}[{y}][{x}]"), row, na)?;
        }
    }
    Ok(())
}

/// Full transition table `Q(y | x, a1, a2)`, indexed `[x][a1][a2][y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    pub probs: Vec<Vec<Vec<Vec<f64>>>>,
}

impl TransitionKernel {
    pub fn slice(&self, x: usize, a1: usize, a2: usize) -> &[f64] {
        &self.probs[x][a1][a2]
    }

    pub fn get(&self, y: usize, x: usize, a1: usize, a2: usize) -> f64 {
        self.probs[x][a1][a2][y]
    }
}

/// `Q(y | x, a1, a2) = q1(y, x, a1) + q2(y, x, a2)`.
pub fn assemble_kernel(instance: &GameInstance) -> Result<TransitionKernel> {
    instance.ensure_valid()?;
    let nx = instance.n_states();
    let probs = (0..nx)
        .map(|x| {
            (0..instance.actions1[x].len())
                .map(|a1| {
                    (0..instance.actions2[x].len())
                        .map(|a2| {
                            (0..nx)
                                .map(|y| instance.q1[y][x][a1] + instance.q2[y][x][a2])
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(TransitionKernel { probs })
}

/// Joint table `[x][a1][a2]`.
pub type JointTable = Vec<Vec<Vec<f64>>>;

/// `r_i(x, a1, a2) = r_i^1(x, a1) + r_i^2(x, a2)`.
pub fn assemble_reward(instance: &GameInstance, player: Player) -> Result<JointTable> {
    instance.ensure_valid()?;
    let (by_a1, by_a2) = match player {
        Player::One => (&instance.r1_own, &instance.r1_opp),
        Player::Two => (&instance.r2_opp, &instance.r2_own),
    };
    Ok(by_a1
        .iter()
        .zip(by_a2)
        .map(|(r1, r2)| r1.iter().map(|u| r2.iter().map(|v| u + v).collect()).collect())
        .collect())
}

/// `c_i(x, a1, a2) = c_i^1(x, a1) + c_i^2(x, a2)`, indexed `[x][a1][a2][k]`.
pub fn assemble_constraint(instance: &GameInstance, player: Player) -> Result<Vec<JointTable>> {
    instance.ensure_valid()?;
    let (by_a1, by_a2) = match player {
        Player::One => (&instance.c1_own, &instance.c1_opp),
        Player::Two => (&instance.c2_opp, &instance.c2_own),
    };
    Ok(by_a1
        .iter()
        .zip(by_a2)
        .map(|(c1, c2)| {
            c1.iter()
                .map(|u| {
                    c2.iter()
                        .map(|v| u.iter().zip(v).map(|(a, b)| a + b).collect())
                        .collect()
                })
                .collect()
        })
        .collect())
}
