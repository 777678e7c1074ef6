use serde::{Deserialize, Serialize};

use super::{GameInstance, Player};
use crate::error::Error;

/// Tolerance on every probability sum checked by [`validate`].
pub const STOCHASTIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationCode {
    StochasticityViolation,
    #[serde(rename = "ARATInconsistency")]
    AratInconsistency,
    EmptyActionSet,
    BadDiscount,
    BadInitialDistribution,
    NegativeDensity,
    /// Table lengths disagree with the state and action lists.
    ShapeMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub indices: Vec<usize>,
    pub residual: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport {
            ok: violations.is_empty(),
            violations,
        }
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn first(&self, code: ViolationCode) -> Option<&Violation> {
        self.violations.iter().find(|v| v.code == code)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        write!(f, "{} violation(s)", self.violations.len())?;
        for v in self.violations.iter().take(5) {
            write!(f, "; {:?} at {:?}: {} (residual {:e})", v.code, v.indices, v.detail, v.residual)?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of an ARAT instance and reports all
/// violations found. Shape errors stop the check early since the remaining
/// checks index into the tables.
pub fn validate(instance: &GameInstance) -> ValidationReport {
    let mut out = Vec::new();
    if let Err(Error::Shape { field, message }) = instance.check_shape() {
        out.push(Violation {
            code: ViolationCode::ShapeMismatch,
            indices: vec![],
            residual: 0.0,
            detail: format!("{field}: {message}"),
        });
        return ValidationReport::from_violations(out);
    }

    let beta = instance.beta;
    if !(beta > 0.0 && beta < 1.0) {
        out.push(Violation {
            code: ViolationCode::BadDiscount,
            indices: vec![],
            residual: if beta <= 0.0 { -beta } else { beta - 1.0 },
            detail: format!("beta = {beta} is outside (0, 1)"),
        });
    }

    for (x, &e) in instance.eta.iter().enumerate() {
        if e < 0.0 {
            out.push(Violation {
                code: ViolationCode::BadInitialDistribution,
                indices: vec![x],
                residual: -e,
                detail: format!("eta[{x}] = {e} is negative"),
            });
        }
    }
    let mass: f64 = instance.eta.iter().sum();
    if (mass - 1.0).abs() > STOCHASTIC_TOLERANCE {
        out.push(Violation {
            code: ViolationCode::BadInitialDistribution,
            indices: vec![],
            residual: (mass - 1.0).abs(),
            detail: format!("eta sums to {mass}"),
        });
    }

    let nx = instance.n_states();
    for player in Player::BOTH {
        for x in 0..nx {
            if instance.n_actions(player, x) == 0 {
                out.push(Violation {
                    code: ViolationCode::EmptyActionSet,
                    indices: vec![player.index() + 1, x],
                    residual: 0.0,
                    detail: format!("player {player} has no action at state {x}"),
                });
            }
        }
        for (y, by_x) in instance.density(player).iter().enumerate() {
            for (x, row) in by_x.iter().enumerate() {
                for (a, &q) in row.iter().enumerate() {
                    if q < 0.0 {
                        out.push(Violation {
                            code: ViolationCode::NegativeDensity,
                            indices: vec![player.index() + 1, y, x, a],
                            residual: -q,
                            detail: format!("q{player}[{y}][{x}][{a}] = {q}"),
                        });
                    }
                }
            }
        }
    }

    // Row masses s_i(x, a_i) = sum_y q_i(y, x, a_i).
    let row_mass = |player: Player, x: usize| -> Vec<f64> {
        let q = instance.density(player);
        (0..instance.n_actions(player, x))
            .map(|a| (0..nx).map(|y| q[y][x][a]).sum())
            .collect()
    };
    for x in 0..nx {
        let s1 = row_mass(Player::One, x);
        let s2 = row_mass(Player::Two, x);
        for (player, s) in [(Player::One, &s1), (Player::Two, &s2)] {
            if s.len() < 2 {
                continue;
            }
            let (lo_a, lo) = argmin(s);
            let (hi_a, hi) = argmax(s);
            if hi - lo > STOCHASTIC_TOLERANCE {
                out.push(Violation {
                    code: ViolationCode::AratInconsistency,
                    indices: vec![player.index() + 1, x, lo_a, hi_a],
                    residual: hi - lo,
                    detail: format!(
                        "row mass of q{player} at state {x} ranges over [{lo}, {hi}]"
                    ),
                });
            }
        }
        for (a1, m1) in s1.iter().enumerate() {
            for (a2, m2) in s2.iter().enumerate() {
                let residual = (m1 + m2 - 1.0).abs();
                if residual > STOCHASTIC_TOLERANCE {
                    out.push(Violation {
                        code: ViolationCode::StochasticityViolation,
                        indices: vec![x, a1, a2],
                        residual,
                        detail: format!("Q(.|{x},{a1},{a2}) sums to {}", m1 + m2),
                    });
                }
            }
        }
    }

    ValidationReport::from_violations(out)
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
}
