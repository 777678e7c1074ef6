//! Constrained two-player discounted Markov games with additive rewards and
//! additive transitions (ARAT) on finite state and action sets.
//!
//! The crate computes occupation measures of stationary profiles, constrained
//! best responses as linear programs over state-action marginals, and searches
//! for constrained Nash equilibria by damped best-response iteration. A Monte
//! Carlo simulator provides an independent check of the analytic quantities.
//!
//! ```
//! use arat_core::{generate_random, iterate, GeneratorConfig, IterationConfig};
//!
//! let game = generate_random(7, &GeneratorConfig::new(3, 2, 2, 1, 0.9)).unwrap();
//! let report = iterate(&game, &IterationConfig::default()).unwrap();
//! assert!(!report.converged || report.verification.passed);
//! ```

mod error;
pub mod best_response;
pub mod equilibrium;
pub mod model;
pub mod numerics;
pub mod occupation;
pub mod simulate;

pub use best_response::{constrained_best_response, slater_margin, BestResponse, BestResponseResult};
pub use equilibrium::{
    iterate, mix_restore_feasibility, perturbed_sequence, verify_epsilon_nash, EquilibriumReport, IterationConfig,
    NashVerification, PerturbationReport,
};
pub use error::{Error, Result};
pub use model::{generate_random, validate, GameInstance, GeneratorConfig, Player, ValidationReport};
pub use occupation::{occupation_measure, MarginalMeasure, OccupationMeasure, PolicyProfile, StationaryPolicy};
pub use simulate::{simulate, SimulationConfig, SimulationEstimate};
