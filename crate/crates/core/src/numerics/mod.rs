//! Dense linear algebra and linear programming used by the game solvers.

mod linear;
mod simplex;

pub use linear::{residual_max_norm, solve_linear, LinearError, PIVOT_TOLERANCE};
pub use simplex::{
    lp_solve, LinearRow, LpError, LpProblem, LpSolution, LpStatus, FEASIBILITY_TOLERANCE,
    OPTIMALITY_TOLERANCE,
};
