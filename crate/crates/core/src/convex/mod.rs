//! Reusable convex-optimization machinery shared by both scheme solvers:
//! the tangent lower bound on `log(1+z)`, arithmetic-geometric-mean
//! condensation, a log-space geometric-program solver, and projected
//! subgradient updates for dual multipliers.

mod agma;
mod dual;
mod gp;
mod scale;

pub use agma::agma_condense;
pub use dual::{subgradient_update, DualState};
pub use gp::{solve_gp, GpProblem, GpSolution, Monomial, Posynomial, VarId};
pub use scale::{scale_coeffs, ScaleCoeffs};
