//! Two independent exact solvers for re-scheduling problems: a
//! branch-and-bound search used everywhere, and a brute-force enumeration
//! oracle used to cross-check it on small instances.

mod bnb;
mod oracle;

pub use bnb::{solve, Budget, Solution, SolveError, SolveStats};
pub use oracle::{brute_force_oracle, OracleError};
