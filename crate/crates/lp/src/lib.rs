//! Solver back end for the supply-chain design models: a bounded-variable
//! revised simplex, a branch-and-bound driver over integer columns and a
//! fixed-format MPS reader/writer.

pub mod branch;
pub mod error;
pub mod lu;
pub mod mps;
pub mod options;
pub mod problem;
pub mod simplex;

pub use branch::{solve_mip, solve_mip_with_start, MipResult, MipStatus};
pub use error::LpError;
pub use options::{Branching, SolverOptions};
pub use problem::{Problem, Relation, Row};
pub use simplex::{dual_objective, solve_lp, LpResult, LpStatus};
