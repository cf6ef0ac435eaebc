//! Resilient green supply-chain design as a two-stage stochastic MILP.
//!
//! [`instance`] holds the data model, [`generate`] the seeded synthetic
//! instances, [`model`] the deterministic-equivalent formulation, [`solve`]
//! the solver front end and solution reports, [`oracle`] an exhaustive
//! reference optimizer for tiny instances and [`analysis`] parameter sweeps.

pub mod analysis;
pub mod error;
pub mod generate;
pub mod instance;
pub mod model;
pub mod oracle;
pub mod solve;

pub use error::CoreError;
