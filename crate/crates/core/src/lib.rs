//! Exchange economies with asymmetric information over a finite state space.
//!
//! The crate models an economy as finitely many agent types (atomless types
//! standing for a continuum of small traders, atoms for large traders), each
//! with state-dependent utilities, endowments, an information partition and a
//! prior. On top of the model it provides:
//!
//! - [`walras`]: per-state demand, excess demand and equilibrium solving,
//!   assembled into a state-wise selection of prices and allocations;
//! - [`blocking`]: per-state fuzzy blocking searches, a brute-force grid
//!   oracle, and the ex-post core check;
//! - [`ree`]: Bayesian and maximin rational expectations verification;
//! - [`fine`]: communication partitions, fine blocking and the
//!   ex-post-to-fine certificate construction;
//! - [`partitions`]: the finite partition lattice and conditional expectation.

pub mod blocking;
pub mod error;
pub mod example;
pub mod fine;
pub mod generate;
mod improve;
pub mod model;
pub mod partitions;
pub mod ree;
mod simplex;
pub mod utility;
pub mod walras;

pub use error::{Error, Result};
pub use model::{
    aggregate_endowment, average_atoms, split_atoms, validate_economy, AgentType, Allocation,
    AssumptionReport, Economy, EconomyDesc, FuzzyCoalition, Kind, PriceSystem, StateSpace,
};
pub use partitions::Partition;
pub use utility::UtilitySpec;
