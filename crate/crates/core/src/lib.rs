//! Locality and free-choice measures for two-party, two-outcome Bell
//! experiments.
//!
//! The crate covers behaviours and their validation, the CHSH expressions,
//! the non-signalling polytope and the local-content linear program,
//! explicit hidden-variable models, quantum behaviours of two-qubit states,
//! and Monte Carlo simulation of models.

pub mod behaviour;
pub mod chsh;
pub mod cli;
pub mod error;
pub mod hvmodel;
pub mod lp;
pub mod polytope;
pub mod quantum;
pub mod schema;
pub mod sim;

pub use behaviour::{Behaviour, SettingsDistribution, Tolerance};
pub use error::{BellError, Result};
pub use hvmodel::HvModel;
