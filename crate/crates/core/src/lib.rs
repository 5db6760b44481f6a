//! Shapley value estimation with fidelity and fairness diagnostics.

pub mod coalition;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod experiment;
pub mod fairness;
pub mod game;
pub mod proposal;
pub mod sampler;

pub use coalition::Coalition;
pub use error::{Error, Result};
pub use estimators::{run_estimator, EstimationResult, EstimatorConfig, EstimatorKind, SeedKey};
pub use game::{CooperativeGame, Utility};
