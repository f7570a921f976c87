//! Range-based estimators of integrated variance from high-frequency prices,
//! their asymptotic theory, and the Monte Carlo machinery behind both.

pub mod asymptotics;
pub mod error;
pub mod estimators;
pub mod fmt;
pub mod ingestion;
pub mod lambda;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use estimators::{EstimateReport, EstimatorId, PowerVector, RangeEstimates, SampledGrid};
pub use lambda::{LambdaKey, LambdaTable};
