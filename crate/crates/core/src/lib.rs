//! Multiaccuracy post-processing for multigroup-robust binary predictors.

pub mod attacks;
pub mod boost;
pub mod domain;
pub mod error;
pub mod harness;
pub mod io;
pub mod learners;
pub mod metrics;
pub mod numeric;
pub mod rng;

pub use error::{Error, Result};
pub use numeric::Scalar;

pub type Patched = domain::PatchedPredictor<f64>;
pub type Patched32 = domain::PatchedPredictor<f32>;
pub type Trace = boost::BoostTrace<f64>;
pub type Trace32 = boost::BoostTrace<f32>;
pub type Report = metrics::GroupReport<f64>;
pub type Check = metrics::RobustnessCheck<f64>;
