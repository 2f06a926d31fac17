//! Segmented compressive sampling.
//!
//! Builds sampling matrices whose extra rows are assembled from permuted
//! segments of the original rows, evaluates the closed-form covariance,
//! capacity and sampling-rate bounds for the resulting correlated samples,
//! and checks those closed forms against numeric and Monte Carlo
//! references.

pub mod bounds;
pub mod covariance;
pub mod error;
pub mod export;
pub mod linalg;
pub mod model;
pub mod permgroup;
pub mod recovery;
pub mod rng;
pub mod sampler;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Extension, Ratio};
