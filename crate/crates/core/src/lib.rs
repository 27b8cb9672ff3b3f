//! Tiny time series forecasting stack: synthetic data generation, causal
//! rolling normalization with drift features, a patched encoder model with
//! hand-written backpropagation, dense next-token training, inference-time
//! ensembling and a seasonal-naive evaluation harness.

pub mod dart_norm;
pub mod error;
pub mod harness;
pub mod inference;
pub mod model;
pub mod rng;
pub mod series;
pub mod synthts;
pub mod training;

pub use error::{Error, Result};
pub use series::TimeSeries;
