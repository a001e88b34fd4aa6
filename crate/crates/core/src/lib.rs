pub mod assignment;
pub mod baselines;
pub mod client_update;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod kmeans;
pub mod metrics;
pub mod pipeline;
pub mod radius;
pub mod rng;
pub mod server;

pub use error::{Error, Result};
