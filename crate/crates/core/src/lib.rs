//! Weakly supervised transductive regression with Gaussian labels and a
//! low-rank co-association graph Laplacian, plus the kernel baseline,
//! synthetic and tabular data, metrics and a Monte-Carlo harness.

pub mod datagen;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod kernels;
pub mod linalg;
pub mod metrics;
mod par;
pub mod regression;
pub mod seed;

pub use error::{Error, Result};
pub use par::is_parallel;
