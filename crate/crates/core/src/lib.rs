//! Leakage-safe validation of PLS-family models. Every learnable step sees
//! build rows only.

pub mod dataset;
pub mod engine;
pub mod error;
pub mod figures;
pub mod matrix;
pub mod metrics;
pub mod plotdata;
pub mod pls;
pub mod preproc;
pub mod rng;
pub mod simgen;
pub mod split;

pub use dataset::{load_dataset, ColumnRef, Dataset};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::RngStream;
