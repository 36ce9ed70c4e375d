//! Clustering of vector time series by their underlying autoregressive
//! dynamics.
//!
//! The library fits a mixture of Gaussian VAR models across a set of
//! series. Two algorithms are provided: a soft-clustering EM procedure
//! (`cmvar`) and its small-noise-limit hard-clustering counterpart
//! (`klmvar`), which scales to problem sizes where the EM responsibilities
//! underflow. Around them sit BIC-based model selection (`modelsel`),
//! external clustering metrics (`metrics`), a stable-VAR synthetic data
//! generator (`datagen`) and file formats (`io`).

pub mod cmvar;
pub mod datagen;
pub mod design;
pub mod error;
pub mod io;
pub mod klmvar;
pub mod metrics;
pub mod modelsel;
pub mod twostep;
pub mod types;
pub mod varfit;

pub use error::{Error, Result};
pub use types::{Assignment, MixtureParams, TimeSeries, TimeSeriesSet, VarComponent};
