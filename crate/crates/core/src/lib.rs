//! Model-based clustering of matrix-variate (three-way) data with iterative
//! outlier trimming.
//!
//! The pieces, bottom up:
//!
//! * [`matnorm`]: the matrix-variate normal density, Mahalanobis distance and
//!   sampler.
//! * [`em`]: EM for G-component mixtures of matrix-variate normals.
//! * [`nullmodel`]: leave-one-out log-likelihood differences, their
//!   shifted-gamma reference mixture and a histogram KL divergence.
//! * [`trimmer`]: the trimming loop that removes the most likely outlier one
//!   at a time and keeps the iteration with minimal KL.
//! * [`simgen`], [`metrics`], [`io`]: simulation designs, evaluation and file
//!   formats.

pub mod dataset;
pub mod em;
pub mod error;
pub mod io;
pub mod kmeans;
pub mod linalg;
pub mod matnorm;
pub mod metrics;
pub mod nullmodel;
pub mod rng;
pub mod simgen;
pub mod trimmer;

pub use dataset::DataSet;
pub use em::{fit, FitConfig, FitResult, MixtureModel, Responsibilities};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use matnorm::{ComponentParams, ObsMatrix};
pub use rng::SeededRng;
pub use trimmer::{run_oclust, OclustOptions, OclustResult};
