//! Locally decorrelated channel features (LDCF) for boosted sliding-window
//! detection.
//!
//! The crate is organised as a pipeline:
//!
//! - [`imgio`]: binary PPM/PGM images, plain-text box annotations, dataset
//!   directory scanning.
//! - [`channels`]: the ten aggregate channels (LUV, normalized gradient
//!   magnitude, six orientation bins) and block-mean aggregation.
//! - [`linstats`]: stationary autocorrelation estimation (FFT and
//!   brute-force), patch and window covariances, a Jacobi symmetric
//!   eigensolver, LDA directions and whitening transforms.
//! - [`filterbank`]: per-channel decorrelation filters derived from patch
//!   covariances, applied convolutionally.
//! - [`boost`]: decision trees with orthogonal or oblique (LDA) splits,
//!   RealBoost with bootstrapping, soft-cascade calibration.
//! - [`detect`]: multiscale sliding-window detection and NMS.
//! - [`eval`]: detection matching, miss rate vs FPPI, log-average miss rate.
//! - [`synthbench`]: orthogonal vs oblique and decorrelation experiments on
//!   correlated two-dimensional Gaussians.
//!
//! [`pipeline`] wires channels, filters, boosting and detection together for
//! dataset-level training, and [`synthdata`] generates the planted-pattern
//! dataset used for desk-scale end-to-end runs.

pub mod boost;
pub mod channels;
pub mod config;
pub mod detect;
pub mod eval;
pub mod filterbank;
pub mod imgio;
pub mod linstats;
pub mod pipeline;
pub mod rng;
pub mod synthbench;
pub mod synthdata;

mod error;

pub use error::{Error, ErrorKind, Result};
