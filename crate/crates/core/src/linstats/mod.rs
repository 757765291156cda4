//! Second-order statistics: autocorrelation, covariances, eigendecomposition,
//! LDA directions and whitening.

mod autocorr;
mod covariance;
mod eig;
mod lda;
mod matrix;
mod text;
mod transform;

use thiserror::Error;

pub use autocorr::{estimate_autocorr_brute, estimate_autocorr_fft, Autocorrelation};
pub use covariance::{
    extract_local_sigma, patch_covariance, patch_covariance_raw, psd_repair, rect_patch_covariance, window_covariance,
    WindowCovariance,
};
pub use eig::{sym_eig, EigenDecomposition};
pub use lda::{lda_direction, lda_solve, solve_symmetric, LdaInputs};
pub use matrix::Matrix;
pub use text::{format_autocorr, parse_autocorr};
pub use transform::{transform_features, transform_matrix, TransformMode};

#[derive(Debug, Error)]
pub enum LinStatsError {
    #[error("no images supplied")]
    EmptyImageList,
    #[error("plane {width}x{height} is smaller than the required {min}x{min}")]
    PlaneTooSmall { width: usize, height: usize, min: usize },
    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),
    #[error("offset {offset} exceeds autocorrelation radius {radius}")]
    OffsetOutOfRange { offset: usize, radius: usize },
    #[error("invalid patch size {0}: must be odd and at least 1")]
    InvalidPatchSize(usize),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("patch {ph}x{pw} at ({top},{left}) does not fit a {height}x{width} window")]
    PatchOutOfBounds {
        top: usize,
        left: usize,
        ph: usize,
        pw: usize,
        height: usize,
        width: usize,
    },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix contains non-finite values")]
    NonFinite,
    #[error("dimension {dim} exceeds the eigensolver limit {max}")]
    TooLarge { dim: usize, max: usize },
    #[error("eigensolver did not converge in {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("regularization epsilon {0} outside [0, 1]")]
    InvalidEpsilon(f64),
    #[error("linear system is singular")]
    SingularSystem,
    #[error("eigenvalue {value} at index {index} is not positive")]
    NonPositiveEigenvalue { index: usize, value: f64 },
    #[error("autocorrelation format: {0}")]
    Format(String),
}
