//! Patch covariances from a stationary autocorrelation, and full-window
//! covariances estimated from samples.
//!
//! Patch pixels are indexed row-major: pixel `(px, py)` of a `ph×pw` patch
//! is index `py·pw + px`. The same order is used by filter reshaping and by
//! window flattening, so a patch covariance, a window covariance restricted
//! to a patch and a reshaped filter all share one coordinate system.

use super::{sym_eig, Autocorrelation, LinStatsError, Matrix};

const PSD_FLOOR: f64 = 1e-6;

/// `ph·pw × ph·pw` matrix with entry `C(px2 - px1, py2 - py1)`, before any
/// PSD repair. Exactly Toeplitz-block-Toeplitz.
pub fn patch_covariance_raw(ac: &Autocorrelation, channel: usize, ph: usize, pw: usize) -> Result<Matrix, LinStatsError> {
    if channel >= ac.labels().len() {
        return Err(LinStatsError::ChannelMismatch(format!(
            "channel index {channel} out of {} channels",
            ac.labels().len()
        )));
    }
    let reach = ph.max(pw).saturating_sub(1);
    if ph == 0 || pw == 0 {
        return Err(LinStatsError::InvalidPatchSize(0));
    }
    if reach > ac.radius() {
        return Err(LinStatsError::OffsetOutOfRange {
            offset: reach,
            radius: ac.radius(),
        });
    }
    let d = ph * pw;
    Ok(Matrix::from_fn(d, d, |i, j| {
        let (y1, x1) = ((i / pw) as isize, (i % pw) as isize);
        let (y2, x2) = ((j / pw) as isize, (j % pw) as isize);
        ac.get(channel, x2 - x1, y2 - y1).expect("offset within radius")
    }))
}

/// Clips negative eigenvalues to zero and adds `1e-6·λmax` to the diagonal.
/// Matrices that are already PSD are returned unchanged.
pub fn psd_repair(s: &Matrix) -> Result<Matrix, LinStatsError> {
    let mut s = s.clone();
    s.symmetrize();
    let eig = sym_eig(&s)?;
    if eig.values.iter().all(|&v| v >= 0.0) {
        return Ok(s);
    }
    let lmax = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let clipped = super::EigenDecomposition {
        vectors: eig.vectors,
        values: eig.values.iter().map(|v| v.max(0.0)).collect(),
    };
    let mut out = clipped.reconstruct();
    out.symmetrize();
    for i in 0..out.rows() {
        out.set(i, i, out.get(i, i) + PSD_FLOOR * lmax);
    }
    Ok(out)
}

/// `m²×m²` covariance of an `m×m` patch of channel `label`, PSD-repaired.
pub fn patch_covariance(ac: &Autocorrelation, label: &str, m: usize) -> Result<Matrix, LinStatsError> {
    if m == 0 || m % 2 == 0 {
        return Err(LinStatsError::InvalidPatchSize(m));
    }
    let channel = ac
        .channel_index(label)
        .ok_or_else(|| LinStatsError::ChannelMismatch(format!("no channel labelled {label:?}")))?;
    rect_patch_covariance(ac, channel, m, m)
}

/// Rectangular `ph×pw` variant of [`patch_covariance`] addressed by channel
/// index. Used where a patch is clipped by the window geometry.
pub fn rect_patch_covariance(ac: &Autocorrelation, channel: usize, ph: usize, pw: usize) -> Result<Matrix, LinStatsError> {
    psd_repair(&patch_covariance_raw(ac, channel, ph, pw)?)
}

/// Sample mean and unbiased covariance of flattened single-channel windows
/// of `height×width` pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowCovariance {
    pub mean: Vec<f64>,
    pub cov: Matrix,
    pub width: usize,
    pub height: usize,
}

pub fn window_covariance<S: AsRef<[f64]>>(samples: &[S], width: usize, height: usize) -> Result<WindowCovariance, LinStatsError> {
    let n = samples.len();
    if n < 2 {
        return Err(LinStatsError::TooFewSamples(n));
    }
    let d = width * height;
    for s in samples {
        if s.as_ref().len() != d {
            return Err(LinStatsError::DimensionMismatch {
                expected: d,
                found: s.as_ref().len(),
            });
        }
    }
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s.as_ref()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    // upper triangle accumulated, then mirrored
    let mut acc = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for s in samples {
        for ((c, v), m) in centered.iter_mut().zip(s.as_ref()).zip(&mean) {
            *c = v - m;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let row = &mut acc[i * d..(i + 1) * d];
            for j in i..d {
                row[j] += ci * centered[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    let mut cov = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = acc[i * d + j] / denom;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    Ok(WindowCovariance {
        mean,
        cov,
        width,
        height,
    })
}

/// Rows and columns of the window covariance belonging to the `ph×pw`
/// patch whose top-left pixel is `(top, left)`, in row-major patch order.
pub fn extract_local_sigma(wc: &WindowCovariance, top: usize, left: usize, ph: usize, pw: usize) -> Result<Matrix, LinStatsError> {
    if ph == 0 || pw == 0 || top + ph > wc.height || left + pw > wc.width {
        return Err(LinStatsError::PatchOutOfBounds {
            top,
            left,
            ph,
            pw,
            height: wc.height,
            width: wc.width,
        });
    }
    let idx: Vec<usize> = (0..ph * pw)
        .map(|k| (top + k / pw) * wc.width + left + k % pw)
        .collect();
    Ok(Matrix::from_fn(idx.len(), idx.len(), |i, j| wc.cov.get(idx[i], idx[j])))
}
