//! Decorrelation and whitening of feature vectors given `Σ = QΛQᵀ`.

use super::{EigenDecomposition, LinStatsError, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransformMode {
    /// `Qᵀ`
    Decorrelate,
    /// `Λ^{-1/2} Qᵀ`
    PcaWhiten,
    /// `Q Λ^{-1/2} Qᵀ`
    ZcaWhiten,
}

impl TransformMode {
    pub const ALL: [TransformMode; 3] = [TransformMode::Decorrelate, TransformMode::PcaWhiten, TransformMode::ZcaWhiten];

    pub fn name(self) -> &'static str {
        match self {
            TransformMode::Decorrelate => "decorrelate",
            TransformMode::PcaWhiten => "pca_whiten",
            TransformMode::ZcaWhiten => "zca_whiten",
        }
    }
}

fn inv_sqrt_values(eig: &EigenDecomposition) -> Result<Vec<f64>, LinStatsError> {
    eig.values
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if value > 0.0 {
                Ok(1.0 / value.sqrt())
            } else {
                Err(LinStatsError::NonPositiveEigenvalue { index, value })
            }
        })
        .collect()
}

/// The transform matrix `M` of `x' = M x`.
pub fn transform_matrix(eig: &EigenDecomposition, mode: TransformMode) -> Result<Matrix, LinStatsError> {
    let qt = eig.vectors.transpose();
    match mode {
        TransformMode::Decorrelate => Ok(qt),
        TransformMode::PcaWhiten => {
            let s = inv_sqrt_values(eig)?;
            Ok(Matrix::from_fn(qt.rows(), qt.cols(), |i, j| s[i] * qt.get(i, j)))
        }
        TransformMode::ZcaWhiten => {
            let s = inv_sqrt_values(eig)?;
            let scaled = Matrix::from_fn(qt.rows(), qt.cols(), |i, j| s[i] * qt.get(i, j));
            let mut w = eig.vectors.matmul(&scaled);
            w.symmetrize();
            Ok(w)
        }
    }
}

/// Applies the transform to every sample.
///
/// PCA whitening is computed as the decorrelated vector scaled elementwise
/// by `λ_j^{-1/2}`, so its output is exactly a per-coordinate positive
/// rescaling of the decorrelated output.
pub fn transform_features(samples: &[Vec<f64>], eig: &EigenDecomposition, mode: TransformMode) -> Result<Vec<Vec<f64>>, LinStatsError> {
    let d = eig.dim();
    if let Some(bad) = samples.iter().find(|s| s.len() != d) {
        return Err(LinStatsError::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    let qt = eig.vectors.transpose();
    match mode {
        TransformMode::Decorrelate => Ok(samples.iter().map(|x| qt.mul_vec(x)).collect()),
        TransformMode::PcaWhiten => {
            let s = inv_sqrt_values(eig)?;
            Ok(samples
                .iter()
                .map(|x| qt.mul_vec(x).iter().zip(&s).map(|(v, s)| v * s).collect())
                .collect())
        }
        TransformMode::ZcaWhiten => {
            let w = transform_matrix(eig, mode)?;
            Ok(samples.iter().map(|x| w.mul_vec(x)).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linstats::{lda_direction, sym_eig, window_covariance, LdaInputs};
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn correlated_samples(n: usize, seed: u64) -> Vec<Vec<f64>> {
        // Σ = [[2,1],[1,2]] = A Aᵀ with A = [[a, b], [b, a]]
        let a = (3f64.sqrt() + 1.0) / 2.0;
        let b = (3f64.sqrt() - 1.0) / 2.0;
        let mut r = rng::stream(seed, "transform-samples");
        (0..n)
            .map(|_| {
                let u: f64 = r.sample(StandardNormal);
                let v: f64 = r.sample(StandardNormal);
                vec![a * u + b * v, b * u + a * v]
            })
            .collect()
    }

    fn cov(samples: &[Vec<f64>]) -> Matrix {
        window_covariance(samples, samples[0].len(), 1).unwrap().cov
    }

    #[test]
    fn identity_eigensystem_is_identity_transform() {
        let eig = EigenDecomposition {
            vectors: Matrix::identity(3),
            values: vec![1.0; 3],
        };
        let x = vec![vec![1.5, -2.0, 0.25]];
        for mode in TransformMode::ALL {
            assert_eq!(transform_features(&x, &eig, mode).unwrap(), x);
        }
    }

    #[test]
    fn whitening_yields_identity_covariance() {
        let samples = correlated_samples(100_000, 1);
        let eig = sym_eig(&cov(&samples)).unwrap();
        for mode in [TransformMode::PcaWhiten, TransformMode::ZcaWhiten] {
            let out = transform_features(&samples, &eig, mode).unwrap();
            assert!(cov(&out).max_abs_diff(&Matrix::identity(2)) <= 0.05, "{mode:?}");
        }
        let zca = transform_matrix(&eig, TransformMode::ZcaWhiten).unwrap();
        assert!(zca.is_symmetric(0.0));
    }

    #[test]
    fn pca_is_rescaled_decorrelation() {
        let samples = correlated_samples(200, 2);
        let eig = sym_eig(&Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]])).unwrap();
        let dec = transform_features(&samples, &eig, TransformMode::Decorrelate).unwrap();
        let pca = transform_features(&samples, &eig, TransformMode::PcaWhiten).unwrap();
        for (d, p) in dec.iter().zip(&pca) {
            for j in 0..2 {
                assert_eq!(p[j], d[j] * (1.0 / eig.values[j].sqrt()));
            }
        }
    }

    #[test]
    fn lda_on_whitened_data_is_mean_difference() {
        let samples = correlated_samples(20_000, 3);
        let eig = sym_eig(&cov(&samples)).unwrap();
        let pos: Vec<Vec<f64>> = samples.iter().map(|x| vec![x[0] + 0.3, x[1] - 0.3]).collect();
        let wpos = transform_features(&pos, &eig, TransformMode::ZcaWhiten).unwrap();
        let wneg = transform_features(&samples, &eig, TransformMode::ZcaWhiten).unwrap();
        let mean = |s: &[Vec<f64>]| -> Vec<f64> {
            (0..2).map(|j| s.iter().map(|x| x[j]).sum::<f64>() / s.len() as f64).collect()
        };
        let (mp, mn) = (mean(&wpos), mean(&wneg));
        let w = lda_direction(&LdaInputs {
            mu_pos: mp.clone(),
            mu_neg: mn.clone(),
            sigma: Matrix::identity(2),
            epsilon: 0.0,
        })
        .unwrap();
        assert_eq!(w, vec![mp[0] - mn[0], mp[1] - mn[1]]);
    }

    #[test]
    fn whitening_rejects_singular_spectrum() {
        let eig = EigenDecomposition {
            vectors: Matrix::identity(2),
            values: vec![1.0, 0.0],
        };
        assert!(transform_features(&[vec![1.0, 1.0]], &eig, TransformMode::Decorrelate).is_ok());
        assert!(matches!(
            transform_features(&[vec![1.0, 1.0]], &eig, TransformMode::PcaWhiten),
            Err(LinStatsError::NonPositiveEigenvalue { index: 1, .. })
        ));
    }
}
