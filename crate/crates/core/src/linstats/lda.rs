//! Regularized LDA direction `w = ((1-ε)Σ + εI)⁻¹ (μ₊ - μ₋)`.

use super::{LinStatsError, Matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct LdaInputs {
    pub mu_pos: Vec<f64>,
    pub mu_neg: Vec<f64>,
    pub sigma: Matrix,
    pub epsilon: f64,
}

pub fn lda_direction(input: &LdaInputs) -> Result<Vec<f64>, LinStatsError> {
    let d = input.mu_pos.len();
    if input.mu_neg.len() != d {
        return Err(LinStatsError::DimensionMismatch {
            expected: d,
            found: input.mu_neg.len(),
        });
    }
    if input.sigma.rows() != d || input.sigma.cols() != d {
        return Err(LinStatsError::DimensionMismatch {
            expected: d,
            found: input.sigma.rows(),
        });
    }
    if !input.sigma.is_symmetric(1e-12 * input.sigma.max_abs().max(1.0)) {
        return Err(LinStatsError::NotSymmetric);
    }
    lda_solve(&input.mu_pos, &input.mu_neg, input.sigma.data(), input.epsilon)
}

/// Same as [`lda_direction`] on a flat row-major `d×d` covariance, without
/// input validation. Used on hot paths.
pub fn lda_solve(mu_pos: &[f64], mu_neg: &[f64], sigma: &[f64], epsilon: f64) -> Result<Vec<f64>, LinStatsError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(LinStatsError::InvalidEpsilon(epsilon));
    }
    let diff: Vec<f64> = mu_pos.iter().zip(mu_neg).map(|(p, n)| p - n).collect();
    if epsilon == 1.0 {
        return Ok(diff);
    }
    let d = diff.len();
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut v = (1.0 - epsilon) * sigma[i * d + j];
            if i == j {
                v += epsilon;
            }
            a[i * d + j] = v;
        }
    }
    solve_symmetric(&a, &diff, d)
}

/// Solves `A x = b` for symmetric `A`: LDLᵀ when `A` is positive definite,
/// otherwise LU with partial pivoting. One refinement step is applied when
/// the residual is not already at rounding level.
pub fn solve_symmetric(a: &[f64], b: &[f64], d: usize) -> Result<Vec<f64>, LinStatsError> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x = match ldl_solve(a, b, d, scale) {
        Some(x) => x,
        None => lu_solve(a, b, d, scale)?,
    };
    let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let r = residual(a, &x, b, d);
    let rnorm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if rnorm > 1e-13 * bnorm {
        let dx = match ldl_solve(a, &r, d, scale) {
            Some(dx) => dx,
            None => lu_solve(a, &r, d, scale)?,
        };
        let refined: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let r2 = residual(a, &refined, b, d);
        if r2.iter().fold(0.0f64, |m, v| m.max(v.abs())) < rnorm {
            x = refined;
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LinStatsError::SingularSystem);
    }
    Ok(x)
}

fn residual(a: &[f64], x: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| b[i] - a[i * d..(i + 1) * d].iter().zip(x).map(|(p, q)| p * q).sum::<f64>())
        .collect()
}

fn ldl_solve(a: &[f64], b: &[f64], d: usize, scale: f64) -> Option<Vec<f64>> {
    let tiny = scale * 1e-14 * d.max(1) as f64;
    let mut l = vec![0.0; d * d];
    let mut diag = vec![0.0; d];
    for j in 0..d {
        let mut dj = a[j * d + j];
        for k in 0..j {
            dj -= l[j * d + k] * l[j * d + k] * diag[k];
        }
        if !(dj > tiny) {
            return None;
        }
        diag[j] = dj;
        l[j * d + j] = 1.0;
        for i in j + 1..d {
            let mut v = a[i * d + j];
            for k in 0..j {
                v -= l[i * d + k] * l[j * d + k] * diag[k];
            }
            l[i * d + j] = v / dj;
        }
    }
    let mut y = b.to_vec();
    for i in 0..d {
        for k in 0..i {
            y[i] -= l[i * d + k] * y[k];
        }
    }
    for i in 0..d {
        y[i] /= diag[i];
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            y[i] -= l[k * d + i] * y[k];
        }
    }
    Some(y)
}

fn lu_solve(a: &[f64], b: &[f64], d: usize, scale: f64) -> Result<Vec<f64>, LinStatsError> {
    let tiny = scale * f64::EPSILON * d.max(1) as f64;
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..d {
        let piv = (col..d)
            .max_by(|&i, &j| m[i * d + col].abs().total_cmp(&m[j * d + col].abs()))
            .unwrap_or(col);
        if !(m[piv * d + col].abs() > tiny) {
            return Err(LinStatsError::SingularSystem);
        }
        if piv != col {
            for k in 0..d {
                m.swap(piv * d + k, col * d + k);
            }
            x.swap(piv, col);
        }
        let p = m[col * d + col];
        for i in col + 1..d {
            let f = m[i * d + col] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..d {
                m[i * d + k] -= f * m[col * d + k];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            x[i] -= m[i * d + k] * x[k];
        }
        x[i] /= m[i * d + i];
    }
    Ok(x)
}
