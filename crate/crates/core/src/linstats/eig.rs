//! Cyclic Jacobi eigensolver for real symmetric matrices.

use super::{LinStatsError, Matrix};

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;
const MAX_DIM: usize = 1024;

/// `S = Q Λ Qᵀ` with eigenvalues in descending order.
///
/// Each eigenvector (column of `vectors`) is signed so that its
/// largest-magnitude entry is positive; among entries tied for the largest
/// magnitude the first one decides.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition {
    pub vectors: Matrix,
    pub values: Vec<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.vectors.column(j)
    }

    pub fn reconstruct(&self) -> Matrix {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for i in 0..n {
            for j in 0..n {
                scaled.set(i, j, self.vectors.get(i, j) * self.values[j]);
            }
        }
        scaled.matmul(&self.vectors.transpose())
    }
}

pub fn sym_eig(s: &Matrix) -> Result<EigenDecomposition, LinStatsError> {
    if !s.is_square() {
        return Err(LinStatsError::DimensionMismatch {
            expected: s.rows(),
            found: s.cols(),
        });
    }
    let n = s.rows();
    if n > MAX_DIM {
        return Err(LinStatsError::TooLarge { dim: n, max: MAX_DIM });
    }
    let scale = s.max_abs();
    if !scale.is_finite() {
        return Err(LinStatsError::NonFinite);
    }
    if !s.is_symmetric(SYMMETRY_TOL * scale.max(1.0)) {
        return Err(LinStatsError::NotSymmetric);
    }

    let mut a = s.clone();
    a.symmetrize();
    let mut v = Matrix::identity(n);
    let norm = a.frobenius_norm();
    let target = OFF_DIAGONAL_TOL * norm;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > target {
        return Err(LinStatsError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their diagonal order
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)));
    let values: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = v.column(src);
        let sign = canonical_sign(&col);
        for (i, c) in col.iter().enumerate() {
            vectors.set(i, dst, sign * c);
        }
    }
    Ok(EigenDecomposition { vectors, values })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a.get(i, j) * a.get(i, j);
            }
        }
    }
    acc.sqrt()
}

// Annihilates a[p][q] by A <- Jᵀ A J and accumulates V <- V J.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    if apq == 0.0 {
        return;
    }
    let n = a.rows();
    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
    let t = if theta == 0.0 {
        1.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    for k in 0..n {
        let (akp, akq) = (a.get(k, p), a.get(k, q));
        a.set(k, p, c * akp - s * akq);
        a.set(k, q, s * akp + c * akq);
    }
    for k in 0..n {
        let (apk, aqk) = (a.get(p, k), a.get(q, k));
        a.set(p, k, c * apk - s * aqk);
        a.set(q, k, s * apk + c * aqk);
    }
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);
    for k in 0..n {
        let (vkp, vkq) = (v.get(k, p), v.get(k, q));
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

fn canonical_sign(col: &[f64]) -> f64 {
    let max = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // entries within rounding of the maximum count as ties
    let tie = max * (1.0 - 1e-9);
    match col.iter().find(|v| v.abs() >= tie) {
        Some(&v) if v < 0.0 => -1.0,
        _ => 1.0,
    }
}
