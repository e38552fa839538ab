//! Proximal maps and projections used by the stage solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, Error, Result};
use crate::linalg;

fn check_tau(tau: f64) -> Result<()> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("threshold must be finite and >= 0, got {tau}")))
    }
}

/// Singular value soft-thresholding, the prox of `τ‖·‖_*`.
pub fn svd_soft_threshold(b: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    check_tau(tau)?;
    if tau == 0.0 {
        return Ok(b.clone());
    }
    let d = linalg::svd(b)?;
    Ok(d.rebuild(|_, s| (s - tau).max(0.0)))
}

/// Row-wise group soft-thresholding, the prox of `τ‖·‖_{1,2}`.
pub fn row_soft_threshold(x: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    check_tau(tau)?;
    let mut out = x.clone();
    if tau == 0.0 {
        return Ok(out);
    }
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        let factor = if norm > tau { 1.0 - tau / norm } else { 0.0 };
        row *= factor;
    }
    Ok(out)
}

/// Best rank-`r` approximation in Frobenius norm (truncated SVD).
pub fn best_rank_r(b: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    let q = b.nrows().min(b.ncols());
    if r > q {
        return Err(dim_err(format!("rank {r} exceeds min dimension {q}")));
    }
    if r == q {
        return Ok(b.clone());
    }
    if r == 0 {
        return Ok(DMatrix::zeros(b.nrows(), b.ncols()));
    }
    let d = linalg::svd(b)?;
    Ok(d.rebuild(|i, s| if i < r { s } else { 0.0 }))
}

/// Indices of the `k` rows with the largest Euclidean norm, ties going to
/// the smaller index, returned in increasing order.
pub fn top_k_row_indices(x: &DMatrix<f64>, k: usize) -> Vec<usize> {
    let norms = linalg::row_norms(x);
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Frobenius projection onto matrices with at most `k` nonzero rows.
pub fn top_k_rows(x: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    if k > x.nrows() {
        return Err(dim_err(format!("k={k} exceeds {} rows", x.nrows())));
    }
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for i in top_k_row_indices(x, k) {
        out.row_mut(i).copy_from(&x.row(i));
    }
    Ok(out)
}

/// Euclidean projection of `v` onto the ball of `radius` around `center`.
pub fn project_l2_ball(v: &DVector<f64>, center: &DVector<f64>, radius: f64) -> Result<DVector<f64>> {
    if v.len() != center.len() {
        return Err(dim_err(format!("vector length {} vs center {}", v.len(), center.len())));
    }
    check_tau(radius)?;
    let diff = v - center;
    let dist = diff.norm();
    if dist <= radius {
        Ok(v.clone())
    } else {
        Ok(center + diff * (radius / dist))
    }
}

/// Matrix form of [`project_l2_ball`] in the Frobenius norm.
pub fn project_frobenius_ball(v: &DMatrix<f64>, center: &DMatrix<f64>, radius: f64) -> Result<DMatrix<f64>> {
    if v.shape() != center.shape() {
        return Err(dim_err(format!("shape {:?} vs center {:?}", v.shape(), center.shape())));
    }
    let p = project_l2_ball(&linalg::vec_of(v), &linalg::vec_of(center), radius)?;
    Ok(linalg::mat_of(&p, v.nrows(), v.ncols()))
}
