//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Thin SVD with singular values sorted in descending order.
#[derive(Debug, Clone)]
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

pub fn svd(a: &DMatrix<f64>) -> Result<SortedSvd> {
    let (rows, cols) = a.shape();
    let q = rows.min(cols);
    if q == 0 {
        return Ok(SortedSvd {
            u: DMatrix::zeros(rows, 0),
            s: Vec::new(),
            v_t: DMatrix::zeros(0, cols),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("SVD input contains non-finite entries".into()));
    }
    let (singular, u, v_t) = thin_svd(a).ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&i, &j| singular[j].total_cmp(&singular[i]));
    let s = order.iter().map(|&i| singular[i]).collect();
    let u = DMatrix::from_fn(rows, q, |r, c| u[(r, order[c])]);
    let v_t = DMatrix::from_fn(q, cols, |r, c| v_t[(order[r], c)]);
    Ok(SortedSvd { u, s, v_t })
}

fn thin_svd(a: &DMatrix<f64>) -> Option<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let (rows, cols) = a.shape();
    let m = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)]);
    let dec = m.thin_svd().ok()?;
    let (u, s, v) = (dec.U(), dec.S().column_vector(), dec.V());
    let q = rows.min(cols);
    Some((
        (0..q).map(|i| s[i]).collect(),
        DMatrix::from_fn(rows, q, |i, j| u[(i, j)]),
        DMatrix::from_fn(q, cols, |i, j| v[(j, i)]),
    ))
}

impl SortedSvd {
    /// `U diag(f(s)) Vᵀ`, skipping terms whose new value is zero.
    pub fn rebuild(&self, mut f: impl FnMut(usize, f64) -> f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.u.nrows(), self.v_t.ncols());
        for (i, &s) in self.s.iter().enumerate() {
            let t = f(i, s);
            if t != 0.0 {
                out.ger(t, &self.u.column(i), &self.v_t.row(i).transpose(), 1.0);
            }
        }
        out
    }
}

/// Largest eigenvalue of the symmetric part of `a` and a unit eigenvector.
pub fn top_eigenpair(a: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::Dimension(format!(
            "need a nonempty square matrix, got {:?}",
            a.shape()
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("eigen input contains non-finite entries".into()));
    }
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let dec = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let (u, s) = (dec.U(), dec.S().column_vector());
    Ok((s[n - 1], DVector::from_fn(n, |i, _| u[(i, n - 1)])))
}

pub fn singular_values(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(svd(a)?.s)
}

/// Number of singular values above `RANK_TOL * σ_max`.
pub fn numerical_rank(a: &DMatrix<f64>) -> Result<usize> {
    let s = singular_values(a)?;
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > RANK_TOL * top).count())
}

pub fn nuclear_norm(a: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(a)?.iter().sum())
}

pub fn row_norms(a: &DMatrix<f64>) -> Vec<f64> {
    a.row_iter().map(|r| r.norm()).collect()
}

/// Sum of row-wise Euclidean norms.
pub fn l12_norm(a: &DMatrix<f64>) -> f64 {
    row_norms(a).iter().sum()
}

pub fn nonzero_rows(a: &DMatrix<f64>) -> Vec<usize> {
    a.row_iter()
        .enumerate()
        .filter(|(_, r)| r.iter().any(|&x| x != 0.0))
        .map(|(i, _)| i)
        .collect()
}

pub fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub(crate) fn vec_of(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}

pub(crate) fn mat_of(v: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// `‖a − b‖_F / ‖b‖_F`, or the absolute distance when `b = 0`.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let d = (a - b).norm();
    let n = b.norm();
    if n > 0.0 {
        d / n
    } else {
        d
    }
}
