//! Iterative hard thresholding for both stages.

use nalgebra::{DMatrix, DVector};

use super::{SolveReport, SolverConfig};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{l12_norm, nuclear_norm, svd};
use crate::operators::{RankOperator, SensingMatrix};
use crate::proximal::{best_rank_r, top_k_row_indices, top_k_rows};

/// Iterates whose norm exceeds this multiple of `‖y‖` count as divergent.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Step halvings allowed per iteration before the step is taken anyway.
const MAX_HALVINGS: usize = 30;

/// The pieces of one hard-thresholding scheme.
struct Scheme<F, A, R, I, H> {
    /// `y − L(x)`
    residual: F,
    /// `L*(v)`
    adjoint: A,
    /// Gradient restricted to the structure of `x` (of the gradient itself
    /// when `x = 0`).
    restrict: R,
    /// `‖L(v)‖`
    image_norm: I,
    project: H,
}

/// Shared loop: `x ← H(x + step · L*(y − L(x)))`. Normalized steps are
/// halved until the residual does not grow.
fn iterate<F, A, R, I, H>(
    shape: (usize, usize),
    y_norm: f64,
    cfg: &SolverConfig,
    scheme: Scheme<F, A, R, I, H>,
    observe: &mut dyn FnMut(usize, &DMatrix<f64>),
) -> Result<(DMatrix<f64>, SolveReport)>
where
    F: Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>,
    A: Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>,
    R: Fn(&DMatrix<f64>, &DMatrix<f64>) -> Result<DMatrix<f64>>,
    I: Fn(&DMatrix<f64>) -> Result<f64>,
    H: Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    let Scheme {
        residual,
        adjoint,
        restrict,
        image_norm,
        project,
    } = scheme;
    cfg.validate()?;
    let mut x = DMatrix::zeros(shape.0, shape.1);
    let mut report = SolveReport::trivial(0.0);
    if y_norm == 0.0 {
        return Ok((x, report));
    }
    report.converged = false;
    let limit = DIVERGENCE_FACTOR * y_norm;
    let mut resid = residual(&x)?;
    for it in 1..=cfg.max_iters {
        let g = adjoint(&resid)?;
        let mut step = cfg.iht_step;
        let (next, next_resid) = if cfg.iht_normalized {
            let gs = restrict(&x, &g)?;
            let den = image_norm(&gs)?;
            if den > 0.0 {
                step *= gs.norm_squared() / (den * den);
            }
            let fit = resid.norm();
            let mut halvings = 0;
            loop {
                let next = project(&(&x + &g * step))?;
                let next_resid = residual(&next)?;
                if next_resid.norm() <= fit || halvings == MAX_HALVINGS {
                    break (next, next_resid);
                }
                step *= 0.5;
                halvings += 1;
            }
        } else {
            let next = project(&(&x + &g * step))?;
            let next_resid = residual(&next)?;
            (next, next_resid)
        };
        let norm = next.norm();
        if !norm.is_finite() || norm > limit {
            return Err(Error::Divergence { iters: it, norm, limit });
        }
        let change = (&next - &x).norm() / norm.max(f64::MIN_POSITIVE);
        x = next;
        resid = next_resid;
        observe(it, &x);
        report.iters_used = it;
        report.primal_residual = change;
        if change <= cfg.tol {
            report.converged = true;
            break;
        }
    }
    report.dual_residual = resid.norm() / y_norm;
    Ok((x, report))
}

/// Singular value projection: `B ← P_r(B + step · W*(y − W(B)))`.
pub fn iht_lowrank(
    w: &RankOperator,
    y: &DVector<f64>,
    r: usize,
    cfg: &SolverConfig,
) -> Result<(DMatrix<f64>, SolveReport)> {
    iht_lowrank_observed(w, y, r, cfg, &mut |_, _| {})
}

/// [`iht_lowrank`] with a callback on every iterate.
pub fn iht_lowrank_observed(
    w: &RankOperator,
    y: &DVector<f64>,
    r: usize,
    cfg: &SolverConfig,
    observe: &mut dyn FnMut(usize, &DMatrix<f64>),
) -> Result<(DMatrix<f64>, SolveReport)> {
    if y.len() != w.len() {
        return Err(dim_err(format!("operator has {} outputs, y has {}", w.len(), y.len())));
    }
    let (rows, cols) = w.input_shape();
    if r > rows.min(cols) {
        return Err(dim_err(format!("rank {r} exceeds {rows}x{cols}")));
    }
    let (b, mut rep) = iterate(
        (rows, cols),
        y.norm(),
        cfg,
        Scheme {
            residual: |b: &DMatrix<f64>| {
                let r = y - w.apply(b)?;
                Ok(DMatrix::from_column_slice(r.len(), 1, r.as_slice()))
            },
            adjoint: |v: &DMatrix<f64>| w.adjoint(&v.column(0).into_owned()),
            restrict: |b: &DMatrix<f64>, g: &DMatrix<f64>| {
                // P_U g with U the leading r left singular vectors
                let basis = if b.norm() > 0.0 { b } else { g };
                let u = svd(basis)?.u.columns(0, r).into_owned();
                Ok(&u * u.tr_mul(g))
            },
            image_norm: |v: &DMatrix<f64>| Ok(w.apply(v)?.norm()),
            project: |b: &DMatrix<f64>| best_rank_r(b, r),
        },
        observe,
    )?;
    rep.objective = nuclear_norm(&b)?;
    Ok((b, rep))
}

/// Row-sparse hard thresholding: `X ← H_k(X + step · Ψᵀ(B − Ψ X))`.
pub fn iht_rowsparse(
    psi: &SensingMatrix,
    b: &DMatrix<f64>,
    k: usize,
    cfg: &SolverConfig,
) -> Result<(DMatrix<f64>, SolveReport)> {
    iht_rowsparse_observed(psi, b, k, cfg, &mut |_, _| {})
}

/// [`iht_rowsparse`] with a callback on every iterate.
pub fn iht_rowsparse_observed(
    psi: &SensingMatrix,
    b: &DMatrix<f64>,
    k: usize,
    cfg: &SolverConfig,
    observe: &mut dyn FnMut(usize, &DMatrix<f64>),
) -> Result<(DMatrix<f64>, SolveReport)> {
    if b.nrows() != psi.rows() {
        return Err(dim_err(format!("Ψ has {} rows, data has {}", psi.rows(), b.nrows())));
    }
    if k > psi.cols() {
        return Err(dim_err(format!("k = {k} exceeds p1 = {}", psi.cols())));
    }
    let (x, mut rep) = iterate(
        (psi.cols(), b.ncols()),
        b.norm(),
        cfg,
        Scheme {
            residual: |x: &DMatrix<f64>| Ok(b - psi.apply(x)?),
            adjoint: |v: &DMatrix<f64>| psi.apply_transpose(v),
            restrict: |x: &DMatrix<f64>, g: &DMatrix<f64>| {
                let basis = if x.norm() > 0.0 { x } else { g };
                let keep = top_k_row_indices(basis, k);
                let mut out = DMatrix::zeros(g.nrows(), g.ncols());
                for i in keep {
                    out.set_row(i, &g.row(i));
                }
                Ok(out)
            },
            image_norm: |v: &DMatrix<f64>| Ok(psi.apply(v)?.norm()),
            project: |x: &DMatrix<f64>| top_k_rows(x, k),
        },
        observe,
    )?;
    rep.objective = l12_norm(&x);
    Ok((x, rep))
}
