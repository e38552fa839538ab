//! Cached solves of `argmin_x ‖x − c‖² + ‖L x − e‖²` for a dense `L`.

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::{Llt, Solve};
use faer::{Accum, Mat, MatMut, MatRef, Par, Side};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn view(m: &DMatrix<f64>) -> MatRef<'_, f64> {
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

fn view_mut(m: &mut DMatrix<f64>) -> MatMut<'_, f64> {
    let (r, c) = m.shape();
    MatMut::from_column_major_slice_mut(m.as_mut_slice(), r, c)
}

enum Mode {
    /// Factor of `I + L Lᵀ` (fewer outputs than inputs), with its lower
    /// triangle kept for `‖Lᵀ v‖`.
    Woodbury(Llt<f64>, Mat<f64>),
    /// Factor of `I + Lᵀ L`.
    Direct(Llt<f64>),
}

/// `L` acts on the columns of its argument.
pub(crate) struct AugmentedSystem {
    l: Mat<f64>,
    mode: Mode,
}

impl AugmentedSystem {
    pub fn new(l: &DMatrix<f64>) -> Result<Self> {
        let (out, inp) = l.shape();
        let l = view(l).to_owned();
        let fail = |_| Error::Numerical("augmented system is not positive definite".into());
        let mode = if out <= inp {
            let mut g = Mat::<f64>::identity(out, out);
            matmul(g.as_mut(), Accum::Add, l.as_ref(), l.transpose(), 1.0, Par::Seq);
            let chol = g.llt(Side::Lower).map_err(fail)?;
            let lower = chol.L().to_owned();
            Mode::Woodbury(chol, lower)
        } else {
            let mut h = Mat::<f64>::identity(inp, inp);
            matmul(h.as_mut(), Accum::Add, l.transpose(), l.as_ref(), 1.0, Par::Seq);
            Mode::Direct(h.llt(Side::Lower).map_err(fail)?)
        };
        Ok(AugmentedSystem { l, mode })
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.l.nrows(), x.ncols());
        matmul(
            view_mut(&mut out),
            Accum::Replace,
            self.l.as_ref(),
            view(x),
            1.0,
            Par::Seq,
        );
        out
    }

    /// Returns the minimizer `x` together with `L x`.
    pub fn solve(&self, c: &DMatrix<f64>, e: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        match &self.mode {
            Mode::Woodbury(chol, _) => {
                // x = c − Lᵀ G⁻¹ (L c − e),  L x = e + G⁻¹ (L c − e)
                let mut h = -e;
                matmul(view_mut(&mut h), Accum::Add, self.l.as_ref(), view(c), 1.0, Par::Seq);
                chol.solve_in_place(view_mut(&mut h));
                let mut x = c.clone();
                matmul(
                    view_mut(&mut x),
                    Accum::Add,
                    self.l.transpose(),
                    view(&h),
                    -1.0,
                    Par::Seq,
                );
                (x, h + e)
            }
            Mode::Direct(chol) => {
                let mut x = c.clone();
                matmul(view_mut(&mut x), Accum::Add, self.l.transpose(), view(e), 1.0, Par::Seq);
                chol.solve_in_place(view_mut(&mut x));
                let lx = self.forward(&x);
                (x, lx)
            }
        }
    }

    /// `‖Lᵀ v‖_F`
    pub fn adjoint_norm(&self, v: &DMatrix<f64>) -> f64 {
        let (m, sub) = match &self.mode {
            // vᵀ (G − I) v with G = C Cᵀ
            Mode::Woodbury(_, lower) => (lower, v.norm_squared()),
            Mode::Direct(_) => (&self.l, 0.0),
        };
        let mut t = DMatrix::zeros(m.ncols(), v.ncols());
        matmul(view_mut(&mut t), Accum::Replace, m.transpose(), view(v), 1.0, Par::Seq);
        (t.norm_squared() - sub).max(0.0).sqrt()
    }
}
