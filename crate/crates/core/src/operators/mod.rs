//! Measurement operators.
//!
//! A [`NestedOperator`] measures a `p1 × p2` target as `W(Ψ X)` (or
//! `W(Ψ₁ X Ψ₂ᵀ)` in the doubly-sparse form): the sensing matrix `Ψ`
//! compresses columns and the rank operator `W` takes `n` linear
//! measurements of the compressed matrix.

mod persist;
mod rip;

pub use persist::{load_operator, save_operator, OperatorManifest};
pub use rip::{estimate_gamma, estimate_rip, gamma_product, RipEstimate, Structure};

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg;
use crate::seed;

/// Anything that linearly maps matrices to a measurement space.
pub trait LinearOperator: Sync {
    /// Whether `rows × cols` inputs are in the domain.
    fn accepts(&self, rows: usize, cols: usize) -> bool;

    /// The measurements of `x`, flattened.
    fn measure(&self, x: &DMatrix<f64>) -> Result<DVector<f64>>;
}

fn gaussian_dense(rng: &mut seed::Rng, rows: usize, cols: usize, sd: f64) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            sd * g
        })
        .collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

fn check_finite(what: &str, a: &DMatrix<f64>) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{what} has non-finite entries")))
    }
}

/// The `m × p1` matrix `Ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    pub data: DMatrix<f64>,
    /// Entry variance of the ensemble it was drawn from (`1/m` for Gaussian).
    pub variance_scale: f64,
}

impl SensingMatrix {
    /// I.i.d. `N(0, 1/m)` entries.
    pub fn gaussian(p1: usize, m: usize, seed: u64) -> Result<Self> {
        if p1 < 1 || m < 1 {
            return Err(dim_err(format!("sensing matrix needs m, p1 >= 1, got {m}x{p1}")));
        }
        let mut rng = seed::rng(seed);
        let variance_scale = 1.0 / m as f64;
        Ok(SensingMatrix {
            data: gaussian_dense(&mut rng, m, p1, variance_scale.sqrt()),
            variance_scale,
        })
    }

    pub fn from_matrix(data: DMatrix<f64>, variance_scale: f64) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(dim_err("empty sensing matrix"));
        }
        check_finite("sensing matrix", &data)?;
        Ok(SensingMatrix { data, variance_scale })
    }

    pub fn identity(p: usize) -> Self {
        SensingMatrix {
            data: DMatrix::identity(p, p),
            variance_scale: 1.0,
        }
    }

    /// `m`
    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    /// `p1`
    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_identity(&self) -> bool {
        self.rows() == self.cols()
            && self.data.iter().enumerate().all(|(idx, &v)| {
                v == if idx % self.rows() == idx / self.rows() {
                    1.0
                } else {
                    0.0
                }
            })
    }

    /// `Ψ X`
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.cols() {
            return Err(dim_err(format!(
                "Ψ is {}x{} but input has {} rows",
                self.rows(),
                self.cols(),
                x.nrows()
            )));
        }
        Ok(&self.data * x)
    }

    /// `Ψᵀ B`
    pub fn apply_transpose(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.rows() {
            return Err(dim_err(format!("Ψᵀ expects {} rows, got {}", self.rows(), b.nrows())));
        }
        Ok(self.data.tr_mul(b))
    }
}

impl LinearOperator for SensingMatrix {
    fn accepts(&self, rows: usize, _cols: usize) -> bool {
        rows == self.cols()
    }

    fn measure(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        Ok(linalg::vec_of(&self.apply(x)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankOperatorKind {
    /// `y_i = ⟨W_i, B⟩` with dense frames `W_i`.
    GaussianDense,
    /// `y_i = w_iᵀ B w_i`, i.e. `⟨w_i w_iᵀ, B⟩`.
    RankOneQuadratic,
}

/// The operator `W` acting on `rows × cols` matrices.
///
/// Frames are stored as the rows of one `n × (rows·cols)` matrix for the
/// dense kind (each row is a column-major flattened frame), or of an
/// `n × m` matrix of probe vectors for the rank-one kind.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOperator {
    kind: RankOperatorKind,
    rows: usize,
    cols: usize,
    frames: DMatrix<f64>,
}

impl RankOperator {
    /// `n` frames of size `m × p2` with i.i.d. `N(0, 1/n)` entries.
    pub fn gaussian(m: usize, p2: usize, n: usize, seed: u64) -> Result<Self> {
        if m < 1 || p2 < 1 || n < 1 {
            return Err(dim_err(format!(
                "rank operator needs m, p2, n >= 1, got {m}, {p2}, {n}"
            )));
        }
        let mut rng = seed::rng(seed);
        let sd = (1.0 / n as f64).sqrt();
        let mut frames = DMatrix::zeros(n, m * p2);
        for i in 0..n {
            let f = gaussian_dense(&mut rng, m, p2, sd);
            frames.row_mut(i).copy_from_slice(f.as_slice());
        }
        Ok(RankOperator {
            kind: RankOperatorKind::GaussianDense,
            rows: m,
            cols: p2,
            frames,
        })
    }

    /// Dense kind from explicit frames, all of the same shape.
    pub fn from_frames(frames: &[DMatrix<f64>]) -> Result<Self> {
        let first = frames.first().ok_or_else(|| dim_err("need at least one frame"))?;
        let (rows, cols) = first.shape();
        let mut packed = DMatrix::zeros(frames.len(), rows * cols);
        for (i, f) in frames.iter().enumerate() {
            if f.shape() != (rows, cols) {
                return Err(dim_err(format!(
                    "frame {i} is {:?}, expected {:?}",
                    f.shape(),
                    (rows, cols)
                )));
            }
            check_finite("frame", f)?;
            packed.row_mut(i).copy_from_slice(f.as_slice());
        }
        Ok(RankOperator {
            kind: RankOperatorKind::GaussianDense,
            rows,
            cols,
            frames: packed,
        })
    }

    /// Rank-one kind; `probes` is `n × m`, one `w_i` per row.
    pub fn rank_one(probes: DMatrix<f64>) -> Result<Self> {
        if probes.nrows() == 0 || probes.ncols() == 0 {
            return Err(dim_err("need at least one nonempty probe"));
        }
        check_finite("probes", &probes)?;
        let m = probes.ncols();
        Ok(RankOperator {
            kind: RankOperatorKind::RankOneQuadratic,
            rows: m,
            cols: m,
            frames: probes,
        })
    }

    /// Rank-one kind with `n` standard normal probes of length `m`.
    pub fn gaussian_rank_one(m: usize, n: usize, seed: u64) -> Result<Self> {
        if m < 1 || n < 1 {
            return Err(dim_err(format!("need m, n >= 1, got {m}, {n}")));
        }
        let mut rng = seed::rng(seed);
        Self::rank_one(gaussian_dense(&mut rng, n, m, 1.0))
    }

    pub fn kind(&self) -> RankOperatorKind {
        self.kind
    }

    /// Shape of the matrices `W` consumes.
    pub fn input_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// `n`
    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    /// Frame `i` as a matrix (`w_i w_iᵀ` for the rank-one kind).
    pub fn frame(&self, i: usize) -> DMatrix<f64> {
        match self.kind {
            RankOperatorKind::GaussianDense => {
                DMatrix::from_iterator(self.rows, self.cols, self.frames.row(i).iter().copied())
            }
            RankOperatorKind::RankOneQuadratic => {
                let w = self.frames.row(i).transpose();
                &w * w.transpose()
            }
        }
    }

    /// The probe vectors `w_i` (rank-one kind) as rows.
    pub fn probes(&self) -> Option<&DMatrix<f64>> {
        match self.kind {
            RankOperatorKind::RankOneQuadratic => Some(&self.frames),
            RankOperatorKind::GaussianDense => None,
        }
    }

    pub(crate) fn raw_frames(&self) -> &DMatrix<f64> {
        &self.frames
    }

    /// The operator as an explicit `n × (rows·cols)` matrix acting on
    /// column-major flattened inputs.
    pub fn matrix(&self) -> Cow<'_, DMatrix<f64>> {
        match self.kind {
            RankOperatorKind::GaussianDense => Cow::Borrowed(&self.frames),
            RankOperatorKind::RankOneQuadratic => {
                let (n, m) = self.frames.shape();
                let mut a = DMatrix::zeros(n, m * m);
                for i in 0..n {
                    for c in 0..m {
                        for r in 0..m {
                            a[(i, c * m + r)] = self.frames[(i, r)] * self.frames[(i, c)];
                        }
                    }
                }
                Cow::Owned(a)
            }
        }
    }

    fn check_input(&self, b: &DMatrix<f64>) -> Result<()> {
        if b.shape() != (self.rows, self.cols) {
            return Err(dim_err(format!(
                "W consumes {}x{} matrices, got {:?}",
                self.rows,
                self.cols,
                b.shape()
            )));
        }
        Ok(())
    }

    /// `W(B)`
    pub fn apply(&self, b: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_input(b)?;
        Ok(match self.kind {
            RankOperatorKind::GaussianDense => &self.frames * linalg::vec_of(b),
            RankOperatorKind::RankOneQuadratic => {
                let q = &self.frames * b;
                DVector::from_fn(self.len(), |i, _| q.row(i).dot(&self.frames.row(i)))
            }
        })
    }

    /// `W*(y)`
    pub fn adjoint(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        if y.len() != self.len() {
            return Err(dim_err(format!("W* expects {} values, got {}", self.len(), y.len())));
        }
        Ok(match self.kind {
            RankOperatorKind::GaussianDense => linalg::mat_of(&self.frames.tr_mul(y), self.rows, self.cols),
            RankOperatorKind::RankOneQuadratic => {
                let mut scaled = self.frames.clone();
                for (i, mut row) in scaled.row_iter_mut().enumerate() {
                    row *= y[i];
                }
                self.frames.tr_mul(&scaled)
            }
        })
    }
}

impl LinearOperator for RankOperator {
    fn accepts(&self, rows: usize, cols: usize) -> bool {
        (rows, cols) == (self.rows, self.cols)
    }

    fn measure(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.apply(x)
    }
}

/// `A(X) = W(Ψ X)`, or `W(Ψ₁ X Ψ₂ᵀ)` when `psi2` is present.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedOperator {
    pub psi: SensingMatrix,
    pub w: RankOperator,
    pub psi2: Option<SensingMatrix>,
}

impl NestedOperator {
    pub fn new(psi: SensingMatrix, w: RankOperator) -> Result<Self> {
        if w.rows != psi.rows() {
            return Err(dim_err(format!(
                "Ψ maps into {} rows but W consumes {} rows",
                psi.rows(),
                w.rows
            )));
        }
        Ok(NestedOperator { psi, w, psi2: None })
    }

    pub fn doubly_sparse(psi1: SensingMatrix, w: RankOperator, psi2: SensingMatrix) -> Result<Self> {
        if w.rows != psi1.rows() || w.cols != psi2.rows() {
            return Err(dim_err(format!(
                "W consumes {}x{} but Ψ₁, Ψ₂ produce {}x{}",
                w.rows,
                w.cols,
                psi1.rows(),
                psi2.rows()
            )));
        }
        Ok(NestedOperator {
            psi: psi1,
            w,
            psi2: Some(psi2),
        })
    }

    /// Gaussian `Ψ` and dense Gaussian `W` for `dims`, each from its own
    /// derived stream of `seed`.
    pub fn gaussian(dims: &crate::model::ProblemDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let psi = SensingMatrix::gaussian(dims.p1, dims.m, seed::derive(seed, "psi", 0))?;
        let w = RankOperator::gaussian(dims.m, dims.p2, dims.n, seed::derive(seed, "w", 0))?;
        Self::new(psi, w)
    }

    /// `(p1, p2)`
    pub fn input_shape(&self) -> (usize, usize) {
        let p2 = match &self.psi2 {
            Some(p) => p.cols(),
            None => self.w.cols,
        };
        (self.psi.cols(), p2)
    }

    /// `n`
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    fn check_input(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.shape() != self.input_shape() {
            return Err(dim_err(format!(
                "operator takes {:?} inputs, got {:?}",
                self.input_shape(),
                x.shape()
            )));
        }
        Ok(())
    }

    /// The compressed matrix `Ψ X` (or `Ψ₁ X Ψ₂ᵀ`).
    pub fn compress(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        let b = self.psi.apply(x)?;
        Ok(match &self.psi2 {
            Some(p2) if !p2.is_identity() => &b * p2.data.transpose(),
            _ => b,
        })
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.w.apply(&self.compress(x)?)
    }

    /// `A*(y) = Ψᵀ W*(y)` (times `Ψ₂` on the right in the doubly-sparse form).
    pub fn adjoint(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let b = self.w.adjoint(y)?;
        let x = self.psi.apply_transpose(&b)?;
        Ok(match &self.psi2 {
            Some(p2) if !p2.is_identity() => &x * &p2.data,
            _ => x,
        })
    }
}

impl LinearOperator for NestedOperator {
    fn accepts(&self, rows: usize, cols: usize) -> bool {
        (rows, cols) == self.input_shape()
    }

    fn measure(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.apply(x)
    }
}
