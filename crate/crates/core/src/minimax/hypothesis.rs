//! The two hypothesis classes: sign blocks replicated down the support rows
//! or across the columns.

use nalgebra::DMatrix;
use serde::Serialize;

use super::packing::{BitString, PackingSet};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{nonzero_rows, numerical_rank};
use crate::model::ProblemDims;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisKind {
    /// An `r × p2` sign block repeated down the `k` support rows.
    RowReplicated,
    /// A `k × r` sign block with each column repeated `⌈p2/r⌉` times.
    ColReplicated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    pub kind: HypothesisKind,
    pub epsilon: f64,
    /// Indexed support-major: member `s · |signs| + t`.
    pub members: Vec<DMatrix<f64>>,
    pub dims: ProblemDims,
}

impl HypothesisSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn log_count(&self) -> f64 {
        (self.members.len() as f64).ln()
    }

    /// Each member has at most `k` nonzero rows, rank at most `r` and
    /// Frobenius norm `ε` to `1e-12` relative.
    pub fn verify_membership(&self) -> Result<()> {
        for (i, x) in self.members.iter().enumerate() {
            if x.shape() != (self.dims.p1, self.dims.p2) {
                return Err(Error::Hypothesis(format!("member {i} has shape {:?}", x.shape())));
            }
            let rows = nonzero_rows(x).len();
            if rows > self.dims.k {
                return Err(Error::Hypothesis(format!("member {i} has {rows} nonzero rows")));
            }
            let rank = numerical_rank(x)?;
            if rank > self.dims.r {
                return Err(Error::Hypothesis(format!("member {i} has rank {rank}")));
            }
            let rel = (x.norm() - self.epsilon).abs() / self.epsilon;
            if rel > 1e-12 {
                return Err(Error::Hypothesis(format!("member {i} norm off by {rel:e} relative")));
            }
        }
        Ok(())
    }

    /// Pairwise distance at least `ε/2` over `subset` (all members when
    /// `None`).
    pub fn verify_separation(&self, subset: Option<&[usize]>) -> Result<()> {
        let all: Vec<usize> = (0..self.members.len()).collect();
        let idx = subset.unwrap_or(&all);
        let floor = self.epsilon / 2.0;
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                let d = (&self.members[i] - &self.members[j]).norm();
                if d < floor * (1.0 - 1e-12) {
                    return Err(Error::Hypothesis(format!(
                        "members {i} and {j} are {d:e} apart, need {floor:e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_inputs(
    dims: &ProblemDims,
    epsilon: f64,
    supports: &PackingSet,
    signs: &PackingSet,
    sign_len: usize,
) -> Result<()> {
    dims.validate()?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be > 0, got {epsilon}")));
    }
    if supports.universe != dims.p1 || supports.weight != Some(dims.k) {
        return Err(dim_err(format!(
            "supports must be weight-{} subsets of [{}], got weight {:?} over {}",
            dims.k, dims.p1, supports.weight, supports.universe
        )));
    }
    if signs.universe != sign_len {
        return Err(dim_err(format!(
            "sign strings must have length {sign_len}, got {}",
            signs.universe
        )));
    }
    Ok(())
}

/// Places `scale · block(T, j, q)` on support row `j`, column `q`.
fn place(
    dims: &ProblemDims,
    epsilon: f64,
    support: &BitString,
    sign: &DMatrix<f64>,
    block: impl Fn(&DMatrix<f64>, usize, usize) -> f64,
) -> DMatrix<f64> {
    let scale = epsilon / ((dims.k * dims.p2) as f64).sqrt();
    let mut x = DMatrix::zeros(dims.p1, dims.p2);
    for (j, row) in support.ones().into_iter().enumerate() {
        for q in 0..dims.p2 {
            x[(row, q)] = scale * block(sign, j, q);
        }
    }
    x
}

fn check_member(dims: &ProblemDims, support: &BitString, sign: &BitString, sign_len: usize) -> Result<()> {
    if support.len() != dims.p1 || support.weight() != dims.k || sign.len() != sign_len {
        return Err(dim_err(format!(
            "need a weight-{} support over [{}] and {sign_len} signs",
            dims.k, dims.p1
        )));
    }
    Ok(())
}

/// One member of the row-replicated class.
pub fn row_member(dims: &ProblemDims, epsilon: f64, support: &BitString, sign: &BitString) -> Result<DMatrix<f64>> {
    check_member(dims, support, sign, dims.r * dims.p2)?;
    let r = dims.r;
    let t = sign.sign_matrix(r, dims.p2)?;
    Ok(place(dims, epsilon, support, &t, |t, j, q| t[(j % r, q)]))
}

/// One member of the column-replicated class.
pub fn col_member(dims: &ProblemDims, epsilon: f64, support: &BitString, sign: &BitString) -> Result<DMatrix<f64>> {
    check_member(dims, support, sign, dims.k * dims.r)?;
    let width = dims.p2.div_ceil(dims.r);
    let t = sign.sign_matrix(dims.k, dims.r)?;
    Ok(place(dims, epsilon, support, &t, |t, j, q| t[(j, q / width)]))
}

fn assemble(
    kind: HypothesisKind,
    dims: &ProblemDims,
    epsilon: f64,
    supports: &PackingSet,
    signs: &PackingSet,
    member: fn(&ProblemDims, f64, &BitString, &BitString) -> Result<DMatrix<f64>>,
) -> Result<HypothesisSet> {
    let mut members = Vec::with_capacity(supports.len() * signs.len());
    for s in &supports.members {
        for t in &signs.members {
            members.push(member(dims, epsilon, s, t)?);
        }
    }
    let set = HypothesisSet {
        kind,
        epsilon,
        members,
        dims: *dims,
    };
    set.verify_membership()?;
    Ok(set)
}

/// Members `ε/√(k p2)` times the sign block `T` (`r × p2`) stacked
/// `⌈k/r⌉` times onto the support rows: support row `j` (in increasing
/// order) carries row `j mod r` of `T`.
pub fn build_hypothesis_row(
    dims: &ProblemDims,
    epsilon: f64,
    supports: &PackingSet,
    signs: &PackingSet,
) -> Result<HypothesisSet> {
    check_inputs(dims, epsilon, supports, signs, dims.r * dims.p2)?;
    assemble(
        HypothesisKind::RowReplicated,
        dims,
        epsilon,
        supports,
        signs,
        row_member,
    )
}

/// Members `ε/√(k p2)` times the sign block `T` (`k × r`) with each column
/// repeated `⌈p2/r⌉` times and truncated to `p2` columns: column `q`
/// carries column `q / ⌈p2/r⌉` of `T`.
///
/// When truncation drops a whole column of `T`, distinct signs can give
/// equal members; separation is then violated and reported as an error.
pub fn build_hypothesis_col(
    dims: &ProblemDims,
    epsilon: f64,
    supports: &PackingSet,
    signs: &PackingSet,
) -> Result<HypothesisSet> {
    check_inputs(dims, epsilon, supports, signs, dims.k * dims.r)?;
    let width = dims.p2.div_ceil(dims.r);
    let set = assemble(
        HypothesisKind::ColReplicated,
        dims,
        epsilon,
        supports,
        signs,
        col_member,
    )?;
    if (dims.r - 1) * width >= dims.p2 {
        // the last sign column never shows, so check whether it mattered
        set.verify_separation(None)?;
    }
    Ok(set)
}
