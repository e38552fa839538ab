//! Empirical restricted-isometry probing.
//!
//! Sampling random structured unit-norm inputs and recording the largest
//! deviation of `‖op(X)‖²` from one gives a *lower* bound on the
//! restricted isometry constant: the supremum over the whole structured set
//! can only be larger. Nothing here certifies an upper bound.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::LinearOperator;
use crate::error::{dim_err, Result};
use crate::model::{random_target, ProblemDims};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    /// At most `k` nonzero rows.
    RowSparse(usize),
    /// Rank at most `r`.
    LowRank(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipEstimate {
    pub structure: Structure,
    /// Largest `|‖op(X)‖² − 1|` seen, clamped to `[0, 1]`.
    pub delta_lower_bound: f64,
    pub trials: usize,
    /// The ratio `‖op(X)‖²/‖X‖²` attaining the largest deviation.
    pub worst_case_ratio: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl RipEstimate {
    fn empty(structure: Structure) -> Self {
        RipEstimate {
            structure,
            delta_lower_bound: 0.0,
            trials: 0,
            worst_case_ratio: 1.0,
            min_ratio: f64::INFINITY,
            max_ratio: 0.0,
        }
    }

    fn record(&mut self, ratio: f64) {
        self.trials += 1;
        self.min_ratio = self.min_ratio.min(ratio);
        self.max_ratio = self.max_ratio.max(ratio);
        let dev = (ratio - 1.0).abs();
        if dev > self.delta_lower_bound || self.trials == 1 {
            self.delta_lower_bound = dev.min(1.0);
            self.worst_case_ratio = ratio;
        }
    }

    /// Combine two probe sets over the same structure.
    pub fn merge(&self, other: &RipEstimate) -> RipEstimate {
        let (big, small) = if other.delta_lower_bound > self.delta_lower_bound {
            (other, self)
        } else {
            (self, other)
        };
        RipEstimate {
            structure: self.structure,
            delta_lower_bound: big.delta_lower_bound,
            trials: big.trials + small.trials,
            worst_case_ratio: big.worst_case_ratio,
            min_ratio: self.min_ratio.min(other.min_ratio),
            max_ratio: self.max_ratio.max(other.max_ratio),
        }
    }
}

fn probe(shape: (usize, usize), structure: Structure, seed: u64) -> Result<DMatrix<f64>> {
    let (rows, cols) = shape;
    let mut x = match structure {
        Structure::RowSparse(k) => {
            let r = k.min(cols);
            let dims = ProblemDims::new(rows, cols, 1, 1, k, r)?;
            random_target(&dims, seed)?.matrix
        }
        Structure::LowRank(r) => {
            let mut rng = seed::rng(seed);
            let mut g = |n| DMatrix::from_fn(n, r, |_, _| StandardNormal.sample(&mut rng));
            let u: DMatrix<f64> = g(rows);
            let v: DMatrix<f64> = g(cols);
            u * v.transpose()
        }
    };
    let norm = x.norm();
    if norm > 0.0 {
        x /= norm;
    }
    Ok(x)
}

/// Probe `op` with `trials` random unit-Frobenius members of the
/// structured set of `shape`-sized matrices.
pub fn estimate_rip(
    op: &dyn LinearOperator,
    shape: (usize, usize),
    structure: Structure,
    trials: usize,
    seed: u64,
) -> Result<RipEstimate> {
    if !op.accepts(shape.0, shape.1) {
        return Err(dim_err(format!("operator does not accept {shape:?} inputs")));
    }
    match structure {
        Structure::RowSparse(k) if k < 1 || k > shape.0 => {
            return Err(dim_err(format!("row sparsity {k} out of range for {shape:?}")))
        }
        Structure::LowRank(r) if r < 1 || r > shape.0.min(shape.1) => {
            return Err(dim_err(format!("rank {r} out of range for {shape:?}")))
        }
        _ => {}
    }
    let mut est = RipEstimate::empty(structure);
    for t in 0..trials {
        let x = probe(shape, structure, seed::derive(seed, "rip-probe", t as u64))?;
        est.record(op.measure(&x)?.norm_squared());
    }
    Ok(est)
}

/// Largest `‖op(X)‖²/‖X‖²` over the given probes (zero probes skipped).
pub fn estimate_gamma(op: &dyn LinearOperator, probes: &[DMatrix<f64>]) -> Result<f64> {
    let mut gamma: f64 = 0.0;
    for x in probes {
        let n2 = x.norm_squared();
        if n2 > 0.0 {
            gamma = gamma.max(op.measure(x)?.norm_squared() / n2);
        }
    }
    Ok(gamma)
}

/// Working value of the nested bound constant: `(1 + δ_W)(1 + δ_Ψ)`.
pub fn gamma_product(psi: &RipEstimate, w: &RipEstimate) -> f64 {
    (1.0 + psi.delta_lower_bound) * (1.0 + w.delta_lower_bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{RankOperator, SensingMatrix};

    #[test]
    fn identity_is_exact_isometry() {
        let psi = SensingMatrix::identity(20);
        for s in [Structure::RowSparse(3), Structure::LowRank(2)] {
            let e = estimate_rip(&psi, (20, 5), s, 50, 1).unwrap();
            assert!(e.delta_lower_bound < 1e-12);
            assert_eq!(e.trials, 50);
        }
    }

    #[test]
    fn probes_are_structured_unit_norm() {
        let x = probe((30, 6), Structure::RowSparse(4), 3).unwrap();
        assert!((x.norm() - 1.0).abs() < 1e-12);
        assert!(crate::linalg::nonzero_rows(&x).len() <= 4);
        let x = probe((30, 6), Structure::LowRank(2), 3).unwrap();
        assert!((x.norm() - 1.0).abs() < 1e-12);
        assert_eq!(crate::linalg::numerical_rank(&x).unwrap(), 2);
    }

    #[test]
    fn merge_is_monotone() {
        let w = RankOperator::gaussian(8, 6, 60, 4).unwrap();
        let a = estimate_rip(&w, (8, 6), Structure::LowRank(2), 40, 1).unwrap();
        let b = estimate_rip(&w, (8, 6), Structure::LowRank(2), 40, 2).unwrap();
        let m = a.merge(&b);
        assert!(m.delta_lower_bound >= a.delta_lower_bound);
        assert!(m.delta_lower_bound >= b.delta_lower_bound);
        assert_eq!(m.trials, 80);
        assert!(m.max_ratio >= a.max_ratio.max(b.max_ratio));
    }

    #[test]
    fn rejects_incompatible_shapes() {
        let psi = SensingMatrix::identity(5);
        assert!(estimate_rip(&psi, (6, 2), Structure::RowSparse(2), 5, 0).is_err());
        assert!(estimate_rip(&psi, (5, 2), Structure::LowRank(3), 5, 0).is_err());
    }

    #[test]
    fn gamma_from_probes() {
        let psi = SensingMatrix::identity(4);
        let x = DMatrix::from_element(4, 2, 0.5);
        assert!((estimate_gamma(&psi, &[x, DMatrix::zeros(4, 2)]).unwrap() - 1.0).abs() < 1e-15);
    }
}
