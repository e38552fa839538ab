//! Problem dimensions, structured targets and measurement noise.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg;
use crate::seed;

/// Sizes of one recovery problem.
///
/// `p1 × p2` is the target, `Ψ` maps `p1 → m`, and `n` measurements are
/// taken of the compressed `m × p2` matrix. The target has at most `k`
/// nonzero rows and rank at most `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDims {
    pub p1: usize,
    pub p2: usize,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub r: usize,
}

/// Regime indicators, kept for reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Regime {
    pub compressive: bool,
    pub rank_within_sparsity: bool,
}

/// `⌈5 k log(p1/k)⌉`, never below one.
pub fn compressed_rows(p1: usize, k: usize) -> usize {
    let m = (5.0 * k as f64 * (p1 as f64 / k as f64).ln()).ceil();
    (m as usize).max(1)
}

/// `4 r max(m, p2)`.
pub fn measurement_count(r: usize, m: usize, p2: usize) -> usize {
    4 * r * m.max(p2)
}

impl ProblemDims {
    pub fn new(p1: usize, p2: usize, m: usize, n: usize, k: usize, r: usize) -> Result<Self> {
        let d = ProblemDims { p1, p2, m, n, k, r };
        d.validate()?;
        Ok(d)
    }

    /// Dimensions following the Gaussian experiment rules for `m` and `n`.
    pub fn with_default_rules(p1: usize, p2: usize, k: usize, r: usize) -> Result<Self> {
        if k == 0 || k > p1 {
            return Err(dim_err(format!("need 1 <= k <= p1, got k={k}, p1={p1}")));
        }
        let m = compressed_rows(p1, k);
        Self::new(p1, p2, m, measurement_count(r, m, p2), k, r)
    }

    pub fn validate(&self) -> Result<()> {
        let ProblemDims { p1, p2, m, n, k, r } = *self;
        if r < 1 || r > k || k > p1 {
            return Err(dim_err(format!("need 1 <= r <= k <= p1, got r={r}, k={k}, p1={p1}")));
        }
        if r > p2 {
            return Err(dim_err(format!("rank {r} exceeds p2={p2}")));
        }
        if m < 1 || n < 1 {
            return Err(dim_err(format!("need m, n >= 1, got m={m}, n={n}")));
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        Regime {
            compressive: self.n < self.p1 * self.p2,
            rank_within_sparsity: self.r <= self.k,
        }
    }

    /// `max(m, p2)`, the dimension that drives the noise radii.
    pub fn m_or_p2(&self) -> usize {
        self.m.max(self.p2)
    }
}

/// A `p1 × p2` matrix with at most `k` nonzero rows and rank at most `r`,
/// stored together with its factors.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredTarget {
    pub matrix: DMatrix<f64>,
    pub support: Vec<usize>,
    pub left_factor: DMatrix<f64>,
    pub right_factor: DMatrix<f64>,
}

impl StructuredTarget {
    /// Build from factors; the support is read off the nonzero rows of
    /// `left_factor`.
    pub fn from_factors(left_factor: DMatrix<f64>, right_factor: DMatrix<f64>) -> Result<Self> {
        if left_factor.ncols() != right_factor.ncols() {
            return Err(dim_err(format!(
                "factor widths differ: {} vs {}",
                left_factor.ncols(),
                right_factor.ncols()
            )));
        }
        let matrix = &left_factor * right_factor.transpose();
        let support = linalg::nonzero_rows(&left_factor);
        Ok(StructuredTarget {
            matrix,
            support,
            left_factor,
            right_factor,
        })
    }

    pub fn zero(p1: usize, p2: usize, r: usize) -> Self {
        StructuredTarget {
            matrix: DMatrix::zeros(p1, p2),
            support: Vec::new(),
            left_factor: DMatrix::zeros(p1, r),
            right_factor: DMatrix::zeros(p2, r),
        }
    }

    pub fn rank_bound(&self) -> usize {
        self.left_factor.ncols()
    }

    /// Check every structural invariant against sparsity level `k`.
    pub fn verify(&self, k: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Numerical(format!("target invariant: {m}")));
        if self.support.len() > k {
            return bad(format!("support size {} exceeds k={k}", self.support.len()));
        }
        if self.support.windows(2).any(|w| w[0] >= w[1]) {
            return bad("support not strictly increasing".into());
        }
        let product = &self.left_factor * self.right_factor.transpose();
        let scale = self.matrix.norm().max(f64::MIN_POSITIVE);
        if (&product - &self.matrix).norm() > 1e-12 * scale {
            return bad("matrix differs from factor product".into());
        }
        for i in 0..self.matrix.nrows() {
            let off = self.support.binary_search(&i).is_err();
            if off && self.matrix.row(i).iter().any(|&x| x != 0.0) {
                return bad(format!("row {i} outside support is nonzero"));
            }
        }
        if linalg::numerical_rank(&self.matrix)? > self.rank_bound() {
            return bad("rank exceeds factor width".into());
        }
        Ok(())
    }
}

fn normal_matrix(rng: &mut seed::Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // row-major draw order keeps the stream layout independent of storage order
    let data: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

fn sparse_factor(rng: &mut seed::Rng, rows: usize, k: usize, r: usize) -> DMatrix<f64> {
    let mut support: Vec<usize> = index::sample(rng, rows, k).into_vec();
    support.sort_unstable();
    let values = normal_matrix(rng, k, r);
    let mut f = DMatrix::zeros(rows, r);
    for (j, &i) in support.iter().enumerate() {
        f.row_mut(i).copy_from(&values.row(j));
    }
    f
}

/// Draw `X = U Vᵀ` where `U` has `k` uniformly placed nonzero rows and all
/// nonzero entries of `U`, `V` are standard normal.
pub fn random_target(dims: &ProblemDims, seed: u64) -> Result<StructuredTarget> {
    dims.validate()?;
    let mut rng = seed::rng(seed);
    let left = sparse_factor(&mut rng, dims.p1, dims.k, dims.r);
    let right = normal_matrix(&mut rng, dims.p2, dims.r);
    StructuredTarget::from_factors(left, right)
}

/// Draw a rank-`r` matrix whose nonzero rows (`k1` of them) and nonzero
/// columns (`k2`) are both uniformly placed.
pub fn random_doubly_sparse_target(
    p1: usize,
    p2: usize,
    k1: usize,
    k2: usize,
    r: usize,
    seed: u64,
) -> Result<StructuredTarget> {
    if r < 1 || r > k1.min(k2) || k1 > p1 || k2 > p2 {
        return Err(dim_err(format!(
            "need 1 <= r <= min(k1, k2), k1 <= p1, k2 <= p2; got r={r}, k1={k1}, k2={k2}, p1={p1}, p2={p2}"
        )));
    }
    let mut rng = seed::rng(seed);
    let left = sparse_factor(&mut rng, p1, k1, r);
    let right = sparse_factor(&mut rng, p2, k2, r);
    StructuredTarget::from_factors(left, right)
}

/// Additive Gaussian noise `N(0, σ² I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!(
                "noise sigma must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(NoiseModel { sigma, seed })
    }
}

pub fn gaussian_noise(n: usize, model: &NoiseModel) -> Result<DVector<f64>> {
    if n < 1 {
        return Err(dim_err("noise length must be >= 1"));
    }
    if !(model.sigma >= 0.0) {
        return Err(Error::Domain(format!("noise sigma must be >= 0, got {}", model.sigma)));
    }
    if model.sigma == 0.0 {
        return Ok(DVector::zeros(n));
    }
    let mut rng = seed::rng(model.seed);
    Ok(DVector::from_fn(n, |_, _| {
        let g: f64 = StandardNormal.sample(&mut rng);
        model.sigma * g
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rules_match_experiment_dims() {
        let d = ProblemDims::with_default_rules(1000, 30, 10, 2).unwrap();
        assert_eq!((d.m, d.n), (231, 1848));
        let d = ProblemDims::with_default_rules(200, 10, 8, 2).unwrap();
        assert_eq!((d.m, d.n), (129, 1032));
        assert_eq!(measurement_count(1, 5, 30), 120);
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(ProblemDims::new(10, 5, 0, 3, 2, 1).is_err());
        assert!(ProblemDims::new(10, 5, 3, 0, 2, 1).is_err());
        assert!(ProblemDims::new(10, 5, 3, 3, 2, 3).is_err());
        assert!(ProblemDims::new(10, 2, 3, 3, 4, 3).is_err());
        assert!(ProblemDims::new(10, 5, 3, 3, 11, 1).is_err());
        assert!(ProblemDims::new(10, 5, 3, 3, 2, 0).is_err());
        // m larger than p1 is allowed
        assert!(ProblemDims::new(4, 5, 9, 3, 2, 1).is_ok());
    }

    #[test]
    fn regime_flags_are_reported_not_enforced() {
        let d = ProblemDims::new(2, 2, 2, 10, 2, 1).unwrap();
        assert!(!d.regime().compressive);
        assert!(d.regime().rank_within_sparsity);
    }

    #[test]
    fn experiment_sized_target() {
        let d = ProblemDims::with_default_rules(1000, 30, 10, 2).unwrap();
        let t = random_target(&d, 7).unwrap();
        assert_eq!(t.support.len(), 10);
        assert_eq!(linalg::nonzero_rows(&t.matrix).len(), 10);
        assert!(linalg::numerical_rank(&t.matrix).unwrap() <= 2);
        t.verify(10).unwrap();
    }

    #[test]
    fn dense_unconstrained_target() {
        let d = ProblemDims::new(6, 4, 3, 3, 6, 4).unwrap();
        let t = random_target(&d, 3).unwrap();
        t.verify(6).unwrap();
        assert_eq!(t.support, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn degenerate_k_equals_r() {
        let d = ProblemDims::new(20, 5, 3, 3, 3, 3).unwrap();
        let t = random_target(&d, 11).unwrap();
        t.verify(3).unwrap();
        assert_eq!(t.left_factor.shape(), (20, 3));
    }

    #[test]
    fn targets_are_deterministic() {
        let d = ProblemDims::with_default_rules(100, 8, 5, 2).unwrap();
        let a = random_target(&d, 42).unwrap();
        let b = random_target(&d, 42).unwrap();
        assert!(a
            .matrix
            .iter()
            .zip(b.matrix.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, random_target(&d, 43).unwrap());
    }

    #[test]
    fn many_small_targets_hold_invariants() {
        for s in 0..10_000u64 {
            let p1 = 3 + (s % 5) as usize;
            let p2 = 2 + (s % 3) as usize;
            let k = 1 + (s % p1 as u64) as usize;
            let r = 1 + (s % k.min(p2) as u64) as usize;
            let d = ProblemDims::new(p1, p2, 2, 2, k, r).unwrap();
            random_target(&d, s).unwrap().verify(k).unwrap();
        }
    }

    #[test]
    fn support_is_uniform_over_subsets() {
        // p1 = 6, k = 2: fifteen supports, each with probability 1/15
        let d = ProblemDims::new(6, 2, 2, 2, 2, 1).unwrap();
        let draws = 100_000;
        let mut counts = std::collections::HashMap::new();
        for s in 0..draws {
            let mut rng = seed::stream(99, "support", s);
            let mut sup = index::sample(&mut rng, d.p1, d.k).into_vec();
            sup.sort_unstable();
            *counts.entry(sup).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 15);
        let p = 1.0 / 15.0;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts.values() {
            let f = *c as f64 / draws as f64;
            assert!((f - p).abs() < 5.0 * se, "frequency {f} too far from {p}");
        }
    }

    #[test]
    fn noise_zero_sigma_and_determinism() {
        let z = gaussian_noise(5, &NoiseModel::new(0.0, 1).unwrap()).unwrap();
        assert_eq!(z.as_slice(), &[0.0; 5]);
        let m = NoiseModel::new(1.0, 5).unwrap();
        assert_eq!(gaussian_noise(10, &m).unwrap(), gaussian_noise(10, &m).unwrap());
        assert!(gaussian_noise(0, &m).is_err());
        assert!(NoiseModel::new(-1.0, 0).is_err());
    }

    #[test]
    fn noise_variance_matches() {
        // sample variance of 1e5 unit normals has sd about sqrt(2/1e5) = 0.0045
        let z = gaussian_noise(100_000, &NoiseModel::new(1.0, 2024).unwrap()).unwrap();
        let mean = z.mean();
        let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }
}
