//! Two-stage recovery: a low-rank estimate of the compressed matrix `Ψ X`,
//! then a row-sparse estimate of `X` from it.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::model::{ProblemDims, StructuredTarget};
use crate::operators::{NestedOperator, SensingMatrix};
use crate::proximal::{best_rank_r, top_k_rows};
use crate::seed;
use crate::solvers::{
    iht_lowrank, iht_rowsparse, solve_lowrank_stage, solve_rowsparse_stage, SolveReport, SolverConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StageMethod {
    #[default]
    Admm,
    Iht,
}

impl std::str::FromStr for StageMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "admm" => Ok(StageMethod::Admm),
            "iht" => Ok(StageMethod::Iht),
            other => Err(Error::Config(format!("unknown stage method {other:?} (admm | iht)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryConfig {
    /// Stage-1 radius constant.
    pub c1: f64,
    /// Stage-2 radius constant.
    pub c2: f64,
    /// Project the estimate onto rank `r` and then onto `k` rows.
    pub postprocess: bool,
    pub stage1: StageMethod,
    pub stage2: StageMethod,
    pub solver: SolverConfig,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            c1: 4.0,
            c2: 4.0,
            postprocess: false,
            stage1: StageMethod::Admm,
            stage2: StageMethod::Admm,
            solver: SolverConfig::default(),
        }
    }
}

impl RecoveryConfig {
    /// Defaults with the looser solver tolerance used for noisy data.
    pub fn noisy() -> Self {
        RecoveryConfig {
            solver: SolverConfig::noisy(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1.is_finite()) || !(self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(Error::Config(format!(
                "radius constants must be > 0, got c1={}, c2={}",
                self.c1, self.c2
            )));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub estimate: DMatrix<f64>,
    /// Stage-1 estimate of the compressed matrix.
    pub compressed: DMatrix<f64>,
    pub stage1_report: SolveReport,
    pub stage2_report: SolveReport,
    /// Column stage of the doubly-sparse variant, when it ran.
    pub stage3_report: Option<SolveReport>,
    pub frobenius_error: Option<f64>,
    /// `‖X̂ − X*‖²_F / σ²`
    pub normalized_sq_error: Option<f64>,
}

impl RecoveryResult {
    pub fn converged(&self) -> bool {
        self.stage1_report.converged && self.stage2_report.converged && self.stage3_report.is_none_or(|r| r.converged)
    }

    pub fn relative_error(&self, truth: &StructuredTarget) -> f64 {
        crate::linalg::relative_error(&self.estimate, &truth.matrix)
    }

    fn score(&mut self, sigma: f64, truth: Option<&StructuredTarget>) -> Result<()> {
        if let Some(t) = truth {
            if t.matrix.shape() != self.estimate.shape() {
                return Err(dim_err(format!(
                    "truth is {:?}, estimate is {:?}",
                    t.matrix.shape(),
                    self.estimate.shape()
                )));
            }
            let err = (&self.estimate - &t.matrix).norm();
            self.frobenius_error = Some(err);
            self.normalized_sq_error = (sigma > 0.0).then(|| err * err / (sigma * sigma));
        }
        Ok(())
    }
}

/// `σ √(n + c1 r max(m, p2))`
pub fn stage1_radius(sigma: f64, n: usize, r: usize, m: usize, p2: usize, c1: f64) -> f64 {
    sigma * (n as f64 + c1 * (r * m.max(p2)) as f64).sqrt()
}

/// `c2 σ √(r max(m, p2))`
pub fn stage2_radius(sigma: f64, r: usize, m: usize, p2: usize, c2: f64) -> f64 {
    c2 * sigma * ((r * m.max(p2)) as f64).sqrt()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("sigma must be finite and >= 0, got {sigma}")))
    }
}

fn low_rank_stage(
    op: &NestedOperator,
    y: &DVector<f64>,
    r: usize,
    radius: f64,
    cfg: &RecoveryConfig,
) -> Result<(DMatrix<f64>, SolveReport)> {
    match cfg.stage1 {
        StageMethod::Admm => solve_lowrank_stage(&op.w, y, radius, &cfg.solver),
        StageMethod::Iht => iht_lowrank(&op.w, y, r, &cfg.solver),
    }
}

fn row_sparse_stage(
    psi: &SensingMatrix,
    b: &DMatrix<f64>,
    k: usize,
    radius: f64,
    cfg: &RecoveryConfig,
) -> Result<(DMatrix<f64>, SolveReport)> {
    match cfg.stage2 {
        StageMethod::Admm => solve_rowsparse_stage(psi, b, radius, &cfg.solver),
        StageMethod::Iht => iht_rowsparse(psi, b, k, &cfg.solver),
    }
}

/// Recovers `X` from `y = W(Ψ X) + z`.
///
/// Solver non-convergence is not an error: the result carries both reports
/// and [`RecoveryResult::converged`] tells the caller.
pub fn recover(
    y: &DVector<f64>,
    op: &NestedOperator,
    dims: &ProblemDims,
    sigma: f64,
    cfg: &RecoveryConfig,
    truth: Option<&StructuredTarget>,
) -> Result<RecoveryResult> {
    dims.validate()?;
    cfg.validate()?;
    check_sigma(sigma)?;
    if op.input_shape() != (dims.p1, dims.p2) || op.psi.rows() != dims.m || op.len() != dims.n {
        return Err(dim_err(format!(
            "operator ({}x{} -> {} rows -> {} outputs) does not match {dims:?}",
            op.input_shape().0,
            op.input_shape().1,
            op.psi.rows(),
            op.len()
        )));
    }
    if op.psi2.as_ref().is_some_and(|p| !p.is_identity()) {
        return Err(Error::Config(
            "operator has a column compression; use recover_doubly_sparse".into(),
        ));
    }
    if y.len() != dims.n {
        return Err(dim_err(format!("expected {} measurements, got {}", dims.n, y.len())));
    }
    let ProblemDims { p2, m, n, k, r, .. } = *dims;

    let r1 = stage1_radius(sigma, n, r, m, p2, cfg.c1);
    let (compressed, stage1_report) = low_rank_stage(op, y, r, r1, cfg)?;
    let r2 = stage2_radius(sigma, r, m, p2, cfg.c2);
    let (mut estimate, stage2_report) = row_sparse_stage(&op.psi, &compressed, k, r2, cfg)?;
    if cfg.postprocess {
        estimate = top_k_rows(&best_rank_r(&estimate, r.min(p2))?, k)?;
    }
    let mut out = RecoveryResult {
        estimate,
        compressed,
        stage1_report,
        stage2_report,
        stage3_report: None,
        frobenius_error: None,
        normalized_sq_error: None,
    };
    out.score(sigma, truth)?;
    Ok(out)
}

/// Recovers `X` with `k1` nonzero rows and `k2` nonzero columns from
/// `y = W(Ψ₁ X Ψ₂ᵀ) + z`.
///
/// The row stage recovers `X Ψ₂ᵀ` against `Ψ₁`; the column stage then
/// recovers `Xᵀ` from its transpose against `Ψ₂`. An exact identity `Ψ₂`
/// skips the column stage.
#[allow(clippy::too_many_arguments)]
pub fn recover_doubly_sparse(
    y: &DVector<f64>,
    op: &NestedOperator,
    k1: usize,
    k2: usize,
    r: usize,
    sigma: f64,
    cfg: &RecoveryConfig,
    truth: Option<&StructuredTarget>,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    check_sigma(sigma)?;
    let psi2 = op
        .psi2
        .as_ref()
        .ok_or_else(|| Error::Config("operator has no column compression Ψ₂".into()))?;
    let (p1, p2) = op.input_shape();
    let (m1, m2) = (op.psi.rows(), psi2.rows());
    if r < 1 || r > k1.min(k2) || k1 > p1 || k2 > p2 {
        return Err(dim_err(format!(
            "need 1 <= r <= min(k1, k2), k1 <= p1, k2 <= p2; got r={r}, k1={k1}, k2={k2}"
        )));
    }
    if y.len() != op.len() {
        return Err(dim_err(format!("expected {} measurements, got {}", op.len(), y.len())));
    }

    let r1 = stage1_radius(sigma, op.len(), r, m1, m2, cfg.c1);
    let (compressed, stage1_report) = low_rank_stage(op, y, r, r1, cfg)?;
    let r2 = stage2_radius(sigma, r, m1, m2, cfg.c2);
    let (rows_stage, stage2_report) = row_sparse_stage(&op.psi, &compressed, k1, r2, cfg)?;
    let skip_columns = psi2.is_identity();
    let (mut estimate, stage3_report) = if skip_columns {
        (rows_stage, None)
    } else {
        let (xt, rep) = row_sparse_stage(psi2, &rows_stage.transpose(), k2, r2, cfg)?;
        (xt.transpose(), Some(rep))
    };
    if cfg.postprocess {
        estimate = top_k_rows(&best_rank_r(&estimate, r.min(p1).min(p2))?, k1)?;
        if !skip_columns {
            estimate = top_k_rows(&estimate.transpose(), k2)?.transpose();
        }
    }
    let mut out = RecoveryResult {
        estimate,
        compressed,
        stage1_report,
        stage2_report,
        stage3_report,
        frobenius_error: None,
        normalized_sq_error: None,
    };
    out.score(sigma, truth)?;
    Ok(out)
}

/// Monte-Carlo check of the chi-square band `σ²(n − ν) ≤ ‖z‖² ≤ σ²(n + ν)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseBand {
    pub empirical: f64,
    /// `1 − 2 exp(−min(ν/4, ν²/(16 n)))`
    pub analytic_bound: f64,
    pub trials: usize,
    /// Standard error of `empirical`.
    pub std_error: f64,
}

pub fn chi_square_band_bound(n: usize, nu: f64) -> f64 {
    let e = (nu / 4.0).min(nu * nu / (16.0 * n as f64));
    1.0 - 2.0 * (-e).exp()
}

pub fn noise_band_check(sigma: f64, n: usize, nu: f64, trials: usize, seed: u64) -> Result<NoiseBand> {
    check_sigma(sigma)?;
    if !(nu > 0.0) || n < 1 || trials < 1 {
        return Err(Error::Domain(format!(
            "need nu > 0, n >= 1, trials >= 1; got nu={nu}, n={n}, trials={trials}"
        )));
    }
    let var = sigma * sigma;
    let (lo, hi) = (var * (n as f64 - nu), var * (n as f64 + nu));
    let mut rng = seed::stream(seed, "noise-band", 0);
    let mut hits = 0usize;
    for _ in 0..trials {
        let sq: f64 = (0..n)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                let z = sigma * g;
                z * z
            })
            .sum();
        if lo <= sq && sq <= hi {
            hits += 1;
        }
    }
    let p = hits as f64 / trials as f64;
    Ok(NoiseBand {
        empirical: p,
        analytic_bound: chi_square_band_bound(n, nu),
        trials,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gaussian_noise, random_doubly_sparse_target, random_target, NoiseModel};
    use crate::operators::RankOperator;

    #[test]
    fn radii_follow_formulas() {
        assert!((stage1_radius(0.01, 240, 2, 30, 30, 4.0) - 0.219089).abs() < 1e-6);
        assert_eq!(stage1_radius(0.0, 240, 2, 30, 30, 4.0), 0.0);
        assert!((stage1_radius(0.01, 240, 2, 30, 30, 0.0) - 0.01 * 240f64.sqrt()).abs() < 1e-15);
        assert!((stage2_radius(0.01, 2, 30, 30, 4.0) - 0.309839).abs() < 1e-6);
        assert_eq!(stage2_radius(0.0, 2, 30, 30, 4.0), 0.0);
        assert_eq!(stage2_radius(0.01, 1, 5, 30, 4.0), 4.0 * 0.01 * 30f64.sqrt());
        let bad = RecoveryConfig {
            c1: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    fn instance(dims: &ProblemDims, seed: u64, sigma: f64) -> (StructuredTarget, NestedOperator, DVector<f64>) {
        let x = random_target(dims, seed).unwrap();
        let op = NestedOperator::gaussian(dims, seed + 1).unwrap();
        let z = gaussian_noise(dims.n, &NoiseModel::new(sigma, seed + 2).unwrap()).unwrap();
        let y = op.apply(&x.matrix).unwrap() + z;
        (x, op, y)
    }

    #[test]
    fn noise_free_recovery_is_exact() {
        let dims = ProblemDims::with_default_rules(200, 10, 8, 2).unwrap();
        assert_eq!((dims.m, dims.n), (129, 1032));
        let (x, op, y) = instance(&dims, 40, 0.0);
        let res = recover(&y, &op, &dims, 0.0, &RecoveryConfig::default(), Some(&x)).unwrap();
        assert!(res.converged());
        assert!(res.relative_error(&x) <= 1e-3);
        assert!(res.normalized_sq_error.is_none());
    }

    #[test]
    fn zero_target_gives_zero() {
        let dims = ProblemDims::new(30, 5, 12, 60, 3, 1).unwrap();
        let op = NestedOperator::gaussian(&dims, 1).unwrap();
        let res = recover(&DVector::zeros(60), &op, &dims, 0.0, &RecoveryConfig::default(), None).unwrap();
        assert_eq!(res.estimate, DMatrix::zeros(30, 5));
    }

    #[test]
    fn noisy_recovery_feasibility_and_postprocessing() {
        let dims = ProblemDims::with_default_rules(100, 8, 6, 2).unwrap();
        let sigma = 0.01;
        for seed in 0..3 {
            let (x, op, y) = instance(&dims, 100 * seed, sigma);
            let z = &y - op.apply(&x.matrix).unwrap();
            let r1 = stage1_radius(sigma, dims.n, dims.r, dims.m, dims.p2, 4.0);
            assert!(z.norm() <= r1, "truth infeasible for stage 1");
            let cfg = RecoveryConfig::noisy();
            let raw = recover(&y, &op, &dims, sigma, &cfg, Some(&x)).unwrap();
            let post = recover(
                &y,
                &op,
                &dims,
                sigma,
                &RecoveryConfig {
                    postprocess: true,
                    ..cfg
                },
                Some(&x),
            )
            .unwrap();
            let (e_raw, e_post) = (raw.frobenius_error.unwrap(), post.frobenius_error.unwrap());
            assert!(e_post <= 3.0 * e_raw, "{e_post} vs {e_raw}");
            assert!(crate::linalg::nonzero_rows(&post.estimate).len() <= dims.k);
            let ns = raw.normalized_sq_error.unwrap();
            assert!((ns - e_raw * e_raw / (sigma * sigma)).abs() <= 1e-9 * ns);
        }
    }

    #[test]
    fn recovery_is_scale_equivariant() {
        let dims = ProblemDims::with_default_rules(80, 6, 5, 2).unwrap();
        let (_, op, y) = instance(&dims, 9, 0.01);
        let cfg = RecoveryConfig::noisy();
        let a = recover(&y, &op, &dims, 0.01, &cfg, None).unwrap();
        let b = recover(&(&y * 3.0), &op, &dims, 0.03, &cfg, None).unwrap();
        assert!((&a.estimate * 3.0 - &b.estimate).norm() <= 1e-8 * b.estimate.norm());
    }

    #[test]
    fn mismatched_dims_are_rejected() {
        let dims = ProblemDims::new(30, 5, 12, 60, 3, 1).unwrap();
        let op = NestedOperator::gaussian(&dims, 1).unwrap();
        let other = ProblemDims { n: 61, ..dims };
        let cfg = RecoveryConfig::default();
        assert!(recover(&DVector::zeros(61), &op, &other, 0.0, &cfg, None).is_err());
        assert!(recover(&DVector::zeros(59), &op, &dims, 0.0, &cfg, None).is_err());
        assert!(recover(&DVector::zeros(60), &op, &dims, -1.0, &cfg, None).is_err());
    }

    #[test]
    fn identity_column_compression_reduces_to_recover() {
        let dims = ProblemDims::with_default_rules(60, 5, 4, 2).unwrap();
        let (x, op, y) = instance(&dims, 3, 0.01);
        let cfg = RecoveryConfig::noisy();
        let plain = recover(&y, &op, &dims, 0.01, &cfg, Some(&x)).unwrap();
        let ds = NestedOperator::doubly_sparse(op.psi.clone(), op.w.clone(), SensingMatrix::identity(5)).unwrap();
        let twin = recover_doubly_sparse(&y, &ds, 4, 5, 2, 0.01, &cfg, Some(&x)).unwrap();
        assert!((&plain.estimate - &twin.estimate).norm() <= 1e-10 * plain.estimate.norm().max(1.0));
        assert!(twin.stage3_report.is_none());
    }

    #[test]
    fn doubly_sparse_noise_free() {
        let (p, k, r) = (100, 6, 2);
        let m = crate::model::compressed_rows(p, k);
        assert_eq!(m, 85);
        let x = random_doubly_sparse_target(p, p, k, k, r, 1).unwrap();
        let psi1 = SensingMatrix::gaussian(p, m, 2).unwrap();
        let psi2 = SensingMatrix::gaussian(p, m, 3).unwrap();
        // square compressed matrices need more than 4r·max(m1, m2)
        let w = RankOperator::gaussian(m, m, 4 * r * (m + m), 4).unwrap();
        let op = NestedOperator::doubly_sparse(psi1, w, psi2).unwrap();
        let y = op.apply(&x.matrix).unwrap();
        let res = recover_doubly_sparse(&y, &op, k, k, r, 0.0, &RecoveryConfig::default(), Some(&x)).unwrap();
        assert!(res.relative_error(&x) <= 1e-2, "{}", res.relative_error(&x));

        let zero = recover_doubly_sparse(
            &DVector::zeros(op.len()),
            &op,
            k,
            k,
            r,
            0.0,
            &RecoveryConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(zero.estimate, DMatrix::zeros(p, p));
    }

    #[test]
    fn chi_square_band() {
        let band = noise_band_check(1.0, 1000, 400.0, 10_000, 5).unwrap();
        let floor = 1.0 - 2.0 * (-10f64).exp();
        assert!((band.analytic_bound - floor).abs() < 1e-15);
        assert!(band.empirical >= floor - 3.0 * band.std_error.max(1.0 / band.trials as f64));
        assert_eq!(noise_band_check(0.0, 50, 10.0, 100, 1).unwrap().empirical, 1.0);
        // ν ≥ n leaves only the upper side
        let wide = noise_band_check(2.0, 10, 40.0, 2000, 2).unwrap();
        assert!(wide.empirical > 0.99);
        assert!(noise_band_check(1.0, 10, 0.0, 10, 1).is_err());
    }
}
