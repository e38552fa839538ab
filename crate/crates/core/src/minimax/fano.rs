//! KL divergence between Gaussian measurement laws, the Fano-type bound
//! and the resulting lower rate.

use rand::Rng as _;
use serde::Serialize;

use super::hypothesis::{col_member, row_member};
use super::packing::{build_sign_packing, build_support_packing};
use super::{SIGN_MIN_FRACTION, SIGN_TARGET_RATE};
use crate::error::{Error, Result};
use crate::model::ProblemDims;
use crate::operators::{estimate_gamma, LinearOperator};
use crate::seed;

/// `D(P_X ‖ P_0) = ‖A(X)‖² / (2σ²)` for `y = A(X) + N(0, σ² I)`.
pub fn kl_gaussian(op: &dyn LinearOperator, x: &nalgebra::DMatrix<f64>, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("KL divergence needs sigma > 0, got {sigma}")));
    }
    Ok(op.measure(x)?.norm_squared() / (2.0 * sigma * sigma))
}

/// `√M/(1+√M) · (1 − 2α − √(2α / ln M))`, taking `ln M` directly.
///
/// Any `ln M > 0` is accepted so that crude log-count floors below `ln 2`
/// can be evaluated; the value may be negative.
pub fn fano_bound(log_m: f64, alpha: f64) -> Result<f64> {
    if !(log_m > 0.0 && log_m.is_finite()) {
        return Err(Error::Domain(format!("need ln M > 0, got {log_m}")));
    }
    if !(alpha > 0.0 && alpha < 0.125) {
        return Err(Error::Domain(format!("need 0 < alpha < 1/8, got {alpha}")));
    }
    let sm = (0.5 * log_m).exp();
    Ok(sm / (1.0 + sm) * (1.0 - 2.0 * alpha - (2.0 * alpha / log_m).sqrt()))
}

/// [`fano_bound`] for an explicit count `M ≥ 2`.
pub fn fano_bound_count(m: usize, alpha: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::Domain(format!("need M >= 2, got {m}")));
    }
    fano_bound((m as f64).ln(), alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerRate {
    /// Hypothesis radius `10⁻² σ √((k ln(p1/k) + r max(k, p2)) / γ)`.
    pub epsilon: f64,
    /// The rate itself, `ε/4`: no estimator gets below it with probability
    /// above ½ uniformly over the class.
    pub threshold: f64,
}

pub fn lower_rate(dims: &ProblemDims, sigma: f64, gamma: f64) -> Result<LowerRate> {
    dims.validate()?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("gamma must be > 0, got {gamma}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    let ProblemDims { p1, p2, k, r, .. } = *dims;
    let complexity = k as f64 * (p1 as f64 / k as f64).ln() + (r * k.max(p2)) as f64;
    let base = sigma * (complexity / gamma).sqrt();
    Ok(LowerRate {
        epsilon: 1e-2 * base,
        threshold: 2.5e-3 * base,
    })
}

/// Everything the `minimax` table shows for one problem size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxReport {
    pub dims: ProblemDims,
    pub sigma: f64,
    /// Largest `‖A(X)‖²/‖X‖²` over the sampled hypotheses.
    pub gamma: f64,
    pub epsilon: f64,
    pub lower_rate: f64,
    pub log_row_class: f64,
    pub log_col_class: f64,
    /// Mean KL divergence over sampled row-class members at `ε`.
    pub kl_mean: f64,
    /// `kl_mean / ln|row class|`
    pub alpha: f64,
    /// Fano value at the achieved log-count, when `α < 1/8`.
    pub fano: Option<f64>,
    pub samples: usize,
}

/// Builds both packings, samples `samples` members of each class, takes
/// `γ` over them and evaluates the bound at the resulting `ε`.
pub fn minimax_report(
    dims: &ProblemDims,
    sigma: f64,
    op: &dyn LinearOperator,
    samples: usize,
    master: u64,
) -> Result<MinimaxReport> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("minimax report needs sigma > 0, got {sigma}")));
    }
    if samples < 1 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let supports = build_support_packing(dims.p1, dims.k, seed::derive(master, "supports", 0))?;
    let row_signs = build_sign_packing(
        dims.r,
        dims.p2,
        SIGN_MIN_FRACTION,
        SIGN_TARGET_RATE,
        seed::derive(master, "row-signs", 0),
    )?;
    let col_signs = build_sign_packing(
        dims.k,
        dims.r,
        SIGN_MIN_FRACTION,
        SIGN_TARGET_RATE,
        seed::derive(master, "col-signs", 0),
    )?;
    let mut rng = seed::stream(master, "hypothesis-sample", 0);
    let mut row_probes = Vec::with_capacity(samples);
    let mut probes = Vec::with_capacity(2 * samples);
    for _ in 0..samples {
        let s = &supports.members[rng.random_range(0..supports.len())];
        let t = &row_signs.members[rng.random_range(0..row_signs.len())];
        row_probes.push(row_member(dims, 1.0, s, t)?);
        let t = &col_signs.members[rng.random_range(0..col_signs.len())];
        probes.push(col_member(dims, 1.0, s, t)?);
    }
    probes.extend(row_probes.iter().cloned());
    let gamma = estimate_gamma(op, &probes)?;
    let rate = lower_rate(dims, sigma, gamma)?;
    let mut kl_sum = 0.0;
    for x in &row_probes {
        kl_sum += kl_gaussian(op, &(x * rate.epsilon), sigma)?;
    }
    let kl_mean = kl_sum / samples as f64;
    let log_row_class = supports.log_count() + row_signs.log_count();
    let log_col_class = supports.log_count() + col_signs.log_count();
    let alpha = kl_mean / log_row_class;
    let fano = if alpha > 0.0 && alpha < 0.125 {
        Some(fano_bound(log_row_class, alpha)?)
    } else {
        None
    };
    Ok(MinimaxReport {
        dims: *dims,
        sigma,
        gamma,
        epsilon: rate.epsilon,
        lower_rate: rate.threshold,
        log_row_class,
        log_col_class,
        kl_mean,
        alpha,
        fano,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{NestedOperator, SensingMatrix};
    use nalgebra::DMatrix;

    #[test]
    fn kl_closed_form() {
        let id = SensingMatrix::identity(1);
        let x = DMatrix::from_element(1, 1, 2.0);
        assert_eq!(kl_gaussian(&id, &x, 1.0).unwrap(), 2.0);
        assert_eq!(kl_gaussian(&id, &DMatrix::zeros(1, 1), 1.0).unwrap(), 0.0);
        assert!(kl_gaussian(&id, &x, 0.0).is_err());
    }

    #[test]
    fn kl_scales_inverse_square() {
        let dims = ProblemDims::new(20, 4, 8, 30, 3, 2).unwrap();
        let op = NestedOperator::gaussian(&dims, 3).unwrap();
        let x = crate::model::random_target(&dims, 4).unwrap().matrix;
        let base = kl_gaussian(&op, &x, 1.0).unwrap();
        for s in [0.1, 1.0, 10.0] {
            let v = kl_gaussian(&op, &x, s).unwrap() * s * s;
            assert!((v - base).abs() <= 1e-12 * base);
        }
    }

    #[test]
    fn fano_values() {
        let v = fano_bound(0.12, 5e-5).unwrap();
        assert!(v > 0.5 && v < 0.501, "{v}");
        assert!(fano_bound(200.0, 1e-12).unwrap() > 0.999);
        assert!(fano_bound_count(2, 0.12499).unwrap() < 0.5);
        assert!(fano_bound_count(1, 0.01).is_err());
        assert!(fano_bound(0.0, 0.01).is_err());
        assert!(fano_bound(1.0, 0.125).is_err());
    }

    #[test]
    fn lower_rate_arithmetic() {
        let dims = ProblemDims::new(1000, 30, 231, 1848, 10, 2).unwrap();
        let lr = lower_rate(&dims, 0.01, 1.0).unwrap();
        assert!((lr.threshold - 2.575e-4).abs() < 1e-7, "{}", lr.threshold);
        assert!((lr.epsilon - 4.0 * lr.threshold).abs() < 1e-18);
        assert_eq!(lower_rate(&dims, 0.0, 1.0).unwrap().threshold, 0.0);
        // p2 < k uses k
        let narrow = ProblemDims::new(1000, 3, 231, 1848, 10, 2).unwrap();
        let want = 2.5e-3 * 0.01 * (10.0 * 100f64.ln() + 20.0).sqrt();
        assert!((lower_rate(&narrow, 0.01, 1.0).unwrap().threshold - want).abs() < 1e-15);
        assert!(lower_rate(&dims, 0.01, 0.0).is_err());
    }

    #[test]
    fn report_respects_gamma_bound() {
        let dims = ProblemDims::with_default_rules(60, 6, 6, 2).unwrap();
        let op = NestedOperator::gaussian(&dims, 8).unwrap();
        let rep = minimax_report(&dims, 0.1, &op, 20, 5).unwrap();
        assert!(rep.kl_mean <= rep.gamma * rep.epsilon.powi(2) / (2.0 * 0.01) * (1.0 + 1e-12));
        assert!(rep.log_row_class >= 4.0 / 25.0 * 6.0 * 10f64.ln() + 3.0 / 25.0 * 12.0 - 1e-9);
        assert!(rep.fano.is_some_and(|f| f > 0.5));
        assert_eq!(rep, minimax_report(&dims, 0.1, &op, 20, 5).unwrap());
    }
}
