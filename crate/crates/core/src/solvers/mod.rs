//! Stage solvers: constrained nuclear-norm and `ℓ1,2` minimization by ADMM,
//! and their hard-thresholding counterparts.

mod admm;
mod factor;
mod iht;

pub use admm::{solve_lowrank_stage, solve_rowsparse_stage};
pub use iht::{iht_lowrank, iht_lowrank_observed, iht_rowsparse, iht_rowsparse_observed};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative tolerance on the ADMM residuals and on IHT iterate changes.
    pub tol: f64,
    /// Initial ADMM penalty.
    pub admm_rho: f64,
    /// Rebalance the ADMM penalty when the residuals drift apart.
    pub adaptive_rho: bool,
    /// Zero radii are replaced by `radius_floor · ‖y‖`.
    pub radius_floor: f64,
    /// Fixed IHT step, or a multiplier on the normalized step.
    pub iht_step: f64,
    /// Scale each IHT step by `‖P g‖² / ‖L(P g)‖²`, where `P` restricts the
    /// gradient `g` to the current iterate's structure.
    pub iht_normalized: bool,
    /// When set, solve the penalized form `½‖L(x) − y‖² + λ·norm(x)` with
    /// this `λ` instead of the radius-constrained form.
    pub penalty: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 2000,
            tol: 1e-8,
            admm_rho: 1.0,
            adaptive_rho: true,
            radius_floor: 1e-9,
            iht_step: 1.0,
            iht_normalized: true,
            penalty: None,
        }
    }
}

impl SolverConfig {
    pub fn noise_free() -> Self {
        Self::default()
    }

    pub fn noisy() -> Self {
        SolverConfig {
            tol: 1e-6,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.tol > 0.0) {
            return bad(format!("tol must be > 0, got {}", self.tol));
        }
        if self.max_iters < 1 {
            return bad("max_iters must be >= 1".into());
        }
        if !(self.admm_rho > 0.0) {
            return bad(format!("admm_rho must be > 0, got {}", self.admm_rho));
        }
        if !(self.iht_step > 0.0) {
            return bad(format!("iht_step must be > 0, got {}", self.iht_step));
        }
        if !(self.radius_floor >= 0.0) {
            return bad(format!("radius_floor must be >= 0, got {}", self.radius_floor));
        }
        if let Some(l) = self.penalty {
            if !(l > 0.0) {
                return bad(format!("penalty must be > 0, got {l}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iters_used: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `max(0, ‖L(x̂) − y‖ − radius)` for the returned estimate.
    pub constraint_violation: f64,
    pub objective: f64,
    pub converged: bool,
}

impl SolveReport {
    pub(crate) fn trivial(objective: f64) -> Self {
        SolveReport {
            iters_used: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            constraint_violation: 0.0,
            objective,
            converged: true,
        }
    }
}

/// The radius actually enforced for data `y_norm`.
pub fn effective_radius(radius: f64, y_norm: f64, cfg: &SolverConfig) -> f64 {
    radius.max(cfg.radius_floor * y_norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig {
            tol: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            max_iters: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            admm_rho: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            penalty: Some(0.0),
            ..Default::default()
        }
        .validate()
        .is_err());
        assert_eq!(SolverConfig::noisy().tol, 1e-6);
    }

    #[test]
    fn radius_floor_applies_only_when_larger() {
        let cfg = SolverConfig::default();
        assert_eq!(effective_radius(0.0, 2.0, &cfg), 2e-9);
        assert_eq!(effective_radius(0.5, 2.0, &cfg), 0.5);
    }
}
