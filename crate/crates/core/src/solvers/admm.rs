//! Scaled-form ADMM for
//!
//! ```text
//! min norm(x)  s.t.  ‖L x − y‖ ≤ radius        (or the penalized form)
//! ```
//!
//! with the splitting `x = z`, `L x = u`. The `x`-update is an exact
//! least-squares solve against a factorization cached once per call, so an
//! iteration costs two products with `L` plus one proximal step.

use nalgebra::{DMatrix, DVector};

use super::factor::AugmentedSystem;
use super::{effective_radius, SolveReport, SolverConfig};
use crate::error::{dim_err, Result};
use crate::linalg::{l12_norm, nuclear_norm};
use crate::operators::{RankOperator, SensingMatrix};
use crate::proximal::{row_soft_threshold, svd_soft_threshold};

/// Rebalance `ρ` when one residual exceeds the other by this factor.
const BALANCE_RATIO: f64 = 4.0;
const RHO_FACTOR: f64 = 2.0;
/// Iterations between penalty checks.
const RHO_INTERVAL: usize = 10;
/// Penalty changes allowed per solve, after which `ρ` stays fixed and the
/// usual convergence guarantee applies.
const MAX_RHO_CHANGES: usize = 12;
/// Over-relaxation weight for the `z`/`u` updates.
const RELAXATION: f64 = 1.6;

struct Problem<'s, P, N> {
    sys: &'s AugmentedSystem,
    /// Data in constraint space, already scaled to unit norm.
    y: DMatrix<f64>,
    radius: f64,
    x_shape: (usize, usize),
    prox: P,
    norm: N,
}

impl<P, N> Problem<'_, P, N>
where
    P: Fn(&DMatrix<f64>, f64) -> Result<DMatrix<f64>>,
    N: Fn(&DMatrix<f64>) -> Result<f64>,
{
    /// Projection onto the data ball, or the prox of `½‖· − y‖²/ρ`.
    fn data_step(&self, w: &DMatrix<f64>, rho: f64, penalty: Option<f64>) -> DMatrix<f64> {
        match penalty {
            Some(_) => (&self.y + w * rho) / (1.0 + rho),
            None => {
                let diff = w - &self.y;
                let dn = diff.norm();
                if dn <= self.radius {
                    w.clone()
                } else {
                    &self.y + diff * (self.radius / dn)
                }
            }
        }
    }

    fn run(&self, cfg: &SolverConfig) -> Result<(DMatrix<f64>, SolveReport)> {
        let (xr, xc) = self.x_shape;
        let lam = cfg.penalty.unwrap_or(1.0);
        let mut rho = cfg.admm_rho;
        let mut rho_changes = 0;
        let mut z = DMatrix::zeros(xr, xc);
        let mut u = self.y.clone();
        let mut dual_x = DMatrix::zeros(xr, xc);
        let mut dual_u = DMatrix::zeros(self.y.nrows(), self.y.ncols());
        let mut report = SolveReport::trivial(0.0);
        report.converged = false;

        for it in 1..=cfg.max_iters {
            let c = &z - &dual_x;
            let e = &u - &dual_u;
            let (x, lx) = self.sys.solve(&c, &e);

            let x_hat = &x * RELAXATION + &z * (1.0 - RELAXATION);
            let lx_hat = &lx * RELAXATION + &u * (1.0 - RELAXATION);
            let z_new = (self.prox)(&(&x_hat + &dual_x), lam / rho)?;
            let u_new = self.data_step(&(&lx_hat + &dual_u), rho, cfg.penalty);
            dual_x += &x_hat - &z_new;
            dual_u += &lx_hat - &u_new;

            let rx = &x - &z_new;
            let ru = &lx - &u_new;

            let primal = (rx.norm_squared() + ru.norm_squared()).sqrt();
            let dual = rho * ((&z_new - &z).norm() + self.sys.adjoint_norm(&(&u_new - &u)));
            let primal_scale = (x.norm_squared() + lx.norm_squared())
                .sqrt()
                .max((z_new.norm_squared() + u_new.norm_squared()).sqrt())
                .max(f64::MIN_POSITIVE);
            let dual_scale = (rho * (dual_x.norm() + self.sys.adjoint_norm(&dual_u))).max(f64::MIN_POSITIVE);
            let rel_primal = primal / primal_scale;
            let rel_dual = dual / dual_scale;

            z = z_new;
            u = u_new;
            report.iters_used = it;
            report.primal_residual = rel_primal;
            report.dual_residual = rel_dual;
            if rel_primal <= cfg.tol && rel_dual <= cfg.tol {
                report.converged = true;
                break;
            }
            if cfg.adaptive_rho && it % RHO_INTERVAL == 0 && rho_changes < MAX_RHO_CHANGES {
                rho_changes += 1;
                if rel_primal > BALANCE_RATIO * rel_dual {
                    rho *= RHO_FACTOR;
                    dual_x /= RHO_FACTOR;
                    dual_u /= RHO_FACTOR;
                } else if rel_dual > BALANCE_RATIO * rel_primal {
                    rho /= RHO_FACTOR;
                    dual_x *= RHO_FACTOR;
                    dual_u *= RHO_FACTOR;
                } else {
                    rho_changes -= 1;
                }
            }
        }

        let fit = (self.sys.forward(&z) - &self.y).norm();
        report.constraint_violation = match cfg.penalty {
            Some(_) => 0.0,
            None => (fit - self.radius).max(0.0),
        };
        report.objective = match cfg.penalty {
            Some(l) => l * (self.norm)(&z)? + 0.5 * fit * fit,
            None => (self.norm)(&z)?,
        };
        Ok((z, report))
    }
}

/// Rescales a unit-data solution back to the caller's units.
fn unscale((x, mut rep): (DMatrix<f64>, SolveReport), scale: f64, penalty: Option<f64>) -> (DMatrix<f64>, SolveReport) {
    rep.constraint_violation *= scale;
    rep.objective *= match penalty {
        Some(_) => scale * scale,
        None => scale,
    };
    (x * scale, rep)
}

/// Penalty in unit-data units. Scaling `y` by `1/s` keeps minimizers when
/// `λ` is scaled by `1/s` too.
fn scaled_cfg(cfg: &SolverConfig, scale: f64) -> SolverConfig {
    SolverConfig {
        penalty: cfg.penalty.map(|l| l / scale),
        ..*cfg
    }
}

/// Nuclear-norm recovery of the compressed `m × p2` matrix from `y ≈ W(B)`.
///
/// Returns `0` when `‖y‖ ≤ radius`; no smaller-norm point is feasible.
pub fn solve_lowrank_stage(
    w: &RankOperator,
    y: &DVector<f64>,
    radius: f64,
    cfg: &SolverConfig,
) -> Result<(DMatrix<f64>, SolveReport)> {
    cfg.validate()?;
    if y.len() != w.len() {
        return Err(dim_err(format!("operator has {} outputs, y has {}", w.len(), y.len())));
    }
    check_radius(radius)?;
    let (rows, cols) = w.input_shape();
    let scale = y.norm();
    let radius = effective_radius(radius, scale, cfg);
    if scale == 0.0 || (cfg.penalty.is_none() && scale <= radius) {
        return Ok((DMatrix::zeros(rows, cols), SolveReport::trivial(0.0)));
    }
    let a = w.matrix();
    let sys = AugmentedSystem::new(&a)?;
    let problem = Problem {
        sys: &sys,
        y: DMatrix::from_column_slice(y.len(), 1, (y / scale).as_slice()),
        radius: radius / scale,
        x_shape: (rows * cols, 1),
        prox: |v: &DMatrix<f64>, tau: f64| {
            let b = DMatrix::from_column_slice(rows, cols, v.as_slice());
            let t = svd_soft_threshold(&b, tau)?;
            Ok(DMatrix::from_column_slice(rows * cols, 1, t.as_slice()))
        },
        norm: |v: &DMatrix<f64>| nuclear_norm(&DMatrix::from_column_slice(rows, cols, v.as_slice())),
    };
    let (v, rep) = unscale(problem.run(&scaled_cfg(cfg, scale))?, scale, cfg.penalty);
    Ok((DMatrix::from_column_slice(rows, cols, v.as_slice()), rep))
}

/// `ℓ1,2` recovery of the row-sparse `p1 × cols` matrix from `b ≈ Ψ X`.
pub fn solve_rowsparse_stage(
    psi: &SensingMatrix,
    b: &DMatrix<f64>,
    radius: f64,
    cfg: &SolverConfig,
) -> Result<(DMatrix<f64>, SolveReport)> {
    cfg.validate()?;
    if b.nrows() != psi.rows() {
        return Err(dim_err(format!("Ψ has {} rows, data has {}", psi.rows(), b.nrows())));
    }
    check_radius(radius)?;
    let scale = b.norm();
    let radius = effective_radius(radius, scale, cfg);
    if scale == 0.0 || (cfg.penalty.is_none() && scale <= radius) {
        let x = DMatrix::zeros(psi.cols(), b.ncols());
        return Ok((x, SolveReport::trivial(0.0)));
    }
    let sys = AugmentedSystem::new(&psi.data)?;
    let problem = Problem {
        sys: &sys,
        y: b / scale,
        radius: radius / scale,
        x_shape: (psi.cols(), b.ncols()),
        prox: row_soft_threshold,
        norm: |v: &DMatrix<f64>| Ok(l12_norm(v)),
    };
    Ok(unscale(problem.run(&scaled_cfg(cfg, scale))?, scale, cfg.penalty))
}

fn check_radius(radius: f64) -> Result<()> {
    if radius >= 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(crate::error::Error::Domain(format!(
            "radius must be finite and >= 0, got {radius}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::relative_error;
    use crate::model::{random_target, ProblemDims};
    use crate::seed;
    use rand_distr::{Distribution, StandardNormal};

    fn gauss(rng: &mut seed::Rng, r: usize, c: usize, sd: f64) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| {
            let g: f64 = StandardNormal.sample(rng);
            sd * g
        })
    }

    fn low_rank(rng: &mut seed::Rng, m: usize, p2: usize, r: usize) -> DMatrix<f64> {
        gauss(rng, m, r, 1.0) * gauss(rng, r, p2, 1.0)
    }

    #[test]
    fn lowrank_stage_recovers_noise_free() {
        let mut rng = seed::rng(10);
        let (m, p2, r) = (20, 10, 2);
        let b = low_rank(&mut rng, m, p2, r);
        let w = RankOperator::gaussian(m, p2, 4 * r * m, 11).unwrap();
        let y = w.apply(&b).unwrap();
        let cfg = SolverConfig::default();
        let (bhat, rep) = solve_lowrank_stage(&w, &y, 0.0, &cfg).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(relative_error(&bhat, &b) <= 1e-3, "{}", relative_error(&bhat, &b));
        assert!(rep.constraint_violation <= 10.0 * cfg.tol * y.norm());
        assert!(rep.objective <= nuclear_norm(&b).unwrap() * (1.0 + 10.0 * cfg.tol));
    }

    #[test]
    fn zero_data_gives_zero() {
        let w = RankOperator::gaussian(4, 3, 20, 1).unwrap();
        let (b, rep) = solve_lowrank_stage(&w, &DVector::zeros(20), 0.0, &SolverConfig::default()).unwrap();
        assert_eq!(b, DMatrix::zeros(4, 3));
        assert!(rep.converged);
        let psi = SensingMatrix::gaussian(10, 5, 2).unwrap();
        let (x, _) = solve_rowsparse_stage(&psi, &DMatrix::zeros(5, 3), 0.0, &SolverConfig::default()).unwrap();
        assert_eq!(x, DMatrix::zeros(10, 3));
    }

    #[test]
    fn radius_covering_data_gives_zero() {
        let mut rng = seed::rng(3);
        let psi = SensingMatrix::gaussian(10, 5, 2).unwrap();
        let b = gauss(&mut rng, 5, 3, 1.0);
        let (x, rep) = solve_rowsparse_stage(&psi, &b, b.norm() * 1.01, &SolverConfig::default()).unwrap();
        assert_eq!(x, DMatrix::zeros(10, 3));
        assert_eq!(rep.objective, 0.0);
    }

    #[test]
    fn rowsparse_stage_recovers_block_sparse() {
        let dims = ProblemDims::with_default_rules(1000, 30, 10, 2).unwrap();
        assert_eq!(dims.m, 231);
        let x = random_target(&dims, 5).unwrap();
        let psi = SensingMatrix::gaussian(dims.p1, dims.m, 6).unwrap();
        let b = psi.apply(&x.matrix).unwrap();
        let cfg = SolverConfig::default();
        let (xhat, rep) = solve_rowsparse_stage(&psi, &b, 0.0, &cfg).unwrap();
        assert!(rep.converged);
        assert!(relative_error(&xhat, &x.matrix) <= 1e-3);
        assert!(rep.constraint_violation <= 10.0 * cfg.tol * b.norm());
    }

    #[test]
    fn noisy_objective_does_not_exceed_truth() {
        let mut rng = seed::rng(8);
        let (m, p2, r) = (15, 8, 2);
        let b = low_rank(&mut rng, m, p2, r);
        let w = RankOperator::gaussian(m, p2, 4 * r * m, 9).unwrap();
        let z = DVector::from_fn(w.len(), |_, _| {
            let g: f64 = StandardNormal.sample(&mut rng);
            0.05 * g
        });
        let y = w.apply(&b).unwrap() + &z;
        let cfg = SolverConfig::noisy();
        let (bhat, rep) = solve_lowrank_stage(&w, &y, z.norm() * 1.1, &cfg).unwrap();
        assert!(rep.converged);
        let truth = nuclear_norm(&b).unwrap();
        assert!(rep.objective <= truth + 10.0 * cfg.tol * truth);
        assert!(rep.constraint_violation <= 10.0 * cfg.tol * y.norm());
        assert!(relative_error(&bhat, &b) < 0.1);
    }

    #[test]
    fn scaling_is_equivariant_and_deterministic() {
        let mut rng = seed::rng(12);
        let psi = SensingMatrix::gaussian(40, 20, 1).unwrap();
        let mut x = DMatrix::zeros(40, 4);
        for i in [3, 17, 30] {
            x.set_row(i, &gauss(&mut rng, 1, 4, 1.0).row(0));
        }
        let b = psi.apply(&x).unwrap();
        let cfg = SolverConfig::noisy();
        let (x1, r1) = solve_rowsparse_stage(&psi, &b, 0.05, &cfg).unwrap();
        let (x2, _) = solve_rowsparse_stage(&psi, &(&b * 7.5), 0.05 * 7.5, &cfg).unwrap();
        assert!((&x1 * 7.5 - &x2).norm() <= 1e-9 * x2.norm());
        let (x3, r3) = solve_rowsparse_stage(&psi, &b, 0.05, &cfg).unwrap();
        assert_eq!(x1, x3);
        assert_eq!(r1, r3);
    }

    #[test]
    fn penalized_form_meets_optimality_conditions() {
        let mut rng = seed::rng(21);
        let psi = SensingMatrix::gaussian(30, 12, 4).unwrap();
        let b = gauss(&mut rng, 12, 3, 1.0);
        let lam = 0.3;
        let cfg = SolverConfig {
            penalty: Some(lam),
            tol: 1e-10,
            max_iters: 20_000,
            ..SolverConfig::default()
        };
        let (x, rep) = solve_rowsparse_stage(&psi, &b, 0.0, &cfg).unwrap();
        assert!(rep.converged);
        // Ψᵀ(B − Ψ X) ∈ λ ∂‖X‖₁,₂
        let g = psi.apply_transpose(&(&b - psi.apply(&x).unwrap())).unwrap();
        for i in 0..x.nrows() {
            let (xi, gi) = (x.row(i), g.row(i));
            if xi.norm() > 1e-8 {
                assert!((gi - xi * (lam / xi.norm())).norm() < 1e-5);
            } else {
                assert!(gi.norm() <= lam + 1e-5);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let w = RankOperator::gaussian(4, 3, 20, 1).unwrap();
        let cfg = SolverConfig::default();
        assert!(solve_lowrank_stage(&w, &DVector::zeros(19), 0.0, &cfg).is_err());
        assert!(solve_lowrank_stage(&w, &DVector::zeros(20), -1.0, &cfg).is_err());
        let psi = SensingMatrix::gaussian(10, 5, 2).unwrap();
        assert!(solve_rowsparse_stage(&psi, &DMatrix::zeros(4, 3), 0.0, &cfg).is_err());
        let bad = SolverConfig { tol: -1.0, ..cfg };
        assert!(solve_rowsparse_stage(&psi, &DMatrix::zeros(5, 3), 0.0, &bad).is_err());
    }
}
