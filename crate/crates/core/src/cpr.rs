//! Compressive phase retrieval through nested quadratic measurements.
//!
//! A `k`-sparse `x ∈ ℝᵖ` is observed as `y_i = ⟨Ψᵀw_i, x⟩² + z_i`, which is a
//! linear measurement of `Ψ x xᵀ Ψᵀ` by the rank-one operator with probes
//! `w_i`. Recovery first estimates `b = Ψx` with Wirtinger flow in the
//! compressed space, then recovers `x xᵀ` from `b̂ b̂ᵀ` by lifted hard
//! thresholding.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg;
use crate::operators::{RankOperator, SensingMatrix};
use crate::seed;

#[derive(Debug, Clone)]
pub struct PhaselessInstance {
    pub psi: SensingMatrix,
    /// `n × m`, one probe `w_i` per row.
    pub probes: DMatrix<f64>,
    pub x_true: Option<DVector<f64>>,
    pub y: DVector<f64>,
    /// Upper bound on `‖z‖₂`.
    pub epsilon: f64,
}

impl PhaselessInstance {
    pub fn new(
        psi: SensingMatrix,
        probes: DMatrix<f64>,
        y: DVector<f64>,
        epsilon: f64,
        x_true: Option<DVector<f64>>,
    ) -> Result<Self> {
        if probes.ncols() != psi.rows() {
            return Err(dim_err(format!(
                "probes have length {} but Ψ has {} rows",
                probes.ncols(),
                psi.rows()
            )));
        }
        if probes.nrows() != y.len() || y.is_empty() {
            return Err(dim_err(format!(
                "{} probes for {} measurements",
                probes.nrows(),
                y.len()
            )));
        }
        if x_true.as_ref().is_some_and(|x| x.len() != psi.cols()) {
            return Err(dim_err("signal length does not match Ψ"));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "epsilon and measurements must be finite, epsilon >= 0".into(),
            ));
        }
        Ok(Self {
            psi,
            probes,
            x_true,
            y,
            epsilon,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Rows `a_i = Ψᵀ w_i`, as an `n × p` matrix.
    pub fn effective_vectors(&self) -> DMatrix<f64> {
        &self.probes * &self.psi.data
    }

    /// The rank-one operator measuring `X ↦ (a_iᵀ X a_i)_i` in signal space.
    pub fn lifted_operator(&self) -> Result<RankOperator> {
        RankOperator::rank_one(self.effective_vectors())
    }

    /// The rank-one operator with probes `w_i`, acting on `m × m` matrices.
    pub fn compressed_operator(&self) -> Result<RankOperator> {
        RankOperator::rank_one(self.probes.clone())
    }
}

/// Draws `Ψ` with `N(0, 1/m)` entries, standard normal probes, a `k`-sparse
/// signal with standard normal nonzeros, and `z ~ N(0, σ² I)`; `ε = ‖z‖₂`.
pub fn generate_cpr(p: usize, k: usize, m: usize, n: usize, sigma: f64, master: u64) -> Result<PhaselessInstance> {
    if p < 1 || m < 1 || n < 1 || k > p {
        return Err(dim_err(format!("invalid sizes p={p}, k={k}, m={m}, n={n}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    let psi = SensingMatrix::gaussian(p, m, seed::derive(master, "cpr-psi", 0))?;
    let mut rng = seed::stream(master, "cpr-probes", 0);
    let probes = DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng));
    let mut rng = seed::stream(master, "cpr-signal", 0);
    let mut x = DVector::zeros(p);
    let mut support = sample(&mut rng, p, k).into_vec();
    support.sort_unstable();
    for i in support {
        x[i] = StandardNormal.sample(&mut rng);
    }
    let mut rng = seed::stream(master, "cpr-noise", 0);
    let z = DVector::from_fn(n, |_, _| {
        let g: f64 = StandardNormal.sample(&mut rng);
        sigma * g
    });
    let a = &probes * &psi.data;
    let y = (&a * &x).map(|v| v * v) + &z;
    PhaselessInstance::new(psi, probes, y, z.norm(), Some(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WfConfig {
    pub power_iters: usize,
    /// Step ramp `μ_t = min(1 − e^{−t/ramp}, step_cap) / ‖x₀‖²`.
    pub ramp: f64,
    pub step_cap: f64,
    /// Seed for the power-iteration start.
    pub seed: u64,
}

impl Default for WfConfig {
    fn default() -> Self {
        Self {
            power_iters: 100,
            ramp: 330.0,
            step_cap: 0.2,
            seed: 0,
        }
    }
}

/// How stage two moves between rank-one, `k`-sparse iterates `u uᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiftedScheme {
    /// Gradient step on the factor, `u + μ Ψᵀ(b̂ − Ψu)`, then keep `k` entries.
    Factor,
    /// Gradient step on `u uᵀ` in the lifted space, then leading eigenvector
    /// thresholded to `k` entries.
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CprConfig {
    pub wf_iters: usize,
    pub iht_iters: usize,
    pub scheme: LiftedScheme,
    /// Stage-two residual target is `c · ε / √n`.
    pub c: f64,
    pub wf: WfConfig,
}

impl Default for CprConfig {
    fn default() -> Self {
        Self {
            wf_iters: 500,
            iht_iters: 100,
            scheme: LiftedScheme::Factor,
            c: 3.0,
            wf: WfConfig::default(),
        }
    }
}

/// `Σ (⟨a_i, x⟩² − y_i)²`
pub fn quadratic_loss(a: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
    (a * x).iter().zip(y.iter()).map(|(v, t)| (v * v - t).powi(2)).sum()
}

/// Wirtinger flow on explicit measurement vectors (rows of `a`).
pub fn wirtinger_flow_vectors(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    iters: usize,
    cfg: &WfConfig,
) -> Result<DVector<f64>> {
    let (n, d) = a.shape();
    if n == 0 || d == 0 || y.len() != n {
        return Err(dim_err(format!("{n}x{d} vectors for {} measurements", y.len())));
    }
    let mean_y = y.sum() / n as f64;
    if y.iter().all(|&v| v == 0.0) || mean_y <= 0.0 {
        return Err(Error::Numerical(
            "spectral initialization needs positive measurements".into(),
        ));
    }
    // power iteration on (1/n) Σ y_i a_i a_iᵀ
    let mut rng = seed::stream(cfg.seed, "wf-start", 0);
    let mut v = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
    v /= v.norm();
    for _ in 0..cfg.power_iters {
        let w = a.tr_mul(&(a * &v).component_mul(y));
        let nw = w.norm();
        if !(nw > 0.0 && nw.is_finite()) {
            return Err(Error::Numerical("spectral initialization collapsed".into()));
        }
        v = w / nw;
    }
    let mut x = v * mean_y.sqrt();
    let norm0 = x.norm_squared();
    for t in 1..=iters {
        let ax = a * &x;
        let r = DVector::from_fn(n, |i, _| (ax[i] * ax[i] - y[i]) * ax[i]);
        let grad = a.tr_mul(&r) / n as f64;
        let mu = (1.0 - (-(t as f64) / cfg.ramp).exp()).min(cfg.step_cap);
        x -= grad * (mu / norm0);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iters: t,
                norm: f64::INFINITY,
                limit: f64::MAX,
            });
        }
    }
    Ok(x)
}

/// Wirtinger flow in signal space on `a_i = Ψᵀ w_i`. The sign is arbitrary.
pub fn wirtinger_flow(inst: &PhaselessInstance, iters: usize, cfg: &WfConfig) -> Result<DVector<f64>> {
    wirtinger_flow_vectors(&inst.effective_vectors(), &inst.y, iters, cfg)
}

#[derive(Debug, Clone)]
pub struct CprResult {
    /// `x̂ x̂ᵀ`
    pub lifted: DMatrix<f64>,
    pub estimate: DVector<f64>,
    /// Stage-one estimate of `Ψ x`.
    pub compressed: DVector<f64>,
    pub stage2_iters: usize,
    /// `‖Ψ X̂ Ψᵀ − B̂‖_F` at exit.
    pub residual: f64,
}

/// Leading eigenpair of `x`, clipped at zero, kept on its `k` largest
/// entries. Returns the factor `u` with `u uᵀ` the projection.
fn sparse_rank_one(x: &DMatrix<f64>, k: usize) -> Result<DVector<f64>> {
    let (lambda, v) = linalg::top_eigenpair(x)?;
    if lambda <= 0.0 {
        return Ok(DVector::zeros(x.nrows()));
    }
    Ok(top_k(v * lambda.sqrt(), k))
}

/// Zeroes all but the `k` largest-magnitude entries.
fn top_k(mut u: DVector<f64>, k: usize) -> DVector<f64> {
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&i, &j| u[j].abs().total_cmp(&u[i].abs()).then(i.cmp(&j)));
    for &i in &order[k.min(u.len())..] {
        u[i] = 0.0;
    }
    u
}

/// Stage one: Wirtinger flow on the probes for `b = Ψx`. Stage two: hard
/// thresholding towards `Ψ X Ψᵀ = b̂ b̂ᵀ` over rank-one, `k`-sparse
/// `X = u uᵀ`, stopping once `‖Ψ X Ψᵀ − b̂ b̂ᵀ‖_F ≤ c ε / √n`. The step is
/// normalized on the current support; the matrix scheme also halves it until
/// the lifted residual does not increase.
pub fn cpr_two_stage(inst: &PhaselessInstance, k: usize, cfg: &CprConfig) -> Result<CprResult> {
    let p = inst.psi.cols();
    if k < 1 || k > p {
        return Err(dim_err(format!("need 1 <= k <= {p}, got {k}")));
    }
    let b = wirtinger_flow_vectors(&inst.probes, &inst.y, cfg.wf_iters, &cfg.wf)?;
    let target = &b * b.transpose();
    let psi = &inst.psi.data;
    let tol = cfg.c * inst.epsilon / (inst.len() as f64).sqrt();
    let lifted_residual = |u: &DVector<f64>| {
        let pu = psi * u;
        &target - &pu * pu.transpose()
    };
    // the factor scheme is not monotone but escapes supports the lifted one sticks on
    let backtrack = cfg.scheme == LiftedScheme::Matrix;
    let mut u = DVector::zeros(p);
    let mut residual = lifted_residual(&u).norm();
    let mut iters = 0;
    while iters < cfg.iht_iters && residual > tol {
        let grad = match cfg.scheme {
            LiftedScheme::Factor => {
                let g = psi.tr_mul(&(&b - psi * &u));
                DMatrix::from_column_slice(p, 1, g.as_slice())
            }
            LiftedScheme::Matrix => psi.tr_mul(&lifted_residual(&u)) * psi,
        };
        let diag = |i: usize| match cfg.scheme {
            LiftedScheme::Factor => grad[(i, 0)].abs(),
            LiftedScheme::Matrix => grad[(i, i)],
        };
        // normalized step on the current support (or the gradient's, at zero)
        let support: Vec<bool> = if u.iter().any(|v| *v != 0.0) {
            u.iter().map(|v| *v != 0.0).collect()
        } else {
            let mut order: Vec<usize> = (0..p).collect();
            order.sort_by(|&i, &j| diag(j).total_cmp(&diag(i)).then(i.cmp(&j)));
            let mut mask = vec![false; p];
            for &i in &order[..k] {
                mask[i] = true;
            }
            mask
        };
        let restricted = DMatrix::from_fn(grad.nrows(), grad.ncols(), |i, j| {
            let keep = support[i] && (grad.ncols() == 1 || support[j]);
            if keep {
                grad[(i, j)]
            } else {
                0.0
            }
        });
        let image = match cfg.scheme {
            LiftedScheme::Factor => psi * &restricted,
            LiftedScheme::Matrix => psi * &restricted * psi.transpose(),
        };
        if image.norm() == 0.0 {
            break;
        }
        let mut step = restricted.norm_squared() / image.norm_squared();
        let propose = |step: f64| match cfg.scheme {
            LiftedScheme::Factor => Ok(top_k(&u + grad.column(0) * step, k)),
            LiftedScheme::Matrix => sparse_rank_one(&(&u * u.transpose() + &grad * step), k),
        };
        let mut next = propose(step)?;
        let mut next_residual = lifted_residual(&next).norm();
        for _ in 0..MAX_HALVINGS {
            if next_residual <= residual || !backtrack {
                break;
            }
            step *= 0.5;
            next = propose(step)?;
            next_residual = lifted_residual(&next).norm();
        }
        iters += 1;
        if next_residual > residual && backtrack {
            break;
        }
        u = next;
        residual = next_residual;
    }
    Ok(CprResult {
        lifted: &u * u.transpose(),
        estimate: u,
        compressed: b,
        stage2_iters: iters,
        residual,
    })
}

const MAX_HALVINGS: usize = 30;

/// `‖x̂x̂ᵀ − xxᵀ‖_F / ‖xxᵀ‖_F`
pub fn lifted_error(estimate: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    let t = truth * truth.transpose();
    (estimate * estimate.transpose() - &t).norm() / t.norm()
}

/// `min(‖x̂ − x‖, ‖x̂ + x‖) / ‖x‖`
pub fn sign_aligned_error(estimate: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    (estimate - truth).norm().min((estimate + truth).norm()) / truth.norm()
}

/// The compressed dimension `⌈2k(1 + ln(p/k))⌉`.
pub fn default_compressed_dim(p: usize, k: usize) -> usize {
    (2.0 * k as f64 * (1.0 + (p as f64 / k as f64).ln())).ceil() as usize
}
