//! Seeded experiment grids over `(k, r)` with per-trial results and medians.

mod table;

pub use table::{emit_csv, median, parse_csv, pearson, read_csv, write_csv, ResultTable, TrialResult, CSV_HEADER};

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{recover, RecoveryConfig};
use crate::model::{compressed_rows, gaussian_noise, measurement_count, random_target, NoiseModel, ProblemDims};
use crate::operators::NestedOperator;
use crate::seed;

/// Rule for the compressed dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum MRule {
    #[default]
    #[serde(rename = "ceil(5k·log(p1/k))", alias = "ceil(5k*log(p1/k))")]
    FiveKLog,
}

/// Rule for the measurement count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum NRule {
    #[default]
    #[serde(rename = "4r·max(m,p2)", alias = "4r*max(m,p2)")]
    FourRMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p1: usize,
    pub p2: usize,
    /// Inclusive `[lo, hi]`.
    pub k_range: (usize, usize),
    /// Inclusive `[lo, hi]`.
    pub r_range: (usize, usize),
    pub sigma2: f64,
    pub trials: usize,
    pub m_rule: MRule,
    pub n_rule: NRule,
    pub master_seed: u64,
    pub recovery: RecoveryConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            p1: 200,
            p2: 10,
            k_range: (8, 14),
            r_range: (1, 4),
            sigma2: 1e-4,
            trials: 20,
            m_rule: MRule::FiveKLog,
            n_rule: NRule::FourRMax,
            master_seed: 0,
            recovery: RecoveryConfig::noisy(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let (k0, k1) = self.k_range;
        let (r0, r1) = self.r_range;
        if k0 > k1 || r0 > r1 {
            return Err(Error::Config(format!("empty range k={k0}..={k1} or r={r0}..={r1}")));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Config(format!("sigma2 must be >= 0, got {}", self.sigma2)));
        }
        self.recovery.validate()?;
        for (k, r) in self.cells() {
            self.dims(k, r)?;
        }
        Ok(())
    }

    /// `(k, r)` cells in output order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in self.k_range.0..=self.k_range.1 {
            for r in self.r_range.0..=self.r_range.1 {
                out.push((k, r));
            }
        }
        out
    }

    pub fn dims(&self, k: usize, r: usize) -> Result<ProblemDims> {
        if k == 0 || k > self.p1 {
            return Err(Error::Config(format!("k={k} outside 1..={}", self.p1)));
        }
        let m = match self.m_rule {
            MRule::FiveKLog => compressed_rows(self.p1, k),
        };
        let n = match self.n_rule {
            NRule::FourRMax => measurement_count(r, m, self.p2),
        };
        ProblemDims::new(self.p1, self.p2, m, n, k, r)
    }

    /// Seed of one trial; depends only on the cell and trial index.
    pub fn trial_seed(&self, k: usize, r: usize, trial: usize) -> u64 {
        seed::derive(self.master_seed, &format!("trial/k{k}/r{r}"), trial as u64)
    }
}

/// One draw of `Ψ`, `W`, `X*` and `z` for cell `(k, r)`, then recovery.
///
/// Recovery errors and non-convergence are recorded in the row (`failed`);
/// only invalid configurations are errors.
pub fn run_trial(cfg: &ExperimentConfig, k: usize, r: usize, trial: usize) -> Result<TrialResult> {
    let dims = cfg.dims(k, r)?;
    let seed = cfg.trial_seed(k, r, trial);
    let sigma = cfg.sigma2.sqrt();
    let start = Instant::now();
    let outcome = (|| {
        let op = NestedOperator::gaussian(&dims, seed::derive(seed, "operator", 0))?;
        let target = random_target(&dims, seed::derive(seed, "target", 0))?;
        let noise = gaussian_noise(dims.n, &NoiseModel::new(sigma, seed::derive(seed, "noise", 0))?)?;
        let y = op.apply(&target.matrix)? + noise;
        recover(&y, &op, &dims, sigma, &cfg.recovery, Some(&target))
    })();
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let scale = if cfg.sigma2 > 0.0 { cfg.sigma2 } else { 1.0 };
    let mut row = TrialResult {
        k,
        r,
        m: dims.m,
        n: dims.n,
        trial,
        seed,
        err_fro: f64::NAN,
        err_norm_sq: f64::NAN,
        stage1_iters: 0,
        stage2_iters: 0,
        wall_ms,
        failed: true,
    };
    if let Ok(res) = outcome {
        let err = res.frobenius_error.unwrap_or(f64::NAN);
        row.err_fro = err;
        row.err_norm_sq = err * err / scale;
        row.stage1_iters = res.stage1_report.iters_used;
        row.stage2_iters = res.stage2_report.iters_used;
        row.failed = !res.converged() || !err.is_finite();
    }
    Ok(row)
}

/// Every cell × trial, on the current rayon pool. The rows, apart from
/// `wall_ms`, do not depend on scheduling.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<ResultTable> {
    run_grid_with(cfg, true)
}

pub fn run_grid_with(cfg: &ExperimentConfig, parallel: bool) -> Result<ResultTable> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, usize)> = cfg
        .cells()
        .into_iter()
        .flat_map(|(k, r)| (0..cfg.trials).map(move |t| (k, r, t)))
        .collect();
    let rows: Result<Vec<TrialResult>> = if parallel {
        jobs.par_iter().map(|&(k, r, t)| run_trial(cfg, k, r, t)).collect()
    } else {
        jobs.iter().map(|&(k, r, t)| run_trial(cfg, k, r, t)).collect()
    };
    Ok(ResultTable::new(rows?, cfg.sigma2 == 0.0))
}
