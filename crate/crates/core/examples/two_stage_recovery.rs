// Noise-free and noisy two-stage recovery of a synthetic target.

use nestrec::model::{gaussian_noise, NoiseModel};
use nestrec::{random_target, recover, NestedOperator, ProblemDims, RecoveryConfig};

pub fn run_example() -> nestrec::Result<()> {
    let dims = ProblemDims::with_default_rules(120, 8, 5, 2)?;
    let op = NestedOperator::gaussian(&dims, 1)?;
    let target = random_target(&dims, 2)?;
    let clean = op.apply(&target.matrix)?;

    let res = recover(&clean, &op, &dims, 0.0, &RecoveryConfig::default(), Some(&target))?;
    println!(
        "p1={} p2={} m={} n={} k={} r={}: noise-free relative error {:.2e} (iters {} + {})",
        dims.p1,
        dims.p2,
        dims.m,
        dims.n,
        dims.k,
        dims.r,
        res.relative_error(&target),
        res.stage1_report.iters_used,
        res.stage2_report.iters_used
    );

    let sigma = 0.01;
    let y = clean + gaussian_noise(dims.n, &NoiseModel::new(sigma, 3)?)?;
    let res = recover(&y, &op, &dims, sigma, &RecoveryConfig::noisy(), Some(&target))?;
    let bound = sigma * ((dims.r * dims.m.max(dims.p2)) as f64).sqrt();
    println!(
        "sigma={sigma}: ||X - X*||_F = {:.4e}, sigma*sqrt(r(m v p2)) = {bound:.4e}",
        res.frobenius_error.unwrap_or(f64::NAN)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> nestrec::Result<()> {
    run_example()
}
