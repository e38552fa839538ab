// Convex (ADMM) and greedy (IHT) stage solvers on the same instance.

use nestrec::{random_target, recover, NestedOperator, ProblemDims, RecoveryConfig, StageMethod};

pub fn run_example() -> nestrec::Result<()> {
    let dims = ProblemDims::with_default_rules(100, 8, 5, 2)?;
    let op = NestedOperator::gaussian(&dims, 21)?;
    let target = random_target(&dims, 22)?;
    let y = op.apply(&target.matrix)?;
    let mut estimates = Vec::new();
    for method in [StageMethod::Admm, StageMethod::Iht] {
        let cfg = RecoveryConfig {
            stage1: method,
            stage2: method,
            ..Default::default()
        };
        let res = recover(&y, &op, &dims, 0.0, &cfg, Some(&target))?;
        println!(
            "{method:?}: relative error {:.2e}, iterations {} + {}",
            res.relative_error(&target),
            res.stage1_report.iters_used,
            res.stage2_report.iters_used
        );
        estimates.push(res.estimate);
    }
    let gap = (&estimates[0] - &estimates[1]).norm() / estimates[0].norm();
    println!("relative gap between solvers {gap:.2e}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> nestrec::Result<()> {
    run_example()
}
