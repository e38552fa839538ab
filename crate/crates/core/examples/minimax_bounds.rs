// Fano bound, lower rate and the sampled minimax report.

use nestrec::minimax::{fano_bound, lower_rate, minimax_report};
use nestrec::{NestedOperator, ProblemDims};

pub fn run_example() -> nestrec::Result<()> {
    println!("fano(ln M = 0.12, alpha = 5e-5) = {:.5}", fano_bound(0.12, 5e-5)?);
    let dims = ProblemDims::with_default_rules(1000, 30, 10, 2)?;
    let rate = lower_rate(&dims, 0.01, 1.0)?;
    println!(
        "lower rate at gamma = 1: {:.4e} (epsilon {:.4e})",
        rate.threshold, rate.epsilon
    );

    let small = ProblemDims::with_default_rules(100, 10, 8, 2)?;
    let op = NestedOperator::gaussian(&small, 5)?;
    let rep = minimax_report(&small, 0.01, &op, 30, 6)?;
    println!(
        "p1=100 p2=10 k=8 r=2: gamma {:.3}, log|row| {:.3}, log|col| {:.3}, KL {:.3e}, fano {:?}, rate {:.3e}",
        rep.gamma, rep.log_row_class, rep.log_col_class, rep.kl_mean, rep.fano, rep.lower_rate
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> nestrec::Result<()> {
    run_example()
}
