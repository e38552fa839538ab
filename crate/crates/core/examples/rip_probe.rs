// Empirical restricted-isometry lower bounds for Gaussian Ψ and W.

use nestrec::operators::{estimate_rip, gamma_product, Structure};
use nestrec::{NestedOperator, ProblemDims};

pub fn run_example() -> nestrec::Result<()> {
    let dims = ProblemDims::with_default_rules(300, 10, 6, 2)?;
    let op = NestedOperator::gaussian(&dims, 11)?;
    let psi = estimate_rip(&op.psi, (dims.p1, dims.p2), Structure::RowSparse(dims.k), 100, 1)?;
    let w = estimate_rip(&op.w, (dims.m, dims.p2), Structure::LowRank(dims.r), 100, 2)?;
    println!("psi: delta >= {:.3} over {} probes", psi.delta_lower_bound, psi.trials);
    println!("w:   delta >= {:.3} over {} probes", w.delta_lower_bound, w.trials);
    println!("working gamma {:.3}", gamma_product(&psi, &w));
    Ok(())
}

#[allow(dead_code)]
fn main() -> nestrec::Result<()> {
    run_example()
}
