// Targets sparse in both rows and columns, measured as `W(Ψ₁ X Ψ₂ᵀ)`.

use nestrec::model::{compressed_rows, random_doubly_sparse_target};
use nestrec::{recover_doubly_sparse, NestedOperator, RankOperator, RecoveryConfig, SensingMatrix};

pub fn run_example() -> nestrec::Result<()> {
    let (p1, p2, k1, k2, r) = (60, 60, 4, 4, 2);
    let (m1, m2) = (compressed_rows(p1, k1), compressed_rows(p2, k2));
    let n = 4 * r * (m1 + m2);
    let op = NestedOperator::doubly_sparse(
        SensingMatrix::gaussian(p1, m1, 1)?,
        RankOperator::gaussian(m1, m2, n, 2)?,
        SensingMatrix::gaussian(p2, m2, 3)?,
    )?;
    let target = random_doubly_sparse_target(p1, p2, k1, k2, r, 4)?;
    let y = op.apply(&target.matrix)?;
    let res = recover_doubly_sparse(&y, &op, k1, k2, r, 0.0, &RecoveryConfig::default(), Some(&target))?;
    println!(
        "{p1}x{p2}, {k1} rows, {k2} columns, rank {r}, m1={m1} m2={m2} n={n}: relative error {:.2e}",
        res.relative_error(&target)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> nestrec::Result<()> {
    run_example()
}
