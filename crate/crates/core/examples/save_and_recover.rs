// Persist an operator and measurements, reload them and recover.

use nalgebra::DMatrix;
use nestrec::operators::{load_operator, save_operator};
use nestrec::{matrix_io, random_target, recover, NestedOperator, ProblemDims, RecoveryConfig};

pub fn run_example() -> nestrec::Result<()> {
    let dims = ProblemDims::with_default_rules(80, 6, 4, 1)?;
    let op = NestedOperator::gaussian(&dims, 7)?;
    let target = random_target(&dims, 8)?;
    let y = op.apply(&target.matrix)?;

    let dir = tempfile::tempdir()?;
    save_operator(dir.path().join("op"), &op, Some(7))?;
    matrix_io::save(
        dir.path().join("y.nrm"),
        &DMatrix::from_column_slice(y.len(), 1, y.as_slice()),
    )?;

    let (loaded, manifest) = load_operator(dir.path().join("op"))?;
    let y_back = matrix_io::load(dir.path().join("y.nrm"))?;
    assert_eq!(loaded.apply(&target.matrix)?, y);
    let res = recover(
        &y_back.column(0).into(),
        &loaded,
        &dims,
        0.0,
        &RecoveryConfig::default(),
        Some(&target),
    )?;
    println!(
        "{} frames of kind {:?} reloaded; relative error {:.2e}",
        manifest.n,
        manifest.kind,
        res.relative_error(&target)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> nestrec::Result<()> {
    run_example()
}
