// A small seeded grid written to CSV and read back.

use nestrec::harness::{emit_csv, read_csv, run_grid, ExperimentConfig};

pub fn run_example() -> nestrec::Result<()> {
    let cfg = ExperimentConfig {
        p1: 60,
        p2: 6,
        k_range: (3, 4),
        r_range: (1, 2),
        trials: 3,
        sigma2: 1e-4,
        master_seed: 42,
        ..Default::default()
    };
    let table = run_grid(&cfg)?;
    table.check_medians()?;
    for ((k, r), m) in &table.medians {
        println!("k={k} r={r}: median ||X - X*||^2/sigma^2 = {m:.3}");
    }
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("results.csv");
    emit_csv(&table, &path)?;
    assert_eq!(read_csv(&path)?, table.rows);
    println!(
        "{} rows written and parsed back, {} failed",
        table.rows.len(),
        table.failed_count()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> nestrec::Result<()> {
    run_example()
}
