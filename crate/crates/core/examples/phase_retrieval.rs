// Sparse phase retrieval from nested quadratic measurements.

use nestrec::cpr::{cpr_two_stage, default_compressed_dim, generate_cpr, lifted_error, CprConfig};

pub fn run_example() -> nestrec::Result<()> {
    let (p, k, n) = (64, 3, 200);
    let m = default_compressed_dim(p, k);
    for (seed, sigma) in [(1, 0.0), (2, 0.05)] {
        let inst = generate_cpr(p, k, m, n, sigma, seed)?;
        let out = cpr_two_stage(&inst, k, &CprConfig::default())?;
        let truth = inst.x_true.as_ref().expect("generated");
        println!(
            "p={p} k={k} m={m} n={n} sigma={sigma}: lifted relative error {:.3e}",
            lifted_error(&out.estimate, truth)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> nestrec::Result<()> {
    run_example()
}
