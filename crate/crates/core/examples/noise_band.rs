// How often `‖z‖²` falls in the band `σ²(n ± ν)` compared with the
// chi-square tail bound.

use nestrec::estimator::noise_band_check;

pub fn run_example() -> nestrec::Result<()> {
    for nu in [100.0, 200.0, 400.0] {
        let band = noise_band_check(0.1, 1000, nu, 2000, 3)?;
        println!(
            "n=1000 nu={nu}: empirical {:.4} (se {:.4}) vs bound {:.6}",
            band.empirical, band.std_error, band.analytic_bound
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> nestrec::Result<()> {
    run_example()
}
