//! Dyadic blocks, Besov norms and the Bernstein ratio of a rough field.

use chx::littlewood_paley::{bernstein_ratio, BlockProjector};
use chx::{Field, MultiIndex, Result, TorusGrid};
use num_complex::Complex64;

fn main() -> Result<()> {
    let grid = TorusGrid::new(1, 256)?;
    // |c(m)| = |m|^{-3/2}: Hoelder-Besov regularity 1/2.
    let f = Field::from_modes(grid, |m| {
        let k = m[0].abs() as f64;
        if k == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(k.powf(-1.5), 0.0)
        }
    });
    let bp = BlockProjector::new(grid);
    let blocks = bp.decompose(&f)?;
    println!("blocks -1..={}, reconstruction error {:.2e}", bp.max_block(), blocks.reconstruct().relative_sup_distance(&f));

    let report = bp.besov_sup_norm(&f, 0.5)?;
    print!("{}", report.to_csv());
    println!("||f||_0.5 = {:.4}", report.sup);
    println!("B^0.5_(2,2) norm = {:.4}", bp.besov_brg_norm(&f, 0.5, 2.0, 2.0)?);

    let low = bp.block(&f, 2)?.add(&bp.block(&f, 1)?)?;
    let mu = MultiIndex::new(vec![1])?;
    println!("Bernstein ratio (q = inf, beta = 16): {:.4}", bernstein_ratio(&low, &mu, f64::INFINITY, 16.0)?);
    Ok(())
}
