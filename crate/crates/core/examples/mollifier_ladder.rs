//! Coupled paths at several mollifier scales converge to the unmollified one.

use chx::noise::{coupled_samples, mollifier_convergence_stat, ConvergenceStat};
use chx::{Result, TorusGrid};

fn main() -> Result<()> {
    let grid = TorusGrid::new(1, 64)?;
    let levels = [0.4, 0.2, 0.1, 0.0];
    let paths = (0..50)
        .map(|k| coupled_samples(grid, &levels, 2, k, &[0.02, 0.05, 0.1], true))
        .collect::<Result<Vec<_>>>()?;
    let stat = mollifier_convergence_stat(&paths, 1.3, -0.2)?;
    for (k, eps) in stat.eps.iter().enumerate().take(3) {
        println!("eps {eps}: median gaps X {:.4e}, Y {:.4e}, G {:.4e}", stat.x[k], stat.y[k], stat.g[k]);
    }
    println!("X decreasing: {}", ConvergenceStat::strictly_decreasing(&stat.x[..3]));
    Ok(())
}
