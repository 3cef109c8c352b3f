//! Stochastic convolution, renormalization constant and Wick powers.

use chx::io::write_path_archive;
use chx::noise::{psi, sample_step, wick_powers, NoiseConfig, OUState, RawPath};
use chx::{Result, TorusGrid};

fn main() -> Result<()> {
    let grid = TorusGrid::new(2, 32)?;
    let config = NoiseConfig::new(grid, 0.1, 7, 1e-3)?;
    let mut state = OUState::new(grid, config.seed, 0);
    for _ in 0..100 {
        state = sample_step(state, config.dt)?;
    }
    let p = psi(&config, state.time())?;
    println!("t = {:.3}: psi discrete {:.6}, continuum {:.6}", state.time(), p.discrete, p.continuum);

    let w = wick_powers(&state, &config)?;
    println!("mean X^2 - psi = mean Y: {:.3e} vs {:.3e}", w.x.product_dealiased(&w.x)?.mean() - w.psi, w.y.mean());
    println!("Wick identity defect {:.2e}", w.identity_defect());

    let times = [0.02, 0.05, 0.1];
    let raw = RawPath::simulate(grid, config.seed, 1, &times)?;
    let dir = std::env::temp_dir().join("chx-examples").join("path");
    let manifest = write_path_archive(&dir, config.seed, 1, config.eps, &times, &raw.fields(config.eps)?, "X")?;
    println!("wrote {} snapshots to {}", manifest.snapshots.len(), dir.display());
    Ok(())
}
