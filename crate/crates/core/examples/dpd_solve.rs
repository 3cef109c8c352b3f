//! Remainder equation driven by an additive noise path in d = 1, with the
//! trajectory archive written to disk.

use chx::harness::InitialData;
use chx::io::write_trajectory_archive;
use chx::noise::RawPath;
use chx::series::TimeSeries;
use chx::solver::{solve_remainder_low_dim, SolverConfig};
use chx::{Result, TorusGrid};

fn main() -> Result<()> {
    let grid = TorusGrid::new(1, 64)?;
    let cfg = SolverConfig { dt: 1e-5, ..SolverConfig::default() };
    let steps = 1000;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * cfg.dt).collect();
    let raw = RawPath::simulate(grid, 11, 0, &times)?;
    let driver = TimeSeries::new(times, raw.fields(0.1)?)?;
    let g = InitialData::default().field(grid)?;
    let traj = solve_remainder_low_dim(&g, &driver, &cfg)?;
    println!("status {:?}, {} windows, max contraction {:.3e}", traj.status, traj.windows.len(), traj.max_contraction());
    println!("||f(U)||_alpha = {:.6}", traj.norms.last().unwrap());
    let dir = std::env::temp_dir().join("chx-examples").join("trajectory");
    let m = write_trajectory_archive(&dir, &traj, "f", 100)?;
    println!("wrote {} snapshots and trajectory.csv to {}", m.snapshots.len(), dir.display());
    Ok(())
}
