//! Stability of the remainder with respect to its initial datum and Wick inputs.

use chx::harness::{stability_pair, StabilityParams};
use chx::solver::stability_terms;
use chx::Result;

fn main() -> Result<()> {
    let p = StabilityParams::default();
    for k in 0..8 {
        let (a, b) = stability_pair(&p, 1, k)?;
        let t = stability_terms(&a, &b, p.horizon, &p.solver)?;
        println!(
            "pair {k}: left {:.3e}, initial gap {:.3e}, Wick gaps ({:.1e}, {:.1e}, {:.1e}), minimal c {:.3e}",
            t.left,
            t.initial_gap,
            t.x_gap,
            t.y_gap,
            t.g_gap,
            t.minimal_constant()
        );
    }
    Ok(())
}
