//! Block-decay estimate of the spatial regularity of the stochastic convolution.

use chx::harness::last_full_block;
use chx::littlewood_paley::regularity_slope;
use chx::noise::OUState;
use chx::{Result, TorusGrid};

fn main() -> Result<()> {
    let grid = TorusGrid::new(1, 1024)?;
    let fields = (0..50)
        .map(|k| {
            let mut s = OUState::new(grid, 3, k);
            s.advance_to(0.1)?;
            s.field(0.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let top = last_full_block(grid);
    let slope = regularity_slope(&fields, 3, top)?;
    println!("blocks 3..={top}: slope {slope:.3} (theory 2 - d/2 = 1.5)");
    Ok(())
}
