//! Bony decomposition of a product into paraproducts and the resonant term.

use std::f64::consts::PI;

use chx::paraproduct::{bony_decompose, para_lt, resonant};
use chx::{Field, Result, TorusGrid};

fn main() -> Result<()> {
    let grid = TorusGrid::new(1, 256)?;
    let low = Field::from_fn(grid, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos())?;
    let high = Field::from_fn(grid, |x| (2.0 * PI * 64.0 * x[0]).sin())?;

    let parts = bony_decompose(&low, &high)?;
    let exact = low.product_dealiased(&high)?;
    println!("identity deviation     {:.2e}", parts.sum().relative_sup_distance(&exact));
    println!("||low ⊘ high||_inf     {:.4}", para_lt(&low, &high)?.sup_norm());
    println!("||low ⊙ high||_inf     {:.2e}", resonant(&low, &high)?.sup_norm());
    println!("||low ⊗ high||_inf     {:.2e}", parts.para_gt.sup_norm());
    Ok(())
}
