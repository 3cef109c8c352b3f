//! Fields on the torus: spectral round trip, derivatives, dealiased products
//! and the binary field dump.

use std::f64::consts::PI;

use chx::field::{forward_transform, inverse_transform};
use chx::io::{read_field, write_field};
use chx::{Field, MultiIndex, Result, TorusGrid};

fn main() -> Result<()> {
    let grid = TorusGrid::new(2, 64)?;
    let f = Field::from_fn(grid, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * 3.0 * x[1]).cos())?;

    let back = inverse_transform(&forward_transform(&f))?;
    println!("round trip error      {:.2e}", back.relative_sup_distance(&f));

    let dx = f.derivative(&MultiIndex::new(vec![1, 0])?)?;
    let exact = Field::from_fn(grid, |x| 2.0 * PI * (2.0 * PI * x[0]).cos() * (2.0 * PI * 3.0 * x[1]).cos())?;
    println!("d/dx1 error           {:.2e}", dx.relative_sup_distance(&exact));

    let bilap = f.bilaplacian();
    let lambda = (2.0 * PI).powi(4) * (1.0f64 + 9.0).powi(2);
    println!("bilaplacian / lambda  {:.12}", bilap.sup_norm() / (lambda * f.sup_norm()));

    let sq = f.product_dealiased(&f)?;
    let exact_sq = Field::from_fn(grid, |x| ((2.0 * PI * x[0]).sin() * (2.0 * PI * 3.0 * x[1]).cos()).powi(2))?;
    println!("dealiased square err  {:.2e}", sq.relative_sup_distance(&exact_sq));

    let dir = std::env::temp_dir().join("chx-examples");
    std::fs::create_dir_all(&dir)?;
    write_field(&dir.join("f"), &f, "f")?;
    let (read, name) = read_field(&dir.join("f"))?;
    println!("dump `{name}` restored  {}", read.values() == f.values());
    Ok(())
}
