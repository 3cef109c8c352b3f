//! Biharmonic heat semigroup, mollification, Duhamel integrals and the
//! Schauder smoothing rate.

use std::f64::consts::PI;

use chx::harness::slow_spectrum;
use chx::semigroup::{apply_semigroup, duhamel_integrate, mollify, schauder_rate, MollifierSymbol};
use chx::series::TimeSeries;
use chx::{Field, Result, TorusGrid};

fn main() -> Result<()> {
    let grid = TorusGrid::new(1, 128)?;
    let f = Field::from_fn(grid, |x| (2.0 * PI * x[0]).cos())?;
    let r = 1e-3;
    let decay = apply_semigroup(r, &f)?.sup_norm();
    println!("P_r cos decay {:.12} vs {:.12}", decay, (-r * (2.0 * PI).powi(4)).exp());

    let rough = Field::from_fn(grid, |x| if x[0] < 0.5 { 1.0 } else { -1.0 })?;
    let smooth = mollify(&rough, &MollifierSymbol::new(0.1)?);
    println!("mollified step sup {:.4}", smooth.sup_norm());

    let steps = 1000;
    let source = TimeSeries::constant(f.clone(), 1e-4, steps)?;
    let integral = duhamel_integrate(&source)?;
    let lambda = (2.0 * PI).powi(4);
    let t = 1e-4 * steps as f64;
    println!("Duhamel of constant mode {:.8} vs {:.8}", integral.fields.last().unwrap().sup_norm(), -(-lambda * t).exp_m1() / lambda);

    let g = slow_spectrum(TorusGrid::new(1, 512)?);
    let rs: Vec<f64> = (0..17).map(|k| 10f64.powf(-11.0 + 0.25 * k as f64)).collect();
    for beta in [1.0, 2.0, 3.0] {
        let fit = schauder_rate(&g, 0.0, beta, &rs)?;
        println!("beta = {beta}: fitted exponent {:.4} (target {:.4}), R^2 {:.5}", fit.exponent, beta / 4.0, fit.r_squared);
    }
    Ok(())
}
