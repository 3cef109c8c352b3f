//! Power and exponential rate fits.

use chx::fit::{fit_rate, RateModel};
use chx::Result;

fn main() -> Result<()> {
    let power: Vec<(f64, f64)> = [0.4, 0.2, 0.1, 0.05].iter().map(|&e: &f64| (e, 3.0 * e.powf(1.5))).collect();
    let fit = fit_rate(&power, RateModel::Power)?;
    println!("power: exponent {:.4}, prefactor {:.4}, R^2 {:.4}", fit.exponent, fit.prefactor, fit.r_squared);
    let expo: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 2.0 * (-0.7 * k as f64).exp())).collect();
    let fit = fit_rate(&expo, RateModel::Exponential)?;
    println!("exponential: rate {:.4}, prefactor {:.4}", fit.exponent, fit.prefactor);
    Ok(())
}
