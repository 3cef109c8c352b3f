//! Least-squares rate fitting in log-log or semi-log coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateModel {
    /// `y = A x^p`, fitted as `log y` against `log x`.
    Power,
    /// `y = A e^{k x}`, fitted as `log y` against `x`.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

/// Fit `y` against `x` under `model`. Needs at least three points and positive `y`
/// (and positive `x` for the power model).
pub fn fit_rate(points: &[(f64, f64)], model: RateModel) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(x, y) in points {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::InvalidInput(format!("non-positive value y = {y}")));
        }
        let x = match model {
            RateModel::Power => {
                if !(x > 0.0) {
                    return Err(Error::InvalidInput(format!("non-positive abscissa x = {x}")));
                }
                x.ln()
            }
            RateModel::Exponential => x,
        };
        xs.push(x);
        ys.push(y.ln());
    }
    let (slope, intercept, r2) = linear_regression(&xs, &ys)?;
    Ok(RateFit { exponent: slope, prefactor: intercept.exp(), r_squared: r2 })
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, R^2)`.
pub fn linear_regression(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((a, b, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_square() {
        let pts: Vec<_> = (1..=6).map(|i| (i as f64, (i * i) as f64)).collect();
        let fit = fit_rate(&pts, RateModel::Power).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<_> = (0..20)
            .map(|i| {
                let x = 0.5 * 1.3f64.powi(i);
                let noise = 1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0);
                (x, 3.0 * x.powf(-1.5) * noise)
            })
            .collect();
        let fit = fit_rate(&pts, RateModel::Power).unwrap();
        assert!((fit.exponent + 1.5).abs() < 0.05, "{}", fit.exponent);
    }

    #[test]
    fn exponential_model() {
        let pts: Vec<_> = (0..5).map(|i| (i as f64, 2.0 * (-0.7 * i as f64).exp())).collect();
        let fit = fit_rate(&pts, RateModel::Exponential).unwrap();
        assert!((fit.exponent + 0.7).abs() < 1e-12);
        assert!((fit.prefactor - 2.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 4.0)], RateModel::Power).is_err());
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)], RateModel::Power).is_err());
        assert!(fit_rate(&[(0.0, 1.0), (2.0, 1.0), (3.0, 1.0)], RateModel::Power).is_err());
    }
}
