//! Fields sampled on a uniform time grid.

use crate::error::{Error, Result};
use crate::field::Field;

/// Relative tolerance on time-step uniformity.
const UNIFORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, fields: Vec<Field>) -> Result<Self> {
        if times.len() != fields.len() {
            return Err(Error::TimeGrid(format!(
                "{} times for {} fields",
                times.len(),
                fields.len()
            )));
        }
        if let Some(f0) = fields.first() {
            for f in &fields {
                f0.ensure_same_grid(f)?;
            }
        }
        Ok(Self { times, fields })
    }

    /// `t_k = t0 + k dt` for `k < fields.len()`.
    pub fn uniform(t0: f64, dt: f64, fields: Vec<Field>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        let times = (0..fields.len()).map(|k| t0 + k as f64 * dt).collect();
        Self::new(times, fields)
    }

    /// A constant series of `steps + 1` copies of `field`.
    pub fn constant(field: Field, dt: f64, steps: usize) -> Result<Self> {
        Self::uniform(0.0, dt, vec![field; steps + 1])
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// The common step, or an error when the grid is not uniform.
    pub fn step(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(Error::TimeGrid("need at least two times".into()));
        }
        let dt = self.times[1] - self.times[0];
        if !(dt > 0.0) {
            return Err(Error::TimeGrid(format!("non-increasing times (step {dt})")));
        }
        for (k, w) in self.times.windows(2).enumerate() {
            let h = w[1] - w[0];
            if (h - dt).abs() > UNIFORM_TOL * dt + 4.0 * f64::EPSILON * w[1].abs() {
                return Err(Error::TimeGrid(format!("non-uniform step {h} at index {k} (expected {dt})")));
            }
        }
        Ok(dt)
    }

    /// True when both series share a time grid within tolerance.
    pub fn same_times(&self, other: &TimeSeries) -> bool {
        self.times.len() == other.times.len()
            && self
                .times
                .iter()
                .zip(&other.times)
                .all(|(a, b)| (a - b).abs() <= UNIFORM_TOL * a.abs().max(b.abs()).max(1e-12))
    }
}
