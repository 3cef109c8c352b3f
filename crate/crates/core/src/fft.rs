//! Multi-dimensional complex FFT over row-major arrays, backed by `rustfft`.
//!
//! Plans are cached per thread; no workspace is shared between threads.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(PlanCache::default());
}

struct PlanCache {
    planner: FftPlanner<f64>,
    plans: HashMap<(usize, bool), Arc<dyn Fft<f64>>>,
}

impl Default for PlanCache {
    fn default() -> Self {
        Self { planner: FftPlanner::new(), plans: HashMap::new() }
    }
}

impl PlanCache {
    fn get(&mut self, n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
        let key = (n, direction == FftDirection::Forward);
        if let Some(p) = self.plans.get(&key) {
            return Arc::clone(p);
        }
        let p = self.planner.plan_fft(n, direction);
        self.plans.insert(key, Arc::clone(&p));
        p
    }
}

/// Unnormalized in-place transform of a `n^d` row-major array.
pub fn transform(data: &mut [Complex64], d: usize, n: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), n.pow(d as u32));
    let fft = PLANS.with(|c| c.borrow_mut().get(n, direction));
    let len = data.len();
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut lines = vec![Complex64::new(0.0, 0.0); len];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        if stride == 1 {
            process_nonzero_lines(fft.as_ref(), data, n, &mut scratch);
            continue;
        }
        // Each outer block is an `n x stride` matrix; transposing it makes the lines contiguous.
        let block = stride * n;
        for outer in (0..len).step_by(block) {
            transpose(&data[outer..outer + block], &mut lines[outer..outer + block], n, stride);
        }
        process_nonzero_lines(fft.as_ref(), &mut lines, n, &mut scratch);
        for outer in (0..len).step_by(block) {
            transpose(&lines[outer..outer + block], &mut data[outer..outer + block], stride, n);
        }
    }
}

/// Transform every length-`n` line, skipping all-zero lines (their transform is zero).
/// Band-limited data on padded grids is mostly such lines.
fn process_nonzero_lines(fft: &dyn Fft<f64>, buf: &mut [Complex64], n: usize, scratch: &mut [Complex64]) {
    let zero = Complex64::new(0.0, 0.0);
    let lines = buf.len() / n;
    let mut k = 0;
    while k < lines {
        if buf[k * n..(k + 1) * n].iter().all(|&c| c == zero) {
            k += 1;
            continue;
        }
        let start = k;
        while k < lines && buf[k * n..(k + 1) * n].iter().any(|&c| c != zero) {
            k += 1;
        }
        fft.process_with_scratch(&mut buf[start * n..k * n], scratch);
    }
}

/// Tiled transpose of a `rows x cols` row-major matrix.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const TILE: usize = 16;
    for r0 in (0..rows).step_by(TILE) {
        for c0 in (0..cols).step_by(TILE) {
            for r in r0..(r0 + TILE).min(rows) {
                for c in c0..(c0 + TILE).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Coefficients `c(m) = n^{-d} sum_x v(x) e^{-2 pi i <m,x>}` in FFT storage order.
pub fn forward_real(values: &[f64], d: usize, n: usize) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(&mut data, d, n, FftDirection::Forward);
    let scale = 1.0 / data.len() as f64;
    for c in data.iter_mut() {
        *c *= scale;
    }
    data
}

/// Samples `v(x) = sum_m c(m) e^{2 pi i <m,x>}`; imaginary parts are dropped.
pub fn inverse_real(coeffs: &[Complex64], d: usize, n: usize) -> Vec<f64> {
    let mut data = coeffs.to_vec();
    transform(&mut data, d, n, FftDirection::Inverse);
    data.into_iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_dft_2d() {
        let (d, n) = (2, 4);
        let vals: Vec<f64> = (0..16).map(|i| ((i * 7 % 5) as f64) - 1.3).collect();
        let c = forward_real(&vals, d, n);
        for k0 in 0..n {
            for k1 in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for x0 in 0..n {
                    for x1 in 0..n {
                        let ph = -2.0 * std::f64::consts::PI * ((k0 * x0 + k1 * x1) as f64) / n as f64;
                        acc += vals[x0 * n + x1] * Complex64::from_polar(1.0, ph);
                    }
                }
                acc /= 16.0;
                assert!((acc - c[k0 * n + k1]).norm() < 1e-13);
            }
        }
        let back = inverse_real(&c, d, n);
        for (a, b) in back.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
