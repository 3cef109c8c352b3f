//! Uniform periodic grids on the unit torus and multi-indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 4;

/// Largest `n` accepted in dimension 4 (n^4 samples per field).
pub const MAX_N_DIM4: usize = 32;

/// A uniform grid with `n` points per axis on `T^d = [0,1)^d`.
///
/// Fields on this grid retain the frequencies `m` with `|m_i| <= n/2 - 1`;
/// the Nyquist plane is always discarded so every retained mode has a
/// distinct Hermitian partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    d: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidGrid(format!("dimension {d} outside 1..={MAX_DIM}")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 4, got {n}"
            )));
        }
        if d == 4 && n > MAX_N_DIM4 {
            return Err(Error::InvalidGrid(format!(
                "d = 4 is limited to n <= {MAX_N_DIM4}, got {n}"
            )));
        }
        Ok(Self { d, n })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest retained frequency per axis, `N = n/2 - 1`.
    #[inline]
    pub fn band(&self) -> i64 {
        (self.n / 2) as i64 - 1
    }

    /// Total number of grid points, `n^d`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid with twice the points per axis, used for dealiased products.
    ///
    /// Not subject to the dimension-4 size cap: padded grids only live
    /// inside product evaluations.
    pub fn padded(&self) -> TorusGrid {
        TorusGrid { d: self.d, n: 2 * self.n }
    }

    /// Grid with `3n/2` points per axis. Products of two band-`N` fields sampled
    /// here project onto the band without aliasing, since `3n/2 >= 3N + 1`.
    pub fn quadratic_padded(&self) -> TorusGrid {
        TorusGrid { d: self.d, n: 3 * self.n / 2 }
    }

    /// Signed frequency of FFT storage index `k` along one axis.
    #[inline]
    pub fn freq_of_index(&self, k: usize) -> i64 {
        let n = self.n as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// FFT storage index of signed frequency `m` along one axis.
    #[inline]
    pub fn index_of_freq(&self, m: i64) -> usize {
        m.rem_euclid(self.n as i64) as usize
    }

    /// Decompose a flat (row-major, last axis fastest) index into per-axis indices.
    #[inline]
    pub fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.d).rev() {
            out[axis] = flat % self.n;
            flat /= self.n;
        }
    }

    #[inline]
    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Signed frequency vector at flat storage index.
    pub fn frequency(&self, flat: usize) -> [i64; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        self.unflatten(flat, &mut idx[..self.d]);
        let mut m = [0i64; MAX_DIM];
        for a in 0..self.d {
            m[a] = self.freq_of_index(idx[a]);
        }
        m
    }

    /// Flat storage index of the frequency `m`, or `None` when `m` is outside the array.
    pub fn flat_of_frequency(&self, m: &[i64]) -> Option<usize> {
        if m.len() != self.d {
            return None;
        }
        let half = (self.n / 2) as i64;
        let mut flat = 0usize;
        for &mi in m {
            if mi < -half || mi >= half {
                return None;
            }
            flat = flat * self.n + self.index_of_freq(mi);
        }
        Some(flat)
    }

    /// Flat index of `-m` given the flat index of `m`.
    pub fn conjugate_flat(&self, flat: usize) -> usize {
        let mut idx = [0usize; MAX_DIM];
        self.unflatten(flat, &mut idx[..self.d]);
        for i in idx[..self.d].iter_mut() {
            *i = (self.n - *i) % self.n;
        }
        self.flatten(&idx[..self.d])
    }

    /// True when every component satisfies `|m_i| <= N`.
    pub fn in_band(&self, flat: usize) -> bool {
        let mut idx = [0usize; MAX_DIM];
        self.unflatten(flat, &mut idx[..self.d]);
        idx[..self.d].iter().all(|&i| i != self.n / 2)
    }

    /// Euclidean length of the frequency at each storage index.
    pub fn frequency_norms(&self) -> Vec<f64> {
        (0..self.len())
            .map(|flat| {
                let m = self.frequency(flat);
                m[..self.d].iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt()
            })
            .collect()
    }

    /// Coordinates of grid point `flat` in `[0,1)^d`.
    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        self.unflatten(flat, &mut idx[..self.d]);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.d {
            x[a] = idx[a] as f64 / self.n as f64;
        }
        x
    }
}

/// Derivative order per axis, `|mu| <= 8`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub const MAX_ORDER: u32 = 8;

    pub fn new(orders: Vec<u32>) -> Result<Self> {
        let total: u32 = orders.iter().sum();
        if total > Self::MAX_ORDER {
            return Err(Error::InvalidInput(format!(
                "multi-index order {total} exceeds {}",
                Self::MAX_ORDER
            )));
        }
        Ok(Self(orders))
    }

    pub fn zero(d: usize) -> Self {
        Self(vec![0; d])
    }

    /// `mu = k e_axis`.
    pub fn axis(d: usize, axis: usize, k: u32) -> Result<Self> {
        let mut v = vec![0; d];
        v[axis] = k;
        Self::new(v)
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[u32] {
        &self.0
    }

    pub fn checked_add(&self, other: &MultiIndex) -> Result<MultiIndex> {
        if self.dim() != other.dim() {
            return Err(Error::InvalidInput("multi-index dimension mismatch".into()));
        }
        MultiIndex::new(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}
