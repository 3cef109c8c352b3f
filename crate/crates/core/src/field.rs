//! Real band-limited fields on the torus and their exact spectral operations.
//!
//! Coefficient convention: `f(x) = sum_m c(m) e^{2 pi i <m,x>}` with
//! `c(m) = n^{-d} sum_x f(x) e^{-2 pi i <m,x>}`. Every [`Field`] keeps its
//! samples and its coefficients in sync and carries no Nyquist content.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{MultiIndex, TorusGrid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative tolerance for accepting coefficients as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Full DFT coefficients of a real grid function, in FFT storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, coeffs: vec![ZERO; grid.len()] }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at frequency `m`; zero for frequencies outside the array.
    pub fn get(&self, m: &[i64]) -> Complex64 {
        self.grid.flat_of_frequency(m).map_or(ZERO, |i| self.coeffs[i])
    }

    /// Set `c(m)` and `c(-m) = conj(c(m))` together.
    pub fn set_pair(&mut self, m: &[i64], value: Complex64) -> Result<()> {
        let i = self
            .grid
            .flat_of_frequency(m)
            .filter(|&i| self.grid.in_band(i))
            .ok_or_else(|| Error::InvalidInput(format!("frequency {m:?} outside band")))?;
        let j = self.grid.conjugate_flat(i);
        if i == j {
            self.coeffs[i] = Complex64::new(value.re, 0.0);
        } else {
            self.coeffs[i] = value;
            self.coeffs[j] = value.conj();
        }
        Ok(())
    }

    /// Largest `|c(-m) - conj(c(m))|` and where it occurs.
    pub fn hermitian_defect(&self) -> (f64, usize) {
        let mut worst = (0.0, 0);
        for i in 0..self.coeffs.len() {
            let j = self.grid.conjugate_flat(i);
            let dev = (self.coeffs[j] - self.coeffs[i].conj()).norm();
            if dev > worst.0 {
                worst = (dev, i);
            }
        }
        worst
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let (dev, at) = self.hermitian_defect();
        if dev > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
            let m = self.grid.frequency(at);
            return Err(Error::SymmetryViolation {
                frequency: m[..self.grid.dim()].to_vec(),
                deviation: dev,
            });
        }
        Ok(())
    }

    /// Sum of `|c(m)|^2` over the array.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Full DFT of real samples. Fails on non-finite input.
pub fn forward_transform_values(grid: TorusGrid, values: &[f64]) -> Result<Spectrum> {
    check_samples(grid, values)?;
    Ok(Spectrum { grid, coeffs: fft::forward_real(values, grid.dim(), grid.n()) })
}

/// Coefficients of a field (band-limited, Hermitian).
pub fn forward_transform(field: &Field) -> Spectrum {
    Spectrum { grid: field.grid, coeffs: field.coeffs.clone() }
}

/// Synthesize a field from Hermitian coefficients; out-of-band content is discarded.
pub fn inverse_transform(spectrum: &Spectrum) -> Result<Field> {
    spectrum.check_hermitian()?;
    let mut coeffs = spectrum.coeffs.clone();
    symmetrize_and_truncate(spectrum.grid, &mut coeffs);
    Ok(Field::from_coeffs_unchecked(spectrum.grid, coeffs))
}

fn check_samples(grid: TorusGrid, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "expected {} samples, got {}",
            grid.len(),
            values.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite sample at index {i}")));
    }
    Ok(())
}

/// Zero the Nyquist planes and enforce exact Hermitian symmetry.
fn symmetrize_and_truncate(grid: TorusGrid, coeffs: &mut [Complex64]) {
    for i in 0..coeffs.len() {
        if !grid.in_band(i) {
            coeffs[i] = ZERO;
            continue;
        }
        let j = grid.conjugate_flat(i);
        if j == i {
            coeffs[i].im = 0.0;
        } else if j > i {
            let avg = 0.5 * (coeffs[i] + coeffs[j].conj());
            coeffs[i] = avg;
            coeffs[j] = avg.conj();
        }
    }
}

/// A real scalar field on a [`TorusGrid`], stored both as samples and coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
    coeffs: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()], coeffs: vec![ZERO; grid.len()] }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        let mut coeffs = vec![ZERO; grid.len()];
        coeffs[0] = Complex64::new(c, 0.0);
        Self { grid, values: vec![c; grid.len()], coeffs }
    }

    /// Build from samples. Any Nyquist content is projected out, so the
    /// stored samples may differ from `values` when the input is not band-limited.
    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        check_samples(grid, &values)?;
        let mut coeffs = fft::forward_real(&values, grid.dim(), grid.n());
        let nyquist = (0..coeffs.len()).any(|i| !grid.in_band(i) && coeffs[i] != ZERO);
        symmetrize_and_truncate(grid, &mut coeffs);
        if nyquist {
            Ok(Self::from_coeffs_unchecked(grid, coeffs))
        } else {
            Ok(Self { grid, values, coeffs })
        }
    }

    /// Build from samples of a band-limited field, keeping them verbatim.
    /// Nyquist content above roundoff level is rejected.
    pub fn from_band_limited_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        check_samples(grid, &values)?;
        let mut coeffs = fft::forward_real(&values, grid.dim(), grid.n());
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if let Some(i) = (0..coeffs.len()).find(|&i| !grid.in_band(i) && coeffs[i].norm() > 1e-10 * scale) {
            let m = grid.frequency(i);
            return Err(Error::SupportViolation { frequency: m[..grid.dim()].to_vec(), radius: grid.band() as f64 });
        }
        symmetrize_and_truncate(grid, &mut coeffs);
        Ok(Self { grid, values, coeffs })
    }

    /// Sample a function of the grid coordinates.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                f(&x[..grid.dim()])
            })
            .collect();
        Self::from_values(grid, values)
    }

    pub(crate) fn from_coeffs_unchecked(grid: TorusGrid, coeffs: Vec<Complex64>) -> Self {
        let values = fft::inverse_real(&coeffs, grid.dim(), grid.n());
        Self { grid, values, coeffs }
    }

    /// Build from coefficients produced by `f(m)` for every in-band `m`.
    /// `f` should satisfy `f(-m) = conj(f(m))`; the pairs are averaged to make it exact.
    pub fn from_modes(grid: TorusGrid, mut f: impl FnMut(&[i64]) -> Complex64) -> Self {
        let d = grid.dim();
        let mut coeffs: Vec<Complex64> = (0..grid.len())
            .map(|i| {
                if grid.in_band(i) {
                    let m = grid.frequency(i);
                    f(&m[..d])
                } else {
                    ZERO
                }
            })
            .collect();
        symmetrize_and_truncate(grid, &mut coeffs);
        Self::from_coeffs_unchecked(grid, coeffs)
    }

    #[inline]
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Coefficient at frequency `m` (zero outside the band).
    pub fn coeff(&self, m: &[i64]) -> Complex64 {
        self.grid
            .flat_of_frequency(m)
            .filter(|&i| self.grid.in_band(i))
            .map_or(ZERO, |i| self.coeffs[i])
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Grid maximum of `|f|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(n^{-d} sum_x |f(x)|^r)^{1/r}`; `r = inf` gives [`Field::sup_norm`].
    pub fn lp_norm(&self, r: f64) -> f64 {
        if r.is_infinite() {
            return self.sup_norm();
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(r)).sum();
        (s / self.values.len() as f64).powf(1.0 / r)
    }

    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    /// Apply a real even spectral multiplier `s(m)`, or any multiplier that
    /// maps Hermitian coefficients to Hermitian coefficients.
    pub fn map_spectrum(&self, mut s: impl FnMut(&[i64], Complex64) -> Complex64) -> Field {
        let d = self.grid.dim();
        let coeffs: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if c == ZERO {
                    return ZERO;
                }
                let m = self.grid.frequency(i);
                s(&m[..d], c)
            })
            .collect();
        Field::from_coeffs_unchecked(self.grid, coeffs)
    }

    /// Apply `s(flat index, c)` to every in-band coefficient, zero ones included.
    /// `s` must preserve Hermitian symmetry.
    pub fn map_indexed_full(&self, mut s: impl FnMut(usize, Complex64) -> Complex64) -> Field {
        let coeffs: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| if self.grid.in_band(i) { s(i, c) } else { ZERO })
            .collect();
        Field::from_coeffs_unchecked(self.grid, coeffs)
    }

    /// Apply `s(flat index, c)` to every non-zero coefficient.
    pub fn map_indexed(&self, mut s: impl FnMut(usize, Complex64) -> Complex64) -> Field {
        let coeffs: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| if c == ZERO { ZERO } else { s(i, c) })
            .collect();
        Field::from_coeffs_unchecked(self.grid, coeffs)
    }

    /// Apply a real radial multiplier `s(|m|)` using precomputed frequency norms.
    pub fn apply_radial(&self, norms: &[f64], s: impl Fn(f64) -> f64) -> Field {
        debug_assert_eq!(norms.len(), self.coeffs.len());
        let coeffs: Vec<Complex64> = self
            .coeffs
            .iter()
            .zip(norms)
            .map(|(&c, &r)| if c == ZERO { ZERO } else { c * s(r) })
            .collect();
        Field::from_coeffs_unchecked(self.grid, coeffs)
    }

    /// `prod_i (2 pi i m_i)^{mu_i} c(m)`.
    pub fn derivative(&self, mu: &MultiIndex) -> Result<Field> {
        if mu.dim() != self.grid.dim() {
            return Err(Error::InvalidInput(format!(
                "multi-index has {} components on a {}-d grid",
                mu.dim(),
                self.grid.dim()
            )));
        }
        if mu.order() == 0 {
            return Ok(self.clone());
        }
        let orders = mu.components().to_vec();
        Ok(self.map_spectrum(|m, c| {
            let mut factor = Complex64::new(1.0, 0.0);
            for (&mi, &k) in m.iter().zip(&orders) {
                if k > 0 {
                    factor *= Complex64::new(0.0, 2.0 * PI * mi as f64).powu(k);
                }
            }
            factor * c
        }))
    }

    /// Multiplier `-|2 pi m|^2`.
    pub fn laplacian(&self) -> Field {
        self.map_spectrum(|m, c| c * -laplacian_symbol(m))
    }

    /// Multiplier `|2 pi m|^4`.
    pub fn bilaplacian(&self) -> Field {
        self.map_spectrum(|m, c| {
            let k2 = laplacian_symbol(m);
            c * (k2 * k2)
        })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.ensure_same_grid(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.ensure_same_grid(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Field) -> Result<Field> {
        self.ensure_same_grid(other)?;
        Ok(self.zip_with(other, |x, y| x + a * y))
    }

    pub fn scale(&self, a: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
        }
    }

    fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| Complex64::new(f(a.re, b.re), f(a.im, b.im)))
            .collect();
        Field { grid: self.grid, values, coeffs }
    }

    /// Spectral resampling onto another grid of the same dimension: modes
    /// present in both bands are copied, the rest are zero.
    pub fn resample(&self, target: TorusGrid) -> Result<Field> {
        if target.dim() != self.grid.dim() {
            return Err(Error::GridMismatch("dimension differs".into()));
        }
        if target == self.grid {
            return Ok(self.clone());
        }
        let d = target.dim();
        let band = target.band().min(self.grid.band());
        let mut coeffs = vec![ZERO; target.len()];
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == ZERO {
                continue;
            }
            let m = self.grid.frequency(i);
            if m[..d].iter().all(|v| v.abs() <= band) {
                let j = target.flat_of_frequency(&m[..d]).expect("in band");
                coeffs[j] = c;
            }
        }
        Ok(Field::from_coeffs_unchecked(target, coeffs))
    }

    /// Samples of this field on the grid with twice the resolution.
    pub fn padded_values(&self) -> Vec<f64> {
        let fine = self.grid.padded();
        let d = fine.dim();
        let mut coeffs = vec![ZERO; fine.len()];
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != ZERO {
                let m = self.grid.frequency(i);
                coeffs[fine.flat_of_frequency(&m[..d]).expect("coarse band fits")] = c;
            }
        }
        fft::inverse_real(&coeffs, d, fine.n())
    }

    /// Band-`N` projection of a function sampled on `grid.padded()`.
    pub fn project_from_padded(grid: TorusGrid, fine_values: &[f64]) -> Result<Field> {
        Self::project_from(grid, grid.padded(), fine_values)
    }

    /// Band-`N` projection of a function sampled on a finer grid `fine`.
    pub fn project_from(grid: TorusGrid, fine: TorusGrid, fine_values: &[f64]) -> Result<Field> {
        let coeffs = Self::project_coeffs_from(grid, fine, fine_values)?;
        Ok(Field::from_coeffs_unchecked(grid, coeffs))
    }

    /// Coefficients of [`Field::project_from_padded`] without synthesizing samples.
    pub(crate) fn project_coeffs_from_padded(grid: TorusGrid, fine_values: &[f64]) -> Result<Vec<Complex64>> {
        Self::project_coeffs_from(grid, grid.padded(), fine_values)
    }

    fn project_coeffs_from(grid: TorusGrid, fine: TorusGrid, fine_values: &[f64]) -> Result<Vec<Complex64>> {
        if fine.dim() != grid.dim() || fine.n() < grid.n() {
            return Err(Error::InvalidInput(format!("cannot project from n = {} onto n = {}", fine.n(), grid.n())));
        }
        check_samples(fine, fine_values)?;
        let fc = fft::forward_real(fine_values, fine.dim(), fine.n());
        let d = grid.dim();
        let band = grid.band();
        let mut coeffs = vec![ZERO; grid.len()];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let m = grid.frequency(i);
            if m[..d].iter().all(|v| v.abs() <= band) {
                *c = fc[fine.flat_of_frequency(&m[..d]).expect("fits")];
            }
        }
        symmetrize_and_truncate(grid, &mut coeffs);
        Ok(coeffs)
    }

    /// Exact band-`N` projection of `f g`, evaluated on the `2n` grid.
    pub fn product_dealiased(&self, other: &Field) -> Result<Field> {
        self.ensure_same_grid(other)?;
        let a = self.padded_values();
        let b = other.padded_values();
        let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Field::project_from_padded(self.grid, &p)
    }

    /// Exact band-`N` projection of `f g h`; a `2n` grid suffices because
    /// aliases of the band-`3N` product cannot reach `|m_i| <= N`.
    pub fn triple_product_dealiased(&self, g: &Field, h: &Field) -> Result<Field> {
        self.ensure_same_grid(g)?;
        self.ensure_same_grid(h)?;
        let a = self.padded_values();
        let b = g.padded_values();
        let c = h.padded_values();
        let p: Vec<f64> = a.iter().zip(&b).zip(&c).map(|((x, y), z)| x * y * z).collect();
        Field::project_from_padded(self.grid, &p)
    }

    /// Largest `|m|` with a coefficient above `tol * max|c|`.
    pub fn spectral_radius(&self, tol: f64) -> f64 {
        let d = self.grid.dim();
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut r: f64 = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.norm() > tol * scale {
                let m = self.grid.frequency(i);
                r = r.max(m[..d].iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt());
            }
        }
        r
    }

    /// Relative distance `max|f-g| / max(max|g|, tiny)` on the grid.
    pub fn relative_sup_distance(&self, reference: &Field) -> f64 {
        let num = self
            .values
            .iter()
            .zip(&reference.values)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        num / reference.sup_norm().max(f64::MIN_POSITIVE)
    }
}

/// `|2 pi m|^2`.
#[inline]
pub fn laplacian_symbol(m: &[i64]) -> f64 {
    let s: f64 = m.iter().map(|&v| (v * v) as f64).sum();
    4.0 * PI * PI * s
}

/// `|2 pi m|^4`, the biharmonic eigenvalue of mode `m`.
#[inline]
pub fn biharmonic_symbol(m: &[i64]) -> f64 {
    let k2 = laplacian_symbol(m);
    k2 * k2
}

/// Per-index `|2 pi m|^4` in storage order.
pub fn biharmonic_symbols(grid: TorusGrid) -> Vec<f64> {
    let d = grid.dim();
    (0..grid.len())
        .map(|i| {
            let m = grid.frequency(i);
            biharmonic_symbol(&m[..d])
        })
        .collect()
}

/// Per-index `-|2 pi m|^2` in storage order.
pub fn laplacian_symbols(grid: TorusGrid) -> Vec<f64> {
    let d = grid.dim();
    (0..grid.len())
        .map(|i| {
            let m = grid.frequency(i);
            -laplacian_symbol(&m[..d])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_samples(grid: TorusGrid, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..grid.len()).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn constant_has_only_mean_mode() {
        let g = TorusGrid::new(2, 8).unwrap();
        let f = Field::from_values(g, vec![2.5; g.len()]).unwrap();
        let s = forward_transform(&f);
        assert!((s.get(&[0, 0]).re - 2.5).abs() < 1e-15);
        assert!(s.coeffs().iter().skip(1).all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn cosine_coefficients() {
        let g = TorusGrid::new(1, 16).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        assert!((f.coeff(&[1]) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((f.coeff(&[-1]) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        for m in [0, 2, 3, -2, 7] {
            assert!(f.coeff(&[m]).norm() < 1e-15);
        }
    }

    #[test]
    fn parseval_on_raw_samples() {
        let g = TorusGrid::new(2, 16).unwrap();
        let v = random_samples(g, 3);
        let s = forward_transform_values(g, &v).unwrap();
        let lhs: f64 = v.iter().map(|x| x * x).sum::<f64>() / g.len() as f64;
        assert!((lhs - s.energy()).abs() / lhs < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        let g = TorusGrid::new(1, 8).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(forward_transform_values(g, &v), Err(Error::InvalidInput(_))));
        assert!(Field::from_values(g, v).is_err());
    }

    #[test]
    fn inverse_of_simple_spectra() {
        let g = TorusGrid::new(2, 8).unwrap();
        let z = inverse_transform(&Spectrum::zeros(g)).unwrap();
        assert_eq!(z.sup_norm(), 0.0);
        let mut s = Spectrum::zeros(g);
        s.set_pair(&[0, 0], Complex64::new(3.0, 0.0)).unwrap();
        let c = inverse_transform(&s).unwrap();
        assert!(c.values().iter().all(|v| (v - 3.0).abs() < 1e-15));
    }

    #[test]
    fn non_hermitian_rejected() {
        let g = TorusGrid::new(1, 8).unwrap();
        let mut s = Spectrum::zeros(g);
        s.coeffs_mut()[1] = Complex64::new(1.0, 0.0);
        assert!(matches!(inverse_transform(&s), Err(Error::SymmetryViolation { .. })));
    }

    #[test]
    fn cosine_second_derivative_and_laplacian() {
        let g = TorusGrid::new(2, 16).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let expect = f.scale(-(2.0 * PI).powi(2));
        let d2 = f.derivative(&MultiIndex::new(vec![2, 0]).unwrap()).unwrap();
        assert!(d2.relative_sup_distance(&expect) < 1e-13);
        assert!(f.laplacian().relative_sup_distance(&expect) < 1e-13);
        assert_eq!(f.derivative(&MultiIndex::zero(2)).unwrap(), f);
    }

    #[test]
    fn constants_are_harmonic() {
        let g = TorusGrid::new(3, 8).unwrap();
        let c = Field::constant(g, 1.7);
        assert_eq!(c.laplacian().sup_norm(), 0.0);
        assert_eq!(c.bilaplacian().sup_norm(), 0.0);
    }

    #[test]
    fn bilaplacian_is_laplacian_squared() {
        let g = TorusGrid::new(2, 16).unwrap();
        let f = Field::from_values(g, random_samples(g, 9)).unwrap();
        let a = f.laplacian().laplacian();
        let b = f.bilaplacian();
        assert!(a.relative_sup_distance(&b) < 1e-12);
    }

    #[test]
    fn cosine_square_is_exact() {
        let g = TorusGrid::new(1, 16).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let p = f.product_dealiased(&f).unwrap();
        let expect = Field::from_fn(g, |x| 0.5 + 0.5 * (4.0 * PI * x[0]).cos()).unwrap();
        assert!(p.relative_sup_distance(&expect) < 1e-14);
        let one = Field::constant(g, 1.0);
        assert!(f.product_dealiased(&one).unwrap().relative_sup_distance(&f) < 1e-14);
    }

    #[test]
    fn product_grid_mismatch() {
        let a = Field::zeros(TorusGrid::new(1, 8).unwrap());
        let b = Field::zeros(TorusGrid::new(1, 16).unwrap());
        assert!(matches!(a.product_dealiased(&b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn resample_roundtrip() {
        let g = TorusGrid::new(2, 8).unwrap();
        let f = Field::from_values(g, random_samples(g, 4)).unwrap();
        let up = f.resample(TorusGrid::new(2, 32).unwrap()).unwrap();
        let back = up.resample(g).unwrap();
        assert!(back.relative_sup_distance(&f) < 1e-13);
    }
}
