//! Space-time white noise, the stochastic convolution `X` as an exact
//! per-mode Ornstein-Uhlenbeck process, the renormalization constant `psi`
//! and the Wick powers `Y = X^2 - psi`, `G = X^3 - 3 psi X`.
//!
//! The state always carries the raw (unmollified) coefficients. Since the
//! per-mode recursion is linear, mollifying the innovations by `zeta(eps m)`
//! is the same as mollifying the raw path afterwards, so one raw path yields
//! exactly coupled paths for every `eps`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::{biharmonic_symbol, Field};
use crate::grid::TorusGrid;
use crate::littlewood_paley::BlockProjector;
use crate::rng::{stream, Channel};
use crate::semigroup::MollifierSymbol;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub grid: TorusGrid,
    /// Mollifier scale; 0 keeps every grid mode.
    pub eps: f64,
    pub seed: u64,
    pub dt: f64,
}

impl NoiseConfig {
    pub fn new(grid: TorusGrid, eps: f64, seed: u64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("noise step must be positive, got {dt}")));
        }
        MollifierSymbol::new(eps)?;
        Ok(Self { grid, eps, seed, dt })
    }

    pub fn symbol(&self) -> MollifierSymbol {
        MollifierSymbol::new(self.eps).expect("validated")
    }
}

/// `zeta(eps |m|)` at every storage index (zero off band).
pub fn mollifier_weights(grid: TorusGrid, eps: f64) -> Result<Vec<f64>> {
    let sym = MollifierSymbol::new(eps)?;
    let d = grid.dim();
    Ok((0..grid.len())
        .map(|i| if grid.in_band(i) { sym.value(&grid.frequency(i)[..d]) } else { 0.0 })
        .collect())
}

/// In-band Hermitian pairs `(i, conj(i))` with `i < conj(i)`, in storage order.
fn hermitian_pairs(grid: TorusGrid) -> Vec<(usize, usize)> {
    (1..grid.len())
        .filter(|&i| grid.in_band(i))
        .filter_map(|i| {
            let j = grid.conjugate_flat(i);
            (i < j).then_some((i, j))
        })
        .collect()
}

/// Per-mode state of the raw stochastic convolution.
#[derive(Debug, Clone)]
pub struct OUState {
    grid: TorusGrid,
    seed: u64,
    trajectory: u64,
    t: f64,
    xhat: Vec<Complex64>,
    lambda: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    rng: ChaCha8Rng,
}

impl OUState {
    /// `X_0 = 0` with the stream of trajectory `trajectory`.
    pub fn new(grid: TorusGrid, seed: u64, trajectory: u64) -> Self {
        let d = grid.dim();
        Self {
            grid,
            seed,
            trajectory,
            t: 0.0,
            xhat: vec![ZERO; grid.len()],
            lambda: (0..grid.len()).map(|i| biharmonic_symbol(&grid.frequency(i)[..d])).collect(),
            pairs: hermitian_pairs(grid),
            rng: stream(seed, trajectory, Channel::Noise),
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trajectory(&self) -> u64 {
        self.trajectory
    }

    /// Raw coefficients in storage order.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.xhat
    }

    /// Advance by `dt` with the exact transition law. Draws: one normal for
    /// the mean mode, then a (re, im) pair per Hermitian pair in storage order.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("noise step must be positive, got {dt}")));
        }
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.xhat[0].re += dt.sqrt() * z;
        for &(i, j) in &self.pairs {
            let lam = self.lambda[i];
            let decay = (-dt * lam).exp();
            let var = -(-2.0 * dt * lam).exp_m1() / (2.0 * lam);
            let s = (0.5 * var).sqrt();
            let re: f64 = StandardNormal.sample(&mut self.rng);
            let im: f64 = StandardNormal.sample(&mut self.rng);
            let v = self.xhat[i] * decay + Complex64::new(s * re, s * im);
            self.xhat[i] = v;
            self.xhat[j] = v.conj();
        }
        self.t += dt;
        Ok(())
    }

    /// Advance to time `t >= self.time()` in one exact step.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if t < self.t {
            return Err(Error::TimeGrid(format!("cannot step back from {} to {t}", self.t)));
        }
        if t > self.t {
            self.advance(t - self.t)?;
            self.t = t;
        }
        Ok(())
    }

    /// `X_{t,eps}` for the mollifier weights `w` (see [`mollifier_weights`]).
    pub fn field_weighted(&self, w: &[f64]) -> Field {
        let coeffs = self.xhat.iter().zip(w).map(|(c, &z)| c * z).collect();
        Field::from_coeffs_unchecked(self.grid, coeffs)
    }

    /// `X_{t,eps}`.
    pub fn field(&self, eps: f64) -> Result<Field> {
        Ok(self.field_weighted(&mollifier_weights(self.grid, eps)?))
    }
}

/// One exact transition of length `dt`.
pub fn sample_step(mut state: OUState, dt: f64) -> Result<OUState> {
    state.advance(dt)?;
    Ok(state)
}

/// `E |X_{r,eps}(m)|^2` at every storage index.
pub fn mode_variances(grid: TorusGrid, eps: f64, r: f64) -> Result<Vec<f64>> {
    if !(r >= 0.0) {
        return Err(Error::InvalidInput(format!("time must be >= 0, got {r}")));
    }
    let w = mollifier_weights(grid, eps)?;
    let d = grid.dim();
    Ok((0..grid.len())
        .map(|i| {
            if i == 0 {
                r
            } else if w[i] == 0.0 {
                0.0
            } else {
                let lam = biharmonic_symbol(&grid.frequency(i)[..d]);
                w[i] * w[i] * -(-2.0 * r * lam).exp_m1() / (2.0 * lam)
            }
        })
        .collect())
}

/// Renormalization constant over the retained grid modes; equals `E X_{r,eps}(x)^2`
/// for the simulated process.
pub fn psi_discrete(grid: TorusGrid, eps: f64, r: f64) -> Result<f64> {
    let v = mode_variances(grid, eps, r)?;
    Ok(r + v[1..].iter().sum::<f64>())
}

/// Surface area of the unit sphere in `R^d`.
fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        _ => unreachable!("dimension checked by the grid"),
    }
}

/// Lattice sum over `0 < max_i |q_i| <= qcut` and a bound on the rest.
pub fn psi_continuum(d: usize, eps: f64, r: f64, qcut: i64) -> Result<(f64, f64)> {
    if !(r >= 0.0) {
        return Err(Error::InvalidInput(format!("time must be >= 0, got {r}")));
    }
    if !(1..=4).contains(&d) || qcut < 1 {
        return Err(Error::InvalidInput(format!("need 1 <= d <= 4 and qcut >= 1, got d={d}, qcut={qcut}")));
    }
    let sym = MollifierSymbol::new(eps)?;
    let side = (2 * qcut + 1) as usize;
    let total = side.pow(d as u32);
    let mut sum = 0.0;
    let mut q = [0i64; 4];
    for flat in 0..total {
        let mut rem = flat;
        for a in (0..d).rev() {
            q[a] = (rem % side) as i64 - qcut;
            rem /= side;
        }
        if q[..d].iter().all(|&v| v == 0) {
            continue;
        }
        let z = sym.value(&q[..d]);
        if z == 0.0 {
            continue;
        }
        let lam = biharmonic_symbol(&q[..d]);
        sum += z * z * -(-2.0 * r * lam).exp_m1() / (2.0 * lam);
    }
    let radius = qcut as f64;
    let tail = if r == 0.0 || (eps > 0.0 && radius * eps >= 1.0) {
        0.0
    } else if d < 4 {
        let h = (d as f64).sqrt() / 2.0;
        (1.0 + h / radius).powi(4) * sphere_area(d) * (radius - h).powi(d as i32 - 4)
            / ((4 - d) as f64 * 2.0 * (2.0 * PI).powi(4))
    } else {
        f64::INFINITY
    };
    Ok((r + sum, tail))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiValue {
    pub discrete: f64,
    pub continuum: f64,
    /// Bound on the part of the continuum sum beyond the lattice cut.
    pub tail_bound: f64,
}

/// Both variants of `psi_eps(r)`; the continuum sum is cut at four times the band
/// (or at `1/eps` when the mollifier vanishes earlier).
pub fn psi(config: &NoiseConfig, r: f64) -> Result<PsiValue> {
    let discrete = psi_discrete(config.grid, config.eps, r)?;
    let mut qcut = 4 * config.grid.band();
    if config.eps > 0.0 {
        qcut = qcut.min((1.0 / config.eps).ceil() as i64).max(1);
    }
    if config.grid.dim() == 4 {
        qcut = qcut.min(24);
    }
    let (continuum, tail_bound) = psi_continuum(config.grid.dim(), config.eps, r, qcut)?;
    Ok(PsiValue { discrete, continuum, tail_bound })
}

/// `X`, `Y = X^2 - psi`, `G = X^3 - 3 psi X`. The Wick fields are evaluated
/// pointwise on the `2n` grid, where `Y` is exact and where the band-`N`
/// projection of every cubic expression in `X` is alias-free; `y` and `g`
/// hold those projections.
#[derive(Debug, Clone, PartialEq)]
pub struct WickTriple {
    pub x: Field,
    pub y: Field,
    pub g: Field,
    pub psi: f64,
    x_fine: Vec<f64>,
    y_fine: Vec<f64>,
    g_fine: Vec<f64>,
}

impl WickTriple {
    pub fn from_x(x: Field, psi: f64) -> Result<Self> {
        let x_fine = x.padded_values();
        let y_fine: Vec<f64> = x_fine.iter().map(|&v| v * v - psi).collect();
        let g_fine: Vec<f64> = x_fine.iter().map(|&v| v * v * v - 3.0 * psi * v).collect();
        let grid = x.grid();
        Ok(Self {
            y: Field::project_from_padded(grid, &y_fine)?,
            g: Field::project_from_padded(grid, &g_fine)?,
            x,
            psi,
            x_fine,
            y_fine,
            g_fine,
        })
    }

    /// Arbitrary band-limited inputs (no Wick relation implied); `psi` is recorded as given.
    pub fn from_fields(x: Field, y: Field, g: Field, psi: f64) -> Result<Self> {
        x.ensure_same_grid(&y)?;
        x.ensure_same_grid(&g)?;
        Ok(Self { x_fine: x.padded_values(), y_fine: y.padded_values(), g_fine: g.padded_values(), x, y, g, psi })
    }

    pub fn zero(grid: TorusGrid) -> Self {
        let z = Field::zeros(grid);
        let len = grid.padded().len();
        Self { x: z.clone(), y: z.clone(), g: z, psi: 0.0, x_fine: vec![0.0; len], y_fine: vec![0.0; len], g_fine: vec![0.0; len] }
    }

    pub fn grid(&self) -> TorusGrid {
        self.x.grid()
    }

    pub fn x_fine(&self) -> &[f64] {
        &self.x_fine
    }

    pub fn y_fine(&self) -> &[f64] {
        &self.y_fine
    }

    pub fn g_fine(&self) -> &[f64] {
        &self.g_fine
    }

    /// True when `X`, `Y` and `G` vanish identically.
    pub fn is_zero(&self) -> bool {
        [&self.x_fine, &self.y_fine, &self.g_fine].iter().all(|v| v.iter().all(|&a| a == 0.0))
    }

    /// Largest pointwise deviation from `Y = X^2 - psi`, `G = X^3 - 3 psi X` on the fine grid.
    pub fn identity_defect(&self) -> f64 {
        let psi = self.psi;
        self.x_fine
            .iter()
            .zip(&self.y_fine)
            .zip(&self.g_fine)
            .map(|((&x, &y), &g)| (y - (x * x - psi)).abs().max((g - (x * x * x - 3.0 * psi * x)).abs()))
            .fold(0.0, f64::max)
    }
}

/// Wick triple of the current state at the configured scale, renormalized with the discrete `psi`.
pub fn wick_powers(state: &OUState, config: &NoiseConfig) -> Result<WickTriple> {
    if state.grid() != config.grid {
        return Err(Error::GridMismatch("noise state and config grids differ".into()));
    }
    let psi = psi_discrete(config.grid, config.eps, state.time())?;
    WickTriple::from_x(state.field(config.eps)?, psi)
}

/// A raw path sampled on a time grid; mollified and Wick series derive from it.
#[derive(Debug, Clone)]
pub struct RawPath {
    pub grid: TorusGrid,
    pub seed: u64,
    pub trajectory: u64,
    pub times: Vec<f64>,
    pub coeffs: Vec<Vec<Complex64>>,
}

impl RawPath {
    /// Sample at non-decreasing `times` (starting from `X_0 = 0`).
    pub fn simulate(grid: TorusGrid, seed: u64, trajectory: u64, times: &[f64]) -> Result<Self> {
        let mut state = OUState::new(grid, seed, trajectory);
        let mut coeffs = Vec::with_capacity(times.len());
        for &t in times {
            state.advance_to(t)?;
            coeffs.push(state.coeffs().to_vec());
        }
        Ok(Self { grid, seed, trajectory, times: times.to_vec(), coeffs })
    }

    /// `X_{t_k, eps}` for every sample time.
    pub fn fields(&self, eps: f64) -> Result<Vec<Field>> {
        let w = mollifier_weights(self.grid, eps)?;
        Ok(self
            .coeffs
            .iter()
            .map(|c| Field::from_coeffs_unchecked(self.grid, c.iter().zip(&w).map(|(a, &z)| a * z).collect()))
            .collect())
    }

    /// Wick triples at every sample time with the discrete `psi_eps(t_k)`.
    pub fn wick_series(&self, eps: f64) -> Result<Vec<WickTriple>> {
        self.fields(eps)?
            .into_iter()
            .zip(&self.times)
            .map(|(x, &t)| WickTriple::from_x(x, psi_discrete(self.grid, eps, t)?))
            .collect()
    }
}

/// Coarse `X`, `Y`, `G` snapshots of one path at one mollifier level.
#[derive(Debug, Clone)]
pub struct CoupledSample {
    pub seed: u64,
    pub trajectory: u64,
    pub eps: f64,
    pub times: Vec<f64>,
    pub x: Vec<Field>,
    pub y: Vec<Field>,
    pub g: Vec<Field>,
}

/// Samples at every level of `eps_levels` from one shared raw path.
/// `Y` and `G` are only formed when `wick` is set.
pub fn coupled_samples(
    grid: TorusGrid,
    eps_levels: &[f64],
    seed: u64,
    trajectory: u64,
    times: &[f64],
    wick: bool,
) -> Result<Vec<CoupledSample>> {
    let raw = RawPath::simulate(grid, seed, trajectory, times)?;
    eps_levels
        .iter()
        .map(|&eps| {
            let (x, y, g) = if wick {
                let tr = raw.wick_series(eps)?;
                let x = tr.iter().map(|w| w.x.clone()).collect();
                let y = tr.iter().map(|w| w.y.clone()).collect();
                let g = tr.into_iter().map(|w| w.g).collect();
                (x, y, g)
            } else {
                (raw.fields(eps)?, Vec::new(), Vec::new())
            };
            Ok(CoupledSample { seed, trajectory, eps, times: times.to_vec(), x, y, g })
        })
        .collect()
}

/// Median sup-gaps to the finest level, per level.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStat {
    pub eps: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub g: Vec<f64>,
}

impl ConvergenceStat {
    /// True when every reported sequence is strictly decreasing.
    pub fn strictly_decreasing(values: &[f64]) -> bool {
        values.windows(2).all(|w| w[1] < w[0])
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

fn sup_gap(bp: &BlockProjector, a: &[Field], b: &[Field], theta: f64) -> Result<f64> {
    a.iter().zip(b).try_fold(0.0f64, |acc, (u, v)| Ok(acc.max(bp.holder_norm(&u.sub(v)?, theta)?)))
}

/// For each path (a list of levels, finest last) and each level, the sup over
/// sample times of `||X_eps - X_ref||_theta_x` (and the same for `Y`, `G` with
/// `theta_wick` when present); reports medians over paths.
pub fn mollifier_convergence_stat(paths: &[Vec<CoupledSample>], theta_x: f64, theta_wick: f64) -> Result<ConvergenceStat> {
    let first = paths.first().and_then(|p| p.last()).ok_or_else(|| Error::InvalidInput("no paths".into()))?;
    let levels = paths[0].len();
    let eps: Vec<f64> = paths[0].iter().map(|s| s.eps).collect();
    let bp = BlockProjector::new(first.x[0].grid());
    let mut gaps = vec![[Vec::new(), Vec::new(), Vec::new()]; levels];
    for path in paths {
        if path.len() != levels || path.iter().zip(&eps).any(|(s, &e)| s.eps != e) {
            return Err(Error::InvalidInput("paths disagree on the mollifier ladder".into()));
        }
        let reference = path.last().expect("non-empty");
        for s in path {
            if s.seed != reference.seed || s.trajectory != reference.trajectory {
                return Err(Error::SeedMismatch(format!(
                    "level eps={} uses (seed {}, trajectory {}) but the reference uses (seed {}, trajectory {})",
                    s.eps, s.seed, s.trajectory, reference.seed, reference.trajectory
                )));
            }
            if s.times != reference.times {
                return Err(Error::TimeGrid("coupled levels sampled at different times".into()));
            }
        }
        for (k, s) in path.iter().enumerate() {
            gaps[k][0].push(sup_gap(&bp, &s.x, &reference.x, theta_x)?);
            if !s.y.is_empty() {
                gaps[k][1].push(sup_gap(&bp, &s.y, &reference.y, theta_wick)?);
                gaps[k][2].push(sup_gap(&bp, &s.g, &reference.g, theta_wick)?);
            }
        }
    }
    let mut out = ConvergenceStat { eps, x: Vec::new(), y: Vec::new(), g: Vec::new() };
    for [gx, gy, gg] in gaps.iter_mut() {
        out.x.push(median(gx));
        if !gy.is_empty() {
            out.y.push(median(gy));
            out.g.push(median(gg));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_zero_and_stays_hermitian() {
        let g = TorusGrid::new(2, 8).unwrap();
        let mut s = OUState::new(g, 1, 0);
        assert!(s.coeffs().iter().all(|c| *c == ZERO));
        for _ in 0..3 {
            s.advance(1e-3).unwrap();
        }
        for i in 0..g.len() {
            assert_eq!(s.coeffs()[i], s.coeffs()[g.conjugate_flat(i)].conj());
            if !g.in_band(i) {
                assert_eq!(s.coeffs()[i], ZERO);
            }
        }
        assert_eq!(s.coeffs()[0].im, 0.0);
        assert!(s.clone().advance(0.0).is_err());
    }

    #[test]
    fn replay_is_bit_identical() {
        let g = TorusGrid::new(1, 32).unwrap();
        let a = RawPath::simulate(g, 9, 4, &[0.01, 0.02]).unwrap();
        let b = RawPath::simulate(g, 9, 4, &[0.01, 0.02]).unwrap();
        assert_eq!(a.coeffs, b.coeffs);
    }

    #[test]
    fn stationary_variance_limit() {
        let g = TorusGrid::new(1, 16).unwrap();
        let v = mode_variances(g, 0.0, 1e6).unwrap();
        for i in 1..g.len() {
            if g.in_band(i) {
                let lam = biharmonic_symbol(&g.frequency(i)[..1]);
                assert!((v[i] - 1.0 / (2.0 * lam)).abs() <= 1e-15 * v[i]);
            }
        }
    }

    #[test]
    fn psi_zero_and_large_time_sum() {
        let g = TorusGrid::new(1, 64).unwrap();
        assert_eq!(psi_discrete(g, 0.0, 0.0).unwrap(), 0.0);
        let r = 50.0;
        let mut direct = r;
        for m in 1..=31i64 {
            direct += 2.0 / (2.0 * (2.0 * PI * m as f64).powi(4));
        }
        assert!((psi_discrete(g, 0.0, r).unwrap() - direct).abs() < 1e-12 * direct);
        assert!(psi_discrete(g, 0.0, -1.0).is_err());
    }

    #[test]
    fn continuum_brackets_discrete() {
        let g = TorusGrid::new(1, 64).unwrap();
        let cfg = NoiseConfig::new(g, 0.0, 0, 1e-3).unwrap();
        let p = psi(&cfg, 0.01).unwrap();
        assert!(p.continuum >= p.discrete);
        assert!(p.continuum - p.discrete < 1e-7);
        assert!(p.tail_bound > 0.0 && p.tail_bound < 1e-8);
        let cfg = NoiseConfig::new(g, 0.1, 0, 1e-3).unwrap();
        let p = psi(&cfg, 0.01).unwrap();
        assert_eq!(p.tail_bound, 0.0);
        assert!((p.continuum - p.discrete).abs() < 1e-15);
    }

    #[test]
    fn zero_state_wick() {
        let g = TorusGrid::new(1, 16).unwrap();
        let w = WickTriple::from_x(Field::zeros(g), 0.25).unwrap();
        assert!(w.y.relative_sup_distance(&Field::constant(g, -0.25)) < 1e-15);
        assert_eq!(w.g.sup_norm(), 0.0);
        assert!(WickTriple::zero(g).is_zero());
    }

    #[test]
    fn wick_identity_on_fine_grid() {
        let g = TorusGrid::new(2, 16).unwrap();
        let cfg = NoiseConfig::new(g, 0.1, 3, 1e-3).unwrap();
        let mut s = OUState::new(g, 3, 0);
        s.advance(0.05).unwrap();
        let w = wick_powers(&s, &cfg).unwrap();
        assert_eq!(w.identity_defect(), 0.0);
        let x2 = w.x.product_dealiased(&w.x).unwrap();
        assert!(w.y.sub(&x2.sub(&Field::constant(g, w.psi)).unwrap()).unwrap().sup_norm() < 1e-13);
    }

    #[test]
    fn identical_levels_have_zero_gap() {
        let g = TorusGrid::new(1, 32).unwrap();
        let paths: Vec<_> = (0..3).map(|k| coupled_samples(g, &[0.1, 0.1], 5, k, &[0.01, 0.02], true).unwrap()).collect();
        let st = mollifier_convergence_stat(&paths, 1.3, -0.2).unwrap();
        assert!(st.x.iter().chain(&st.y).chain(&st.g).all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_seed_rejected() {
        let g = TorusGrid::new(1, 32).unwrap();
        let mut p = coupled_samples(g, &[0.2, 0.1], 5, 0, &[0.01], false).unwrap();
        p[0].seed = 6;
        assert!(matches!(mollifier_convergence_stat(&[p], 1.3, -0.2), Err(Error::SeedMismatch(_))));
    }
}
