//! The biharmonic heat semigroup `P_r = e^{-r Delta^2}`, frequency-space
//! mollifiers and exponential (Duhamel) integration.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{biharmonic_symbol, Field};
use crate::fit::{fit_rate, RateModel};
use crate::littlewood_paley::{smooth_step, BlockProjector};
use crate::series::TimeSeries;

/// The multiplier `m -> e^{-r |2 pi m|^4}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupKernel {
    r: f64,
}

impl SemigroupKernel {
    pub fn new(r: f64) -> Result<Self> {
        if !(r >= 0.0) {
            return Err(Error::InvalidInput(format!("semigroup time must be >= 0, got {r}")));
        }
        Ok(Self { r })
    }

    pub fn time(&self) -> f64 {
        self.r
    }

    pub fn multiplier(&self, m: &[i64]) -> f64 {
        if self.r == 0.0 {
            1.0
        } else {
            (-self.r * biharmonic_symbol(m)).exp()
        }
    }

    pub fn apply(&self, f: &Field) -> Field {
        if self.r == 0.0 {
            return f.clone();
        }
        f.map_spectrum(|m, c| c * self.multiplier(m))
    }
}

/// `P_r f`.
pub fn apply_semigroup(r: f64, f: &Field) -> Result<Field> {
    Ok(SemigroupKernel::new(r)?.apply(f))
}

/// Mollifier profile: `zeta(t) = 1` for `t <= 1/2`, 0 for `t >= 1`, smooth and even.
pub fn zeta(t: f64) -> f64 {
    smooth_step(2.0 * (1.0 - t.abs()))
}

/// The symbol `m -> zeta(eps |m|)`; `eps = 0` is the identity (raw grid cut-off).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierSymbol {
    eps: f64,
}

impl MollifierSymbol {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidInput(format!("mollifier scale must be >= 0, got {eps}")));
        }
        Ok(Self { eps })
    }

    pub fn identity() -> Self {
        Self { eps: 0.0 }
    }

    pub fn scale(&self) -> f64 {
        self.eps
    }

    pub fn value(&self, m: &[i64]) -> f64 {
        if self.eps == 0.0 {
            return 1.0;
        }
        let r = m.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
        zeta(self.eps * r)
    }

    pub fn apply(&self, f: &Field) -> Field {
        if self.eps == 0.0 {
            return f.clone();
        }
        f.map_spectrum(|m, c| c * self.value(m))
    }
}

/// `zeta_eps * f`.
pub fn mollify(f: &Field, sym: &MollifierSymbol) -> Field {
    sym.apply(f)
}

/// `phi_1(z) = (1 - e^{-z}) / z` with `phi_1(0) = 1`.
pub fn phi1(z: f64) -> f64 {
    if z.abs() > 1e-4 {
        -(-z).exp_m1() / z
    } else {
        1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0
    }
}

/// One exponential-Euler step per mode:
/// `h <- e^{-dt lambda} h + phi_1(dt lambda) dt s`, with `lambda = |2 pi m|^4`.
#[derive(Debug, Clone)]
pub struct ExpStepper {
    decay: Vec<f64>,
    gain: Vec<f64>,
}

impl ExpStepper {
    pub fn new(grid: crate::grid::TorusGrid, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        let d = grid.dim();
        let (decay, gain) = (0..grid.len())
            .map(|i| {
                let m = grid.frequency(i);
                let z = dt * biharmonic_symbol(&m[..d]);
                ((-z).exp(), phi1(z) * dt)
            })
            .unzip();
        Ok(Self { decay, gain })
    }

    /// `e^{-dt lambda} state + phi_1(dt lambda) dt source`.
    pub fn step(&self, state: &Field, source: &Field) -> Result<Field> {
        state.ensure_same_grid(source)?;
        let s = source.coeffs();
        Ok(state.map_indexed_full(|i, c| c * self.decay[i] + s[i] * self.gain[i]))
    }

    /// `e^{-dt lambda} state`.
    pub fn propagate(&self, state: &Field) -> Field {
        state.map_indexed(|i, c| c * self.decay[i])
    }
}

/// Exponential quadrature of `int_0^{t_k} P_{t_k - q} g(q) dq` for a source
/// held constant on each `[t_j, t_{j+1})` at its left value. Output has the
/// input's time grid and starts from zero.
pub fn duhamel_integrate(source: &TimeSeries) -> Result<TimeSeries> {
    let dt = source.step()?;
    let grid = source.fields[0].grid();
    let stepper = ExpStepper::new(grid, dt)?;
    let mut out = Vec::with_capacity(source.len());
    let mut h = Field::zeros(grid);
    out.push(h.clone());
    for g in &source.fields[..source.len() - 1] {
        h = stepper.step(&h, g)?;
        out.push(h.clone());
    }
    TimeSeries::new(source.times.clone(), out)
}

/// Result of fitting `||P_r f||_{alpha + beta} ~ r^{-e}` on small `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchauderFit {
    /// `e`, the fitted decay exponent (ideally `beta / 4`).
    pub exponent: f64,
    /// `4 e`, the implied smoothing gain.
    pub beta_estimate: f64,
    pub r_squared: f64,
}

/// Fit the small-time blow-up rate of `||P_r f||_{alpha+beta}` over `r_values`.
pub fn schauder_rate(f: &Field, alpha: f64, beta: f64, r_values: &[f64]) -> Result<SchauderFit> {
    if !(beta > 0.0 && beta < 4.0) {
        return Err(Error::InvalidInput(format!("smoothing gain must lie in (0, 4), got {beta}")));
    }
    if r_values.len() < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 times, got {}", r_values.len())));
    }
    if let Some(r) = r_values.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::InvalidInput(format!("time {r} outside (0, 1]")));
    }
    let bp = BlockProjector::new(f.grid());
    let pts = r_values
        .iter()
        .map(|&r| Ok((r, bp.holder_norm(&apply_semigroup(r, f)?, alpha + beta)?)))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_rate(&pts, RateModel::Power)?;
    Ok(SchauderFit { exponent: -fit.exponent, beta_estimate: -4.0 * fit.exponent, r_squared: fit.r_squared })
}

/// Per-mode closed form of `int_0^t e^{-(t-q) lambda} dq = t phi_1(t lambda)`.
pub fn duhamel_constant_mode(lambda: f64, t: f64) -> f64 {
    t * phi1(t * lambda)
}

/// `c e^{i theta}` helper for building single-mode test fields.
pub fn polar(c: f64, theta: f64) -> Complex64 {
    Complex64::from_polar(c, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use std::f64::consts::PI;

    #[test]
    fn identity_at_zero_and_negative_time() {
        let g = TorusGrid::new(1, 32).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        assert_eq!(apply_semigroup(0.0, &f).unwrap(), f);
        assert!(apply_semigroup(-1e-3, &f).is_err());
    }

    #[test]
    fn mode_one_multiplier_underflows() {
        let k = SemigroupKernel::new(1.0).unwrap();
        let lam = (2.0 * PI).powi(4);
        assert!((lam - 1558.5454565440389).abs() < 1e-9);
        assert_eq!(k.multiplier(&[1]), 0.0f64.max((-lam).exp()));
        assert!(k.multiplier(&[1]) < 1e-300);
    }

    #[test]
    fn constants_invariant() {
        let g = TorusGrid::new(2, 8).unwrap();
        let c = Field::constant(g, 0.4);
        for r in [0.0, 1e-3, 0.5, 10.0] {
            assert!(apply_semigroup(r, &c).unwrap().relative_sup_distance(&c) < 1e-15);
        }
        for eps in [0.0, 0.1, 0.4] {
            assert!(mollify(&c, &MollifierSymbol::new(eps).unwrap()).relative_sup_distance(&c) < 1e-15);
        }
    }

    #[test]
    fn semigroup_law() {
        for m in -7..=7i64 {
            let a = SemigroupKernel::new(1e-4).unwrap().multiplier(&[m]);
            let b = SemigroupKernel::new(3e-4).unwrap().multiplier(&[m]);
            let ab = SemigroupKernel::new(4e-4).unwrap().multiplier(&[m]);
            assert!((a * b - ab).abs() <= 1e-12 * ab.max(1e-300));
            assert!(a > 0.0 && a <= 1.0);
        }
    }

    #[test]
    fn zeta_profile() {
        assert_eq!(zeta(0.0), 1.0);
        assert_eq!(zeta(0.5), 1.0);
        assert_eq!(zeta(1.0), 0.0);
        assert_eq!(zeta(-0.3), zeta(0.3));
        assert!(zeta(0.75) > 0.0 && zeta(0.75) < 1.0);
    }

    #[test]
    fn mollifier_saturates_on_band() {
        let g = TorusGrid::new(1, 32).unwrap();
        let f = Field::from_modes(g, |m| polar(1.0 / (1 + m[0].abs()) as f64, 0.3 * m[0] as f64));
        // band N = 15; zeta(eps |m|) = 1 whenever eps * 15 <= 1/2
        let sym = MollifierSymbol::new(1.0 / 30.0).unwrap();
        assert_eq!(mollify(&f, &sym), f.map_spectrum(|_, c| c));
    }

    #[test]
    fn phi1_branches_agree() {
        for z in [1e-6, 5e-5, 1e-4, 1.0001e-4, 0.5, 3.0, 50.0] {
            let direct = -(-z as f64).exp_m1() / z;
            assert!((phi1(z) - direct).abs() < 1e-12, "z={z}");
        }
        assert_eq!(phi1(0.0), 1.0);
    }

    #[test]
    fn zero_source_gives_zero() {
        let g = TorusGrid::new(1, 16).unwrap();
        let s = TimeSeries::constant(Field::zeros(g), 1e-3, 10).unwrap();
        let out = duhamel_integrate(&s).unwrap();
        assert!(out.fields.iter().all(|f| f.sup_norm() == 0.0));
        assert!(TimeSeries::uniform(0.0, 0.0, vec![Field::zeros(g)]).is_err());
    }

    #[test]
    fn non_uniform_rejected() {
        let g = TorusGrid::new(1, 16).unwrap();
        let s = TimeSeries::new(vec![0.0, 0.1, 0.3], vec![Field::zeros(g); 3]).unwrap();
        assert!(matches!(duhamel_integrate(&s), Err(Error::TimeGrid(_))));
    }

    #[test]
    fn constant_single_mode_source_matches_closed_form() {
        let g = TorusGrid::new(1, 16).unwrap();
        let src = Field::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let dt = 1e-4;
        let steps = 50;
        let out = duhamel_integrate(&TimeSeries::constant(src, dt, steps).unwrap()).unwrap();
        let lam = (2.0 * PI).powi(4);
        for (t, f) in out.times.iter().zip(&out.fields) {
            let expect = 0.5 * (1.0 - (-lam * t).exp()) / lam;
            assert!((f.coeff(&[1]).re - expect).abs() < 1e-15 + 1e-12 * expect);
        }
    }

    #[test]
    fn constant_field_schauder_slope_is_flat() {
        let g = TorusGrid::new(1, 64).unwrap();
        let c = Field::constant(g, 1.0);
        let fit = schauder_rate(&c, 0.0, 2.0, &[1e-6, 1e-4, 1e-2]).unwrap();
        assert!(fit.exponent.abs() < 1e-12);
        assert!(schauder_rate(&c, 0.0, 4.0, &[1e-6, 1e-4, 1e-2]).is_err());
        assert!(schauder_rate(&c, 0.0, 2.0, &[1e-6, 1e-4]).is_err());
    }
    fn slow_spectrum(n: usize) -> Field {
        let g = TorusGrid::new(1, n).unwrap();
        Field::from_modes(g, |m| {
            if m[0] == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0 / m[0].abs() as f64, 0.0)
            }
        })
    }

    fn small_times() -> Vec<f64> {
        (0..17).map(|k| 10f64.powf(-11.0 + 0.25 * k as f64)).collect()
    }

    #[test]
    fn schauder_exponent_tracks_gain() {
        let f = slow_spectrum(512);
        for beta in [1.0, 2.0, 3.0] {
            let fit = schauder_rate(&f, 0.0, beta, &small_times()).unwrap();
            eprintln!("beta {beta} est {}", fit.beta_estimate);
            assert!((fit.beta_estimate - beta).abs() <= 0.2 * beta, "beta {beta}: {fit:?}");
        }
    }

    /// Per-mode exact `int_0^t e^{-lambda (t-q)} sin(w q) dq`.
    fn sine_response(lambda: f64, w: f64, t: f64) -> f64 {
        (lambda * (w * t).sin() - w * (w * t).cos() + w * (-lambda * t).exp()) / (lambda * lambda + w * w)
    }

    #[test]
    fn first_order_in_time_step() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let g = TorusGrid::new(1, 16).unwrap();
        let amps: Vec<f64> = (0..8).map(|_| rng.random::<f64>() - 0.5).collect();
        let u = Field::from_modes(g, |m| {
            let k = m[0].unsigned_abs() as usize;
            if (1..=3).contains(&k) { Complex64::new(amps[k] * 0.5, amps[k + 3] * 0.5 * m[0].signum() as f64) } else { Complex64::new(0.0, 0.0) }
        });
        let w = 2.0 * PI * 50.0;
        let t_end = 0.02;
        let error = |steps: usize| {
            let dt = t_end / steps as f64;
            let fields = (0..=steps).map(|k| u.scale((w * k as f64 * dt).sin())).collect();
            let out = duhamel_integrate(&TimeSeries::uniform(0.0, dt, fields).unwrap()).unwrap();
            let exact = u.map_spectrum(|m, c| c * sine_response(biharmonic_symbol(m), w, t_end));
            out.fields.last().unwrap().sub(&exact).unwrap().sup_norm()
        };
        let (e1, e2, e3) = (error(200), error(400), error(800));
        eprintln!("{e1} {e2} {e3}");
        for ratio in [e1 / e2, e2 / e3] {
            assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn semigroup_never_increases_blocks() {
        let f = slow_spectrum(128);
        let bp = BlockProjector::new(f.grid());
        let base = bp.block_sup_norms(&f).unwrap();
        for r in [1e-9, 1e-7, 1e-5, 1e-3] {
            let pr = bp.block_sup_norms(&apply_semigroup(r, &f).unwrap()).unwrap();
            for (a, b) in pr.iter().zip(&base) {
                assert!(*a <= *b * (1.0 + 1e-12) + 1e-15);
            }
        }
    }

    #[test]
    fn mollifier_error_decreases() {
        let f = slow_spectrum(256);
        let bp = BlockProjector::new(f.grid());
        let gaps: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&e| bp.holder_norm(&mollify(&f, &MollifierSymbol::new(e).unwrap()).sub(&f).unwrap(), -0.5).unwrap())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }
}
