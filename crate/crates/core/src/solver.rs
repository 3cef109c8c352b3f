//! Mild solvers for the Cahn-Hilliard nonlinearity `Delta(f^3 - f)` driven by
//! the stochastic convolution, with windowed Picard iteration.
//!
//! Every solver discretizes
//! `u(t_k) = P_{t_k} u_0 + A_k + int_0^{t_k} P_{t_k - q} Delta N(q, u(q)) dq`
//! with the exponential-Euler quadrature of [`crate::semigroup`] (source held
//! at its left value on each step). `A` is an additive path kept outside the
//! fixed point and `N` is evaluated pointwise on the `2n` grid, so its band
//! projection is exact for cubic expressions.
//!
//! The time axis is cut into windows. On a window the Picard map is iterated
//! until the sup over the window of `||u^{j+1} - u^j||_alpha` drops below the
//! tolerance; a window is accepted only if every observed ratio of successive
//! residuals is at most 1/2, otherwise it is shrunk and retried.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{biharmonic_symbol, laplacian_symbol, Field};
use crate::grid::TorusGrid;
use crate::littlewood_paley::BlockProjector;
use crate::noise::{psi_discrete, RawPath, WickTriple};
use crate::semigroup::{phi1, MollifierSymbol, SemigroupKernel};
use crate::series::TimeSeries;

/// Starting iterate on each window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialGuess {
    /// The last accepted value, held constant.
    Hold,
    Zero,
    /// The linear part `P_t u_0 + A_t`.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub alpha: f64,
    pub dt: f64,
    pub picard_tol: f64,
    /// Norm at which the solution counts as exploded.
    pub blowup: f64,
    /// Initial window length in time; derived from the contraction bound when absent.
    pub initial_window: Option<f64>,
    /// Constant in the contraction bound used for the derived window.
    pub window_constant: f64,
    pub shrink: f64,
    pub max_picard: usize,
    pub max_steps: usize,
    pub guess: InitialGuess,
    /// Keep every `store_every`-th step (the last step is always kept).
    pub store_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            dt: 1e-5,
            picard_tol: 1e-10,
            blowup: 1e6,
            initial_window: None,
            window_constant: 1.0,
            shrink: 0.5,
            max_picard: 100,
            max_steps: 10_000_000,
            guess: InitialGuess::Hold,
            store_every: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::config(key, msg));
        if !(self.dt > 0.0) {
            return bad("dt", format!("must be positive, got {}", self.dt));
        }
        if !(self.picard_tol > 0.0) {
            return bad("picard_tol", format!("must be positive, got {}", self.picard_tol));
        }
        if !(self.blowup > 0.0) {
            return bad("blowup", format!("must be positive, got {}", self.blowup));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink", format!("must lie in (0, 1), got {}", self.shrink));
        }
        if let Some(w) = self.initial_window {
            if !(w > 0.0) {
                return bad("initial_window", format!("must be positive, got {w}"));
            }
        }
        if !(self.window_constant > 0.0) {
            return bad("window_constant", format!("must be positive, got {}", self.window_constant));
        }
        if self.max_picard < 2 {
            return bad("max_picard", "must be at least 2".into());
        }
        if self.store_every == 0 {
            return bad("store_every", "must be at least 1".into());
        }
        Ok(())
    }

    /// `alpha in (0, 2 - d/2)`, `d <= 3`.
    pub fn check_low_dim(&self, grid: TorusGrid) -> Result<()> {
        self.validate()?;
        let d = grid.dim();
        if d > 3 {
            return Err(Error::Hypothesis(format!("the remainder equation needs d <= 3, got d = {d}")));
        }
        let top = 2.0 - d as f64 / 2.0;
        if !(self.alpha > 0.0 && self.alpha < top) {
            return Err(Error::Hypothesis(format!("alpha must lie in (0, {top}), got {}", self.alpha)));
        }
        Ok(())
    }

    /// `alpha in (0, 2)`.
    pub fn check_wick(&self) -> Result<()> {
        self.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::Hypothesis(format!("alpha must lie in (0, 2), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// `gamma_1 = min(alpha, 2 - alpha) / 2`.
pub fn gamma1(alpha: f64) -> f64 {
    0.5 * alpha.min(2.0 - alpha)
}

/// `gamma_2 = (2 + alpha + gamma_1) / 4`.
pub fn gamma2(alpha: f64) -> f64 {
    0.25 * (2.0 + alpha + gamma1(alpha))
}

/// Window length `min(1, (2 c L)^{-1/(1 - g2)})` at which the Lipschitz bound
/// `c max(U, U^{1-g2}) L` of the Picard map equals 1/2.
pub fn contraction_window(c: f64, lipschitz: f64, g2: f64) -> f64 {
    (2.0 * c * lipschitz).powf(-1.0 / (1.0 - g2)).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Status {
    Completed,
    Exploded { time: f64 },
    MaxSteps,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowRecord {
    /// First and last step index of the window (the first is the given value).
    pub start: usize,
    pub end: usize,
    pub iterations: usize,
    /// Largest observed ratio of successive Picard residuals (0 when one iteration sufficed).
    pub contraction: f64,
    pub residual: f64,
    /// Attempts rejected before this window was accepted.
    pub rejected: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub alpha: f64,
    pub dt: f64,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
    pub norms: Vec<f64>,
    pub windows: Vec<WindowRecord>,
    pub status: Status,
}

impl Trajectory {
    pub fn last(&self) -> &Field {
        self.fields.last().expect("trajectory holds the initial value")
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn window_of(&self, step: usize) -> Option<&WindowRecord> {
        self.windows.iter().find(|w| step > w.start && step <= w.end).or_else(|| self.windows.first())
    }

    pub fn max_contraction(&self) -> f64 {
        self.windows.iter().map(|w| w.contraction).fold(0.0, f64::max)
    }

    /// `sup_t ||a(t) - b(t)||_alpha` over stored steps common to both.
    pub fn sup_distance(&self, other: &Trajectory, alpha: f64) -> Result<f64> {
        let bp = BlockProjector::new(self.last().grid());
        let mut sup = 0.0f64;
        for (k, f) in self.steps.iter().zip(&self.fields) {
            if let Ok(j) = other.steps.binary_search(k) {
                sup = sup.max(bp.holder_norm(&f.sub(&other.fields[j])?, alpha)?);
            }
        }
        Ok(sup)
    }

    /// Rows `t,norm_alpha,window,picard_iterations,contraction`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,norm_alpha,window,picard_iterations,contraction\n");
        for ((k, t), n) in self.steps.iter().zip(&self.times).zip(&self.norms) {
            let (w, it, c) = match self.window_of(*k) {
                Some(w) => ((w.end - w.start) as f64 * self.dt, w.iterations, w.contraction),
                None => (0.0, 0, 0.0),
            };
            out.push_str(&format!("{t:e},{n:e},{w:e},{it},{c:e}\n"));
        }
        out
    }
}

/// Pointwise nonlinearity on the fine grid: `out = N(k, u)`.
type Nonlinearity<'a> = dyn Fn(usize, &[f64], &mut [f64]) + 'a;

struct Engine<'a> {
    grid: TorusGrid,
    bp: BlockProjector,
    cfg: &'a SolverConfig,
    decay: Vec<f64>,
    gain: Vec<f64>,
    free: Vec<Vec<Complex64>>,
    nonlin: &'a Nonlinearity<'a>,
}

enum Attempt {
    Accepted { fields: Vec<Field>, duhamel: Vec<Complex64>, iterations: usize, contraction: f64, residual: f64 },
    Rejected,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SolverConfig, u0: &Field, additive: Option<&[Field]>, nsteps: usize, nonlin: &'a Nonlinearity<'a>) -> Self {
        let grid = u0.grid();
        let d = grid.dim();
        let dt = cfg.dt;
        let (decay, gain) = (0..grid.len())
            .map(|i| {
                let m = grid.frequency(i);
                let z = dt * biharmonic_symbol(&m[..d]);
                ((-z).exp(), -laplacian_symbol(&m[..d]) * phi1(z) * dt)
            })
            .unzip();
        let free = (0..=nsteps)
            .map(|k| {
                let pg = SemigroupKernel::new(k as f64 * dt).expect("t >= 0").apply(u0);
                let mut c = pg.coeffs().to_vec();
                if let Some(a) = additive {
                    for (x, y) in c.iter_mut().zip(a[k].coeffs()) {
                        *x += y;
                    }
                }
                c
            })
            .collect();
        Self { grid, bp: BlockProjector::new(grid), cfg, decay, gain, free, nonlin }
    }

    fn field(&self, coeffs: Vec<Complex64>) -> Field {
        Field::from_coeffs_unchecked(self.grid, coeffs)
    }

    fn source(&self, k: usize, u: &Field, buf: &mut [f64]) -> Result<Vec<Complex64>> {
        let fine = u.padded_values();
        (self.nonlin)(k, &fine, buf);
        Field::project_coeffs_from_padded(self.grid, buf)
    }

    fn guess(&self, k0: usize, u0: &Field, len: usize) -> Vec<Field> {
        (1..=len)
            .map(|s| match self.cfg.guess {
                InitialGuess::Hold => u0.clone(),
                InitialGuess::Zero => Field::zeros(self.grid),
                InitialGuess::Linear => self.field(self.free[k0 + s].clone()),
            })
            .collect()
    }

    /// Picard iteration on steps `k0+1 ..= k0+len` given `u(t_k0)` and the
    /// Duhamel accumulator at `k0`.
    fn attempt(&self, k0: usize, u0: &Field, acc0: &[Complex64], len: usize) -> Result<Attempt> {
        let mut prev = self.guess(k0, u0, len);
        let mut buf = vec![0.0; self.grid.padded().len()];
        let mut last_res = f64::INFINITY;
        let mut contraction = 0.0f64;
        for it in 1..=self.cfg.max_picard {
            let mut acc = acc0.to_vec();
            let mut next = Vec::with_capacity(len);
            let mut res = 0.0f64;
            for s in 0..len {
                let k = k0 + s;
                let src = {
                    let u = if s == 0 { u0 } else { &prev[s - 1] };
                    match self.source(k, u, &mut buf) {
                        Ok(c) => c,
                        Err(_) => return Ok(Attempt::Rejected),
                    }
                };
                for i in 0..acc.len() {
                    acc[i] = acc[i] * self.decay[i] + src[i] * self.gain[i];
                }
                let coeffs: Vec<Complex64> = self.free[k + 1].iter().zip(&acc).map(|(a, b)| a + b).collect();
                let u = self.field(coeffs);
                if !u.values().iter().all(|v| v.is_finite()) {
                    return Ok(Attempt::Rejected);
                }
                res = res.max(self.bp.holder_norm(&u.sub(&prev[s])?, self.cfg.alpha)?);
                next.push(u);
            }
            if !res.is_finite() {
                return Ok(Attempt::Rejected);
            }
            if it > 1 {
                let factor = res / last_res;
                if factor > 0.5 {
                    return Ok(Attempt::Rejected);
                }
                contraction = contraction.max(factor);
            }
            if res <= self.cfg.picard_tol {
                return Ok(Attempt::Accepted { fields: next, duhamel: acc, iterations: it, contraction, residual: res });
            }
            last_res = res;
            prev = next;
        }
        Ok(Attempt::Rejected)
    }

    fn run(&self, u0: Field, nsteps: usize, window: f64) -> Result<Trajectory> {
        let cfg = self.cfg;
        let initial_len = ((window / cfg.dt).round() as usize).max(1);
        let mut len = initial_len;
        let mut k0 = 0usize;
        let mut u = u0;
        let mut acc = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        let n0 = self.bp.holder_norm(&u, cfg.alpha)?;
        let mut traj = Trajectory {
            alpha: cfg.alpha,
            dt: cfg.dt,
            steps: vec![0],
            times: vec![0.0],
            fields: vec![u.clone()],
            norms: vec![n0],
            windows: Vec::new(),
            status: Status::Completed,
        };
        if !(n0 < cfg.blowup) {
            traj.status = Status::Exploded { time: 0.0 };
            return Ok(traj);
        }
        let limit = nsteps.min(cfg.max_steps);
        let mut rejected = 0;
        while k0 < limit {
            let l = len.min(limit - k0);
            match self.attempt(k0, &u, &acc, l)? {
                Attempt::Rejected => {
                    if l == 1 {
                        traj.status = Status::Exploded { time: k0 as f64 * cfg.dt };
                        return Ok(traj);
                    }
                    rejected += 1;
                    len = ((l as f64 * cfg.shrink) as usize).max(1);
                }
                Attempt::Accepted { fields, duhamel, iterations, contraction, residual } => {
                    traj.windows.push(WindowRecord { start: k0, end: k0 + l, iterations, contraction, residual, rejected });
                    rejected = 0;
                    for (s, f) in fields.into_iter().enumerate() {
                        let k = k0 + s + 1;
                        let norm = self.bp.holder_norm(&f, cfg.alpha)?;
                        let t = k as f64 * cfg.dt;
                        if !(norm < cfg.blowup) {
                            traj.steps.push(k);
                            traj.times.push(t);
                            traj.fields.push(f);
                            traj.norms.push(norm);
                            traj.status = Status::Exploded { time: t };
                            return Ok(traj);
                        }
                        if k % cfg.store_every == 0 || k == limit {
                            traj.steps.push(k);
                            traj.times.push(t);
                            traj.fields.push(f.clone());
                            traj.norms.push(norm);
                        }
                        u = f;
                    }
                    acc = duhamel;
                    k0 += l;
                    len = (l * 2).min(initial_len);
                }
            }
        }
        if limit < nsteps {
            traj.status = Status::MaxSteps;
        }
        Ok(traj)
    }
}

/// Sup of `||f||_alpha` over at most 16 evenly spaced entries.
fn sampled_sup(bp: &BlockProjector, fields: &[&Field], alpha: f64) -> Result<f64> {
    let stride = (fields.len() / 16).max(1);
    fields.iter().step_by(stride).try_fold(0.0f64, |acc, f| Ok(acc.max(bp.holder_norm(f, alpha)?)))
}

fn check_series(grid: TorusGrid, times: &[f64], dt: f64) -> Result<usize> {
    if times.len() < 2 {
        return Err(Error::TimeGrid("need at least two solver times".into()));
    }
    if times[0] != 0.0 {
        return Err(Error::TimeGrid(format!("series must start at t = 0, got {}", times[0])));
    }
    for (k, &t) in times.iter().enumerate() {
        let expect = k as f64 * dt;
        if (t - expect).abs() > 1e-9 * dt + 4.0 * f64::EPSILON * expect {
            return Err(Error::TimeGrid(format!("series time {t} at step {k} is off the solver grid (dt = {dt})")));
        }
    }
    let _ = grid;
    Ok(times.len() - 1)
}

/// `f(t) = P_t g + A(t) + int_0^t P_{t-q} Delta(f^3 - f) dq` with the additive
/// path `A` sampled on the solver grid.
pub fn solve_remainder_low_dim(g: &Field, driver: &TimeSeries, cfg: &SolverConfig) -> Result<Trajectory> {
    let grid = g.grid();
    cfg.check_low_dim(grid)?;
    let nsteps = check_series(grid, &driver.times, cfg.dt)?;
    for f in &driver.fields {
        g.ensure_same_grid(f)?;
    }
    let nonlin = |_: usize, u: &[f64], out: &mut [f64]| {
        for (o, &v) in out.iter_mut().zip(u) {
            *o = v * v * v - v;
        }
    };
    let window = match cfg.initial_window {
        Some(w) => w,
        None => {
            let bp = BlockProjector::new(grid);
            let refs: Vec<&Field> = driver.fields.iter().collect();
            let gamma = 2.0 * (bp.holder_norm(g, cfg.alpha)? + sampled_sup(&bp, &refs, cfg.alpha)?);
            contraction_window(cfg.window_constant, 1.0 + 2.0 * gamma * gamma, 0.5)
        }
    };
    let engine = Engine::new(cfg, g, Some(&driver.fields), nsteps, &nonlin);
    let u0 = g.add(&driver.fields[0])?;
    engine.run(u0, nsteps, window)
}

/// Wick inputs sampled on the solver grid.
#[derive(Debug, Clone)]
pub struct WickSeries {
    pub times: Vec<f64>,
    pub triples: Vec<WickTriple>,
}

impl WickSeries {
    pub fn new(times: Vec<f64>, triples: Vec<WickTriple>) -> Result<Self> {
        if times.len() != triples.len() {
            return Err(Error::TimeGrid(format!("{} times for {} Wick triples", times.len(), triples.len())));
        }
        Ok(Self { times, triples })
    }

    /// Zero inputs on `steps + 1` times.
    pub fn zero(grid: TorusGrid, dt: f64, steps: usize) -> Self {
        Self { times: (0..=steps).map(|k| k as f64 * dt).collect(), triples: vec![WickTriple::zero(grid); steps + 1] }
    }

    /// Mollified inputs from a raw path renormalized by the discrete `psi_eps`.
    pub fn from_raw(raw: &RawPath, eps: f64) -> Result<Self> {
        Self::new(raw.times.clone(), raw.wick_series(eps)?)
    }

    /// The same field triple at every time.
    pub fn constant(triple: WickTriple, dt: f64, steps: usize) -> Self {
        Self { times: (0..=steps).map(|k| k as f64 * dt).collect(), triples: vec![triple; steps + 1] }
    }

    pub fn xs(&self) -> Vec<Field> {
        self.triples.iter().map(|t| t.x.clone()).collect()
    }
}

/// `h(t) = P_t g + int_0^t P_{t-q} Delta(h^3 + 3h^2 X + 3h Y + G - h - X) dq`.
pub fn solve_remainder_wick(g: &Field, wick: &WickSeries, cfg: &SolverConfig) -> Result<Trajectory> {
    let grid = g.grid();
    cfg.check_wick()?;
    let nsteps = check_series(grid, &wick.times, cfg.dt)?;
    for t in &wick.triples {
        if t.grid() != grid {
            return Err(Error::GridMismatch("Wick inputs live on a different grid".into()));
        }
    }
    let zero: Vec<bool> = wick.triples.iter().map(|t| t.is_zero()).collect();
    let nonlin = |k: usize, h: &[f64], out: &mut [f64]| {
        for (o, &v) in out.iter_mut().zip(h) {
            *o = v * v * v - v;
        }
        if zero[k] {
            return;
        }
        let w = &wick.triples[k];
        for (i, o) in out.iter_mut().enumerate() {
            let (v, x, y, gg) = (h[i], w.x_fine()[i], w.y_fine()[i], w.g_fine()[i]);
            *o += 3.0 * v * v * x + 3.0 * v * y + gg - x;
        }
    };
    let window = match cfg.initial_window {
        Some(w) => w,
        // With vanishing inputs this is the low-dimensional problem; use its window.
        None if zero.iter().all(|&z| z) => {
            let gamma = 2.0 * BlockProjector::new(grid).holder_norm(g, cfg.alpha)?;
            contraction_window(cfg.window_constant, 1.0 + 2.0 * gamma * gamma, 0.5)
        }
        None => {
            let a = cfg.alpha;
            let g1 = gamma1(a);
            let bp = BlockProjector::new(grid);
            let xs: Vec<&Field> = wick.triples.iter().map(|t| &t.x).collect();
            let ys: Vec<&Field> = wick.triples.iter().map(|t| &t.y).collect();
            let gs: Vec<&Field> = wick.triples.iter().map(|t| &t.g).collect();
            let (nx, ny, ng) = (sampled_sup(&bp, &xs, -g1)?, sampled_sup(&bp, &ys, -g1)?, sampled_sup(&bp, &gs, -g1)?);
            let gamma3 = 3.0 * (bp.holder_norm(g, a)? + ng);
            let lip = 2.0 * gamma3 * gamma3 + 2.0 * gamma3 * nx + ny + 1.0;
            contraction_window(cfg.window_constant, lip, gamma2(a))
        }
    };
    let engine = Engine::new(cfg, g, None, nsteps, &nonlin);
    engine.run(g.clone(), nsteps, window)
}

/// Mollified noise path for the direct equation: `X_eps` and `psi_eps` at solver times.
#[derive(Debug, Clone)]
pub struct DirectInput {
    pub eps: f64,
    pub x: TimeSeries,
    pub psi: Vec<f64>,
}

impl DirectInput {
    pub fn from_raw(raw: &RawPath, eps: f64) -> Result<Self> {
        let x = TimeSeries::new(raw.times.clone(), raw.fields(eps)?)?;
        let psi = raw.times.iter().map(|&t| psi_discrete(raw.grid, eps, t)).collect::<Result<_>>()?;
        Ok(Self { eps, x, psi })
    }

    pub fn zero(grid: TorusGrid, eps: f64, dt: f64, steps: usize) -> Result<Self> {
        Ok(Self { eps, x: TimeSeries::uniform(0.0, dt, vec![Field::zeros(grid); steps + 1])?, psi: vec![0.0; steps + 1] })
    }
}

/// `f(t) = P_t(zeta_eps g) + X_eps(t) + int_0^t P_{t-q} Delta(f^3 - 3 psi_eps(q) f - f) dq`.
pub fn solve_direct_mollified(g: &Field, noise: &DirectInput, cfg: &SolverConfig) -> Result<Trajectory> {
    let grid = g.grid();
    cfg.check_wick()?;
    let nsteps = check_series(grid, &noise.x.times, cfg.dt)?;
    if noise.psi.len() != noise.x.len() {
        return Err(Error::TimeGrid("psi and X sampled on different grids".into()));
    }
    for f in &noise.x.fields {
        g.ensure_same_grid(f)?;
    }
    let g_eps = MollifierSymbol::new(noise.eps)?.apply(g);
    let psi = &noise.psi;
    let nonlin = |k: usize, f: &[f64], out: &mut [f64]| {
        let p = psi[k];
        for (o, &v) in out.iter_mut().zip(f) {
            *o = v * v * v - 3.0 * p * v - v;
        }
    };
    let window = match cfg.initial_window {
        Some(w) => w,
        None => {
            let bp = BlockProjector::new(grid);
            let refs: Vec<&Field> = noise.x.fields.iter().collect();
            let gamma = 2.0 * (bp.holder_norm(&g_eps, cfg.alpha)? + sampled_sup(&bp, &refs, cfg.alpha)?);
            let psi_max = psi.iter().cloned().fold(0.0, f64::max);
            contraction_window(cfg.window_constant, 1.0 + 3.0 * psi_max + 2.0 * gamma * gamma, 0.5)
        }
    };
    let engine = Engine::new(cfg, &g_eps, Some(&noise.x.fields), nsteps, &nonlin);
    let u0 = g_eps.add(&noise.x.fields[0])?;
    engine.run(u0, nsteps, window)
}

/// Initial value and Wick inputs of one stability run.
#[derive(Debug, Clone)]
pub struct InputBundle {
    pub g: Field,
    pub wick: WickSeries,
}

/// Measured ingredients of the stability inequality for one pair of runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityTerms {
    pub left: f64,
    pub horizon: f64,
    pub sigma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// `||g5 - g1||_alpha`.
    pub initial_gap: f64,
    /// `||g6 - g2||`, `||g7 - g3||`, `||g8 - g4||` in `C_U C^{-gamma1}`.
    pub x_gap: f64,
    pub y_gap: f64,
    pub g_gap: f64,
    /// `||g6||`, `||g7||` in `C_U C^{-gamma1}`.
    pub x_norm: f64,
    pub y_norm: f64,
}

impl StabilityTerms {
    fn time_factor(&self) -> f64 {
        let u = self.horizon;
        u.max(u.powf(1.0 - self.gamma2))
    }

    /// Right side of the stability inequality for the constant `c`.
    pub fn right(&self, c: f64) -> f64 {
        let s = self.sigma;
        let m = c * self.time_factor();
        let lead = self.initial_gap + m * ((s * s + 1.0) * self.x_gap + s * self.y_gap + self.g_gap);
        lead * (m * (2.0 * s * s + 2.0 * s * self.x_norm + self.y_norm + 1.0)).exp()
    }

    /// Smallest `c` with `left <= right(c)` (bisection on a monotone function).
    pub fn minimal_constant(&self) -> f64 {
        if self.left <= self.right(0.0) {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.right(hi) < self.left {
            hi *= 2.0;
            if hi > 1e12 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.right(mid) >= self.left {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub terms: StabilityTerms,
    pub c: f64,
    pub right: f64,
    pub holds: bool,
}

fn sup_series_norm(bp: &BlockProjector, a: &[&Field], theta: f64) -> Result<f64> {
    a.iter().try_fold(0.0f64, |acc, f| Ok(acc.max(bp.holder_norm(f, theta)?)))
}

/// Run both bundles to `horizon` and measure every term of the inequality.
pub fn stability_terms(first: &InputBundle, second: &InputBundle, horizon: f64, cfg: &SolverConfig) -> Result<StabilityTerms> {
    let nsteps = (horizon / cfg.dt).round() as usize;
    let take = |b: &InputBundle| -> Result<WickSeries> {
        if b.wick.times.len() < nsteps + 1 {
            return Err(Error::TimeGrid(format!("Wick inputs cover {} steps, need {nsteps}", b.wick.times.len() - 1)));
        }
        WickSeries::new(b.wick.times[..=nsteps].to_vec(), b.wick.triples[..=nsteps].to_vec())
    };
    let (w1, w2) = (take(first)?, take(second)?);
    let t1 = solve_remainder_wick(&first.g, &w1, cfg)?;
    let t2 = solve_remainder_wick(&second.g, &w2, cfg)?;
    for t in [&t1, &t2] {
        if let Status::Exploded { time } = t.status {
            return Err(Error::Exploded { time });
        }
    }
    let a = cfg.alpha;
    let g1 = gamma1(a);
    let bp = BlockProjector::new(first.g.grid());
    let diff = |p: fn(&WickTriple) -> &Field| -> Result<f64> {
        let d: Vec<Field> = w1.triples.iter().zip(&w2.triples).map(|(u, v)| p(v).sub(p(u))).collect::<Result<_>>()?;
        sup_series_norm(&bp, &d.iter().collect::<Vec<_>>(), -g1)
    };
    let norm = |p: fn(&WickTriple) -> &Field| -> Result<f64> {
        sup_series_norm(&bp, &w2.triples.iter().map(p).collect::<Vec<_>>(), -g1)
    };
    let sigma = t1.norms.iter().chain(&t2.norms).cloned().fold(0.0, f64::max);
    Ok(StabilityTerms {
        left: t1.sup_distance(&t2, a)?,
        horizon,
        sigma,
        gamma1: g1,
        gamma2: gamma2(a),
        initial_gap: bp.holder_norm(&second.g.sub(&first.g)?, a)?,
        x_gap: diff(|t| &t.x)?,
        y_gap: diff(|t| &t.y)?,
        g_gap: diff(|t| &t.g)?,
        x_norm: norm(|t| &t.x)?,
        y_norm: norm(|t| &t.y)?,
    })
}

/// Both sides of the inequality for a given constant `c`.
pub fn stability_check(first: &InputBundle, second: &InputBundle, horizon: f64, cfg: &SolverConfig, c: f64) -> Result<StabilityReport> {
    let terms = stability_terms(first, second, horizon, cfg)?;
    let right = terms.right(c);
    Ok(StabilityReport { terms, c, right, holds: terms.left <= right })
}

/// Gap of each ladder level to the reference `h_ref + X_ref` for one coupled path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGaps {
    /// `None` when the level (or the reference) exploded before the horizon.
    pub gaps: Vec<Option<f64>>,
    /// Stopped horizon per level: the first time a norm reached the cap, else the horizon.
    pub stopped: Vec<f64>,
}

/// Solve every level of `eps_levels` directly and the Wick remainder at `eps_ref`
/// on one shared raw path; compare `f_eps` with `h_ref + X_ref`.
pub fn dpd_convergence_path(
    g: &Field,
    eps_levels: &[f64],
    eps_ref: f64,
    seed: u64,
    trajectory: u64,
    horizon: f64,
    cfg: &SolverConfig,
) -> Result<PathGaps> {
    let grid = g.grid();
    let nsteps = (horizon / cfg.dt).round() as usize;
    let times: Vec<f64> = (0..=nsteps).map(|k| k as f64 * cfg.dt).collect();
    let raw = RawPath::simulate(grid, seed, trajectory, &times)?;
    let wick = WickSeries::from_raw(&raw, eps_ref)?;
    let g_ref = MollifierSymbol::new(eps_ref)?.apply(g);
    let h = solve_remainder_wick(&g_ref, &wick, cfg)?;
    let bp = BlockProjector::new(grid);
    let reference: Vec<Field> = h
        .steps
        .iter()
        .zip(&h.fields)
        .map(|(&k, f)| f.add(&wick.triples[k].x))
        .collect::<Result<_>>()?;
    let ref_stop = h.steps.iter().zip(&reference).find(|(_, f)| bp.holder_norm(f, cfg.alpha).map_or(true, |n| n >= cfg.blowup));
    let ref_exploded = !matches!(h.status, Status::Completed) || ref_stop.is_some();
    let mut out = PathGaps { gaps: Vec::new(), stopped: Vec::new() };
    for &eps in eps_levels {
        let f = solve_direct_mollified(g, &DirectInput::from_raw(&raw, eps)?, cfg)?;
        let exploded = ref_exploded || !matches!(f.status, Status::Completed);
        let stop = match f.status {
            Status::Exploded { time } => time,
            _ => horizon,
        };
        out.stopped.push(stop.min(if ref_exploded { h.horizon() } else { horizon }));
        if exploded {
            out.gaps.push(None);
            continue;
        }
        let mut sup = 0.0f64;
        for (k, fk) in f.steps.iter().zip(&f.fields) {
            if let Ok(j) = h.steps.binary_search(k) {
                sup = sup.max(bp.holder_norm(&fk.sub(&reference[j])?, cfg.alpha)?);
            }
        }
        out.gaps.push(Some(sup));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpdGapReport {
    pub eps: Vec<f64>,
    /// Median over non-exploded paths of the sup-gap, per level.
    pub median_gap: Vec<f64>,
    pub exploded: Vec<usize>,
    pub median_stopped: Vec<f64>,
    pub paths: usize,
}

/// Collect per-path gaps into medians and explosion counts.
pub fn summarize_gaps(eps: &[f64], per_path: &[PathGaps]) -> DpdGapReport {
    let mut report = DpdGapReport { eps: eps.to_vec(), median_gap: Vec::new(), exploded: Vec::new(), median_stopped: Vec::new(), paths: per_path.len() };
    for k in 0..eps.len() {
        let mut ok: Vec<f64> = per_path.iter().filter_map(|p| p.gaps[k]).collect();
        report.exploded.push(per_path.len() - ok.len());
        report.median_gap.push(crate::noise::median(&mut ok));
        let mut st: Vec<f64> = per_path.iter().map(|p| p.stopped[k]).collect();
        report.median_stopped.push(crate::noise::median(&mut st));
    }
    report
}

/// Coupled ladder over `paths` trajectories of one seed.
pub fn dpd_convergence_experiment(
    g: &Field,
    eps_levels: &[f64],
    eps_ref: f64,
    horizon: f64,
    paths: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<DpdGapReport> {
    use rayon::prelude::*;
    let per_path = (0..paths as u64)
        .into_par_iter()
        .map(|k| dpd_convergence_path(g, eps_levels, eps_ref, seed, k, horizon, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_gaps(eps_levels, &per_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg(dt: f64) -> SolverConfig {
        SolverConfig { dt, picard_tol: 1e-12, ..SolverConfig::default() }
    }

    #[test]
    fn zero_data_stays_zero() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let z = Field::zeros(grid);
        let tr = solve_remainder_low_dim(&z, &TimeSeries::constant(z.clone(), 1e-4, 50).unwrap(), &cfg(1e-4)).unwrap();
        assert_eq!(tr.status, Status::Completed);
        assert!(tr.fields.iter().all(|f| f.sup_norm() == 0.0));
    }

    #[test]
    fn hypotheses_enforced() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let z = Field::zeros(grid);
        let drv = TimeSeries::constant(z.clone(), 1e-4, 2).unwrap();
        let bad = SolverConfig { alpha: 1.6, dt: 1e-4, ..SolverConfig::default() };
        assert!(matches!(solve_remainder_low_dim(&z, &drv, &bad), Err(Error::Hypothesis(_))));
        let wick = WickSeries::zero(grid, 1e-4, 2);
        let bad = SolverConfig { alpha: 2.0, dt: 1e-4, ..SolverConfig::default() };
        assert!(matches!(solve_remainder_wick(&z, &wick, &bad), Err(Error::Hypothesis(_))));
        let g4 = TorusGrid::new(4, 4).unwrap();
        let z4 = Field::zeros(g4);
        let drv4 = TimeSeries::constant(z4.clone(), 1e-4, 2).unwrap();
        assert!(matches!(solve_remainder_low_dim(&z4, &drv4, &cfg(1e-4)), Err(Error::Hypothesis(_))));
        let off = TimeSeries::constant(z.clone(), 2e-4, 2).unwrap();
        assert!(matches!(solve_remainder_low_dim(&z, &off, &cfg(1e-4)), Err(Error::TimeGrid(_))));
    }

    #[test]
    fn linearization_single_mode() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let delta = 1e-4;
        let g = Field::from_fn(grid, |x| delta * (2.0 * PI * x[0]).cos()).unwrap();
        let dt = 1e-6;
        let steps = 1000;
        let drv = TimeSeries::constant(Field::zeros(grid), dt, steps).unwrap();
        let tr = solve_remainder_low_dim(&g, &drv, &cfg(dt)).unwrap();
        let t = 1e-3;
        let rate = -(2.0 * PI).powi(4) + (2.0 * PI).powi(2);
        let expect = 0.5 * delta * (rate * t).exp();
        let got = tr.last().coeff(&[1]).re;
        assert!(((got - expect) / expect).abs() < 1e-2, "{got} vs {expect}");
        assert!(tr.windows.iter().all(|w| w.contraction <= 0.5));
    }

    #[test]
    fn wick_zero_inputs_match_low_dim_bitwise() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let g = Field::from_fn(grid, |x| 0.3 * (2.0 * PI * x[0]).sin() + 0.1 * (6.0 * PI * x[0]).cos()).unwrap();
        let (dt, steps) = (1e-5, 200);
        let c = cfg(dt);
        let a = solve_remainder_low_dim(&g, &TimeSeries::constant(Field::zeros(grid), dt, steps).unwrap(), &c).unwrap();
        let b = solve_remainder_wick(&g, &WickSeries::zero(grid, dt, steps), &c).unwrap();
        assert_eq!(a.steps, b.steps);
        for (u, v) in a.fields.iter().zip(&b.fields) {
            assert_eq!(u.values(), v.values());
        }
    }

    #[test]
    fn constant_g_is_annihilated() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let z = Field::zeros(grid);
        let w = WickTriple::from_fields(z.clone(), z.clone(), Field::constant(grid, 0.7), 0.0).unwrap();
        let tr = solve_remainder_wick(&z, &WickSeries::constant(w, 1e-5, 20), &cfg(1e-5)).unwrap();
        assert!(tr.fields.iter().all(|f| f.sup_norm() < 1e-300));
    }

    #[test]
    fn single_mode_g_closed_form() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let z = Field::zeros(grid);
        let gfield = Field::from_fn(grid, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let w = WickTriple::from_fields(z.clone(), z.clone(), gfield, 0.0).unwrap();
        let (dt, steps) = (1e-7, 1000);
        let tr = solve_remainder_wick(&z, &WickSeries::constant(w, dt, steps), &cfg(dt)).unwrap();
        let t = dt * steps as f64;
        let (lam, mu) = ((2.0 * PI).powi(4), (2.0 * PI).powi(2));
        let expect = -0.5 * mu * (1.0 - (-(lam - mu) * t).exp()) / (lam - mu);
        let got = tr.last().coeff(&[1]).re;
        assert!(((got - expect) / expect).abs() < 1e-3, "{got} vs {expect}");
    }

    #[test]
    fn mean_mode_follows_driver() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let (dt, steps) = (1e-5, 300);
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        let raw = RawPath::simulate(grid, 17, 0, &times).unwrap();
        let x = TimeSeries::new(times, raw.fields(0.0).unwrap()).unwrap();
        let g = Field::from_fn(grid, |p| 0.2 + 0.1 * (2.0 * PI * p[0]).cos()).unwrap();
        let tr = solve_remainder_low_dim(&g, &x, &cfg(dt)).unwrap();
        for (k, f) in tr.steps.iter().zip(&tr.fields) {
            assert!((f.mean() - (0.2 + x.fields[*k].mean())).abs() < 1e-10);
        }
    }
}
