//! Parameters and runners of the individual experiments. Every threshold a
//! verdict uses is a parameter with a default; nothing is hidden in code.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::{self, CorpusPlan, FieldLaw, InequalityOutcome};
use super::lemma2::lemma2_check;
use super::{cell, Outcome, Table, Verdict};
use crate::error::{Error, Result};
use crate::field::{biharmonic_symbol, Field};
use crate::fit::{fit_rate, RateModel};
use crate::grid::{MultiIndex, TorusGrid};
use crate::littlewood_paley::{slope_from_block_norms, BlockProjector};
use crate::noise::{coupled_samples, mode_variances, mollifier_convergence_stat, mollifier_weights, psi_discrete, ConvergenceStat, OUState, RawPath};
use crate::paraproduct::bony_decompose_with;
use crate::rng::{stream, Channel};
use crate::semigroup::{apply_semigroup, schauder_rate, MollifierSymbol};
use crate::series::TimeSeries;
use crate::solver::{
    dpd_convergence_experiment, solve_direct_mollified, solve_remainder_low_dim, solve_remainder_wick, stability_terms, DirectInput, InitialGuess, InputBundle,
    SolverConfig, Status, Trajectory, WickSeries,
};

fn check(ok: bool, key: &str, msg: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, msg))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
}

impl GridSpec {
    pub const fn new(d: usize, n: usize) -> Self {
        Self { d, n }
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.d, self.n)
    }

    fn checked(&self, key: &str) -> Result<TorusGrid> {
        self.grid().map_err(|e| Error::config(key, e.to_string()))
    }
}

fn check_grids(grids: &[GridSpec], key: &str) -> Result<()> {
    check(!grids.is_empty(), key, "needs at least one grid")?;
    grids.iter().try_for_each(|g| g.checked(key).map(|_| ()))
}

/// Size and slack of fitted-constant corpora.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusParams {
    /// Items in the training corpus; the held-out corpus has the same size.
    pub size: usize,
    pub slack: f64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self { size: 100, slack: 1.5 }
    }
}

impl CorpusParams {
    fn validate(&self, key: &str) -> Result<()> {
        check(self.size >= 1, &format!("{key}.size"), "must be at least 1")?;
        check(self.slack >= 1.0, &format!("{key}.slack"), "must be at least 1")
    }

    fn plan(&self, seed: u64) -> CorpusPlan {
        CorpusPlan { seed, size: self.size, slack: self.slack }
    }
}

/// Initial datum `amplitude cos(2 pi mode x_1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialData {
    pub amplitude: f64,
    pub mode: i64,
}

impl Default for InitialData {
    fn default() -> Self {
        Self { amplitude: 0.3, mode: 1 }
    }
}

impl InitialData {
    pub fn field(&self, grid: TorusGrid) -> Result<Field> {
        if self.mode.abs() > grid.band() {
            return Err(Error::InvalidInput(format!("mode {} outside the band {}", self.mode, grid.band())));
        }
        Field::from_fn(grid, |x| self.amplitude * (2.0 * PI * self.mode as f64 * x[0]).cos())
    }
}

fn corpus_table() -> Table {
    Table::new(&["test", "bound", "fitted", "slack", "held_out", "violations", "samples"])
}

fn record(out: &mut Outcome, o: &InequalityOutcome) {
    out.series.push(vec![
        o.name.clone(),
        format!("{:?}", o.bound).to_lowercase(),
        cell(o.fitted),
        cell(o.slack),
        cell(o.held_out),
        o.violations.to_string(),
        o.samples.to_string(),
    ]);
    out.summary.insert(format!("{} fitted", o.name), o.fitted);
    out.verdicts.push(Verdict {
        name: o.name.clone(),
        passed: o.passed(),
        value: o.violations as f64,
        tolerance: 0.0,
        rule: format!("held-out violations of {} x fitted constant", o.slack),
    });
}

// ---------------------------------------------------------------- partition

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionParams {
    pub grids: Vec<GridSpec>,
    /// Random fields decomposed and rebuilt per grid.
    pub fields: usize,
    pub tolerance: f64,
}

impl Default for PartitionParams {
    fn default() -> Self {
        Self { grids: vec![GridSpec::new(1, 256), GridSpec::new(2, 64), GridSpec::new(3, 32)], fields: 20, tolerance: 1e-10 }
    }
}

impl PartitionParams {
    pub fn validate(&self) -> Result<()> {
        check_grids(&self.grids, "partition-check.grids")?;
        check(self.tolerance > 0.0, "partition-check.tolerance", "must be positive")
    }
}

pub fn run_partition_check(p: &PartitionParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome { series: Table::new(&["d", "n", "identity_deviation", "completeness_deviation"]), ..Outcome::default() };
    for (gi, gs) in p.grids.iter().enumerate() {
        let grid = gs.grid()?;
        let bp = BlockProjector::new(grid);
        let part = bp.partition();
        let d = grid.dim();
        let identity = (0..grid.len())
            .map(|i| {
                let m = grid.frequency(i);
                let t = m[..d].iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
                let s = part.rho_minus1(t) + (0..=bp.max_block()).map(|q| part.rho(q, t)).sum::<f64>();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max);
        let completeness = (0..p.fields as u64)
            .into_par_iter()
            .map(|k| {
                let f = corpus::random_field(grid, &FieldLaw::default(), &mut stream(seed, ((gi as u64) << 32) | k, Channel::Corpus));
                let rebuilt = bp.decompose(&f)?.reconstruct();
                let scale = f.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
                let dev = rebuilt.coeffs().iter().zip(f.coeffs()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                Ok(dev / scale)
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        out.series.push(vec![d.to_string(), grid.n().to_string(), cell(identity), cell(completeness)]);
        let tag = format!("d{}n{}", d, grid.n());
        out.summary.insert(format!("identity {tag}"), identity);
        out.summary.insert(format!("completeness {tag}"), completeness);
        out.verdicts.push(Verdict::at_most(format!("partition identity {tag}"), identity, p.tolerance));
        out.verdicts.push(Verdict::at_most(format!("block completeness {tag}"), completeness, p.tolerance));
    }
    Ok(out)
}

// ---------------------------------------------------------------- bernstein

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BernsteinParams {
    pub grids: Vec<GridSpec>,
    pub betas: Vec<f64>,
    /// Integrability exponents `q` (`inf` allowed).
    pub q: Vec<f64>,
    /// Derivative orders along the first axis.
    pub orders: Vec<u32>,
    /// Annulus `[gamma2, gamma3]` of the two-sided bound, checked in `d = 1`.
    pub annulus: [f64; 2],
    /// Allowed spread (max / min) of the per-`beta` maximal ratio.
    pub stability_factor: f64,
    pub corpus: CorpusParams,
}

impl Default for BernsteinParams {
    fn default() -> Self {
        Self {
            grids: vec![GridSpec::new(1, 128), GridSpec::new(2, 64)],
            betas: vec![4.0, 8.0, 16.0],
            q: vec![1.0, 2.0, f64::INFINITY],
            orders: vec![1, 2],
            annulus: [0.75, 8.0 / 3.0],
            stability_factor: 2.0,
            corpus: CorpusParams::default(),
        }
    }
}

impl BernsteinParams {
    pub fn validate(&self) -> Result<()> {
        check_grids(&self.grids, "bernstein.grids")?;
        check(!self.betas.is_empty() && self.betas.iter().all(|&b| b >= 1.0), "bernstein.betas", "needs values >= 1")?;
        for g in &self.grids {
            let band = g.grid()?.band() as f64;
            check(self.betas.iter().all(|&b| b <= band), "bernstein.betas", format!("every beta must fit in the band {band} of d={} n={}", g.d, g.n))?;
        }
        check(!self.q.is_empty() && self.q.iter().all(|&q| q >= 1.0), "bernstein.q", "needs values >= 1")?;
        check(self.orders.iter().all(|&k| (1..=MultiIndex::MAX_ORDER).contains(&k)), "bernstein.orders", "orders must lie in 1..=8")?;
        check(self.annulus[0] > 0.0 && self.annulus[0] < self.annulus[1], "bernstein.annulus", "needs 0 < gamma2 < gamma3")?;
        check(self.stability_factor >= 1.0, "bernstein.stability_factor", "must be at least 1")?;
        self.corpus.validate("bernstein.corpus")
    }
}

pub fn run_bernstein(p: &BernsteinParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome { series: corpus_table(), ..Outcome::default() };
    let plan = p.corpus.plan(seed);
    let mut salt = 0u64;
    for gs in &p.grids {
        let grid = gs.grid()?;
        let band = grid.band() as f64;
        for &k in &p.orders {
            let mu = MultiIndex::axis(grid.dim(), 0, k)?;
            for &q in &p.q {
                let (o, per_beta) = corpus::bernstein_upper(grid, &p.betas, q, &mu, plan, salt)?;
                salt += 1 + p.betas.len() as u64;
                let spread = per_beta.iter().cloned().fold(0.0, f64::max) / per_beta.iter().cloned().fold(f64::INFINITY, f64::min);
                for (b, m) in p.betas.iter().zip(&per_beta) {
                    out.summary.insert(format!("{} max at beta={b}", o.name), *m);
                }
                out.verdicts.push(Verdict::at_most(format!("{} spread across beta", o.name), spread, p.stability_factor));
                record(&mut out, &o);
            }
            let top = p.betas.iter().cloned().fold(0.0, f64::max) * p.annulus[1];
            if grid.dim() == 1 && top <= band {
                for o in corpus::bernstein_annulus(grid, &p.betas, (p.annulus[0], p.annulus[1]), &mu, plan, salt)? {
                    record(&mut out, &o);
                }
                salt += 1;
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- embedding

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingParams {
    pub grids: Vec<GridSpec>,
    pub alphas: Vec<f64>,
    pub q: Vec<f64>,
    /// Derivative orders along the first axis; order 2 also adds the mixed `(1, 1)` when `d >= 2`.
    pub orders: Vec<u32>,
    pub corpus: CorpusParams,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        Self {
            grids: vec![GridSpec::new(1, 128), GridSpec::new(2, 32)],
            alphas: vec![0.5, -0.5],
            q: vec![1.0, 2.0, 4.0],
            orders: vec![1, 2],
            corpus: CorpusParams::default(),
        }
    }
}

impl EmbeddingParams {
    pub fn validate(&self) -> Result<()> {
        check_grids(&self.grids, "embedding.grids")?;
        check(!self.alphas.is_empty(), "embedding.alphas", "needs at least one value")?;
        check(self.q.iter().all(|&q| q >= 1.0 && q.is_finite()), "embedding.q", "needs finite values >= 1")?;
        check(self.orders.iter().all(|&k| (1..=MultiIndex::MAX_ORDER).contains(&k)), "embedding.orders", "orders must lie in 1..=8")?;
        self.corpus.validate("embedding.corpus")
    }
}

pub fn run_embedding(p: &EmbeddingParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome { series: corpus_table(), ..Outcome::default() };
    let plan = p.corpus.plan(seed);
    let mut salt = 0u64;
    for gs in &p.grids {
        let grid = gs.grid()?;
        let d = grid.dim();
        for &alpha in &p.alphas {
            for &q in &p.q {
                record(&mut out, &corpus::embedding(grid, alpha, q, plan, salt)?);
                salt += 1;
            }
            let mut mus: Vec<MultiIndex> = p.orders.iter().map(|&k| MultiIndex::axis(d, 0, k)).collect::<Result<_>>()?;
            if d >= 2 && p.orders.contains(&2) {
                let mut c = vec![0; d];
                c[0] = 1;
                c[1] = 1;
                mus.push(MultiIndex::new(c)?);
            }
            for mu in &mus {
                record(&mut out, &corpus::derivative(grid, alpha, mu, plan, salt)?);
                salt += 1;
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- bony

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BonyParams {
    /// Grids of the decomposition identity.
    pub grids: Vec<GridSpec>,
    /// Random pairs per identity grid.
    pub pairs: usize,
    pub tolerance: f64,
    /// Run the paraproduct and product inequality corpora.
    pub inequalities: bool,
    pub corpus_grids: Vec<GridSpec>,
    /// Regularities of `||f ⊘ g||_alpha <= c ||f||_inf ||g||_alpha`.
    pub linf_alphas: Vec<f64>,
    /// `(alpha, beta)` of `||f ⊘ g||_{alpha+beta} <= c ||f||_alpha ||g||_beta`, `alpha < 0`.
    pub gain: Vec<[f64; 2]>,
    /// `(alpha, beta)` of the resonant bound.
    pub resonant: Vec<[f64; 2]>,
    /// `(alpha, beta)` of the product bound.
    pub product: Vec<[f64; 2]>,
    pub corpus: CorpusParams,
}

impl Default for BonyParams {
    fn default() -> Self {
        Self {
            grids: vec![GridSpec::new(1, 64), GridSpec::new(1, 256), GridSpec::new(2, 64), GridSpec::new(2, 256)],
            pairs: 200,
            tolerance: 1e-10,
            inequalities: true,
            corpus_grids: vec![GridSpec::new(1, 128), GridSpec::new(2, 32)],
            linf_alphas: vec![0.5, -0.5],
            gain: vec![[-0.5, 1.0]],
            resonant: vec![[0.5, 0.6]],
            product: vec![[0.5, 0.6], [1.0, 0.3]],
            corpus: CorpusParams::default(),
        }
    }
}

impl BonyParams {
    pub fn validate(&self) -> Result<()> {
        if !self.grids.is_empty() {
            check_grids(&self.grids, "bony.grids")?;
        }
        check(self.tolerance > 0.0, "bony.tolerance", "must be positive")?;
        if self.inequalities {
            check_grids(&self.corpus_grids, "bony.corpus_grids")?;
            check(self.gain.iter().all(|p| p[0] < 0.0), "bony.gain", "the low-frequency regularity must be negative")?;
            check(self.resonant.iter().all(|p| p[0] + p[1] > 0.0), "bony.resonant", "needs alpha + beta > 0")?;
            check(self.product.iter().all(|p| p[0] + p[1] > 0.0), "bony.product", "needs alpha + beta > 0")?;
            self.corpus.validate("bony.corpus")?;
        }
        Ok(())
    }
}

pub fn run_bony(p: &BonyParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome { series: corpus_table(), ..Outcome::default() };
    for (gi, gs) in p.grids.iter().enumerate() {
        let grid = gs.grid()?;
        let bp = BlockProjector::new(grid);
        let devs = (0..p.pairs as u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream(seed, (1 << 40) | ((gi as u64) << 32) | k, Channel::Corpus);
                let f = corpus::random_field(grid, &FieldLaw::default(), &mut rng);
                let g = corpus::random_field(grid, &FieldLaw::default(), &mut rng);
                let exact = f.product_dealiased(&g)?;
                let parts = bony_decompose_with(&bp, &f, &g)?;
                Ok(parts.sum().sub(&exact)?.sup_norm() / exact.sup_norm())
            })
            .collect::<Result<Vec<f64>>>()?;
        let worst = devs.iter().cloned().fold(0.0, f64::max);
        let over = devs.iter().filter(|&&v| v > p.tolerance).count();
        let name = format!("bony identity d{}n{}", grid.dim(), grid.n());
        out.series.push(vec![name.clone(), "identity".into(), cell(worst), cell(p.tolerance), cell(worst), over.to_string(), p.pairs.to_string()]);
        out.summary.insert(name.clone(), worst);
        out.verdicts.push(Verdict::at_most(name, worst, p.tolerance));
    }
    if p.inequalities {
        let plan = p.corpus.plan(seed);
        let mut salt = 0u64;
        for gs in &p.corpus_grids {
            let grid = gs.grid()?;
            for &a in &p.linf_alphas {
                record(&mut out, &corpus::paraproduct_linf(grid, a, plan, salt)?);
                salt += 1;
            }
            for &[a, b] in &p.gain {
                record(&mut out, &corpus::paraproduct_gain(grid, a, b, plan, salt)?);
                salt += 1;
            }
            for &[a, b] in &p.resonant {
                record(&mut out, &corpus::resonant_bound(grid, a, b, plan, salt)?);
                salt += 1;
            }
            for &[a, b] in &p.product {
                record(&mut out, &corpus::product_bound(grid, a, b, plan, salt)?);
                salt += 1;
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- schauder

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchauderParams {
    /// Points of the slow-spectrum field `c(m) = 1/|m|` in `d = 1`.
    pub n: usize,
    pub alpha: f64,
    pub betas: Vec<f64>,
    /// `log10 r` of the smallest time, the step and the number of times.
    pub log10_r_start: f64,
    pub log10_r_step: f64,
    pub r_count: usize,
    /// Allowed relative error of the fitted gain.
    pub tolerance: f64,
    /// Run the time-integral corpus.
    pub integral: bool,
    pub integral_grid: GridSpec,
    pub integral_alpha: f64,
    /// Horizons `U` are drawn log-uniformly from this range.
    pub horizons: [f64; 2],
    pub corpus: CorpusParams,
}

impl Default for SchauderParams {
    fn default() -> Self {
        Self {
            n: 512,
            alpha: 0.0,
            betas: vec![1.0, 2.0, 3.0],
            log10_r_start: -11.0,
            log10_r_step: 0.25,
            r_count: 17,
            tolerance: 0.2,
            integral: true,
            integral_grid: GridSpec::new(1, 128),
            integral_alpha: -0.5,
            horizons: [1e-4, 1e-1],
            corpus: CorpusParams::default(),
        }
    }
}

impl SchauderParams {
    pub fn validate(&self) -> Result<()> {
        GridSpec::new(1, self.n).checked("schauder.n")?;
        check(!self.betas.is_empty() && self.betas.iter().all(|&b| b > 0.0 && b < 4.0), "schauder.betas", "gains must lie in (0, 4)")?;
        check(self.r_count >= 3, "schauder.r_count", "needs at least 3 times")?;
        check(self.log10_r_step > 0.0, "schauder.log10_r_step", "must be positive")?;
        check(self.log10_r_start + self.log10_r_step * (self.r_count - 1) as f64 <= 0.0, "schauder.log10_r_start", "all times must be <= 1")?;
        check(self.tolerance > 0.0, "schauder.tolerance", "must be positive")?;
        if self.integral {
            self.integral_grid.checked("schauder.integral_grid")?;
            check(self.horizons[0] > 0.0 && self.horizons[0] <= self.horizons[1], "schauder.horizons", "needs 0 < lo <= hi")?;
            self.corpus.validate("schauder.corpus")?;
        }
        Ok(())
    }

    pub fn r_values(&self) -> Vec<f64> {
        (0..self.r_count).map(|k| 10f64.powf(self.log10_r_start + self.log10_r_step * k as f64)).collect()
    }
}

/// `c(m) = 1/|m|` for `m != 0` in `d = 1`.
pub fn slow_spectrum(grid: TorusGrid) -> Field {
    Field::from_modes(grid, |m| {
        let r = m.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
        num_complex::Complex64::new(if r > 0.0 { 1.0 / r } else { 0.0 }, 0.0)
    })
}

pub fn run_schauder(p: &SchauderParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome { series: Table::new(&["beta", "r", "norm"]), ..Outcome::default() };
    let grid = TorusGrid::new(1, p.n)?;
    let f = slow_spectrum(grid);
    let bp = BlockProjector::new(grid);
    let rs = p.r_values();
    for &beta in &p.betas {
        for &r in &rs {
            let v = bp.holder_norm(&apply_semigroup(r, &f)?, p.alpha + beta)?;
            out.series.push(vec![cell(beta), cell(r), cell(v)]);
        }
        let fit = schauder_rate(&f, p.alpha, beta, &rs)?;
        out.summary.insert(format!("fitted gain beta={beta}"), fit.beta_estimate);
        out.summary.insert(format!("r_squared beta={beta}"), fit.r_squared);
        out.verdicts.push(Verdict::within(format!("schauder rate beta={beta}"), fit.exponent, beta / 4.0, p.tolerance * beta / 4.0));
    }
    if p.integral {
        let g = p.integral_grid.grid()?;
        let plan = p.corpus.plan(seed);
        for (k, &beta) in p.betas.iter().enumerate() {
            let o = corpus::schauder_integral(g, p.integral_alpha, beta, (p.horizons[0], p.horizons[1]), plan, k as u64)?;
            out.summary.insert(format!("{} fitted", o.name), o.fitted);
            out.verdicts.push(Verdict {
                name: o.name.clone(),
                passed: o.passed(),
                value: o.violations as f64,
                tolerance: 0.0,
                rule: format!("held-out violations of {} x fitted constant", o.slack),
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- wick

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WickParams {
    pub grid: GridSpec,
    pub eps: f64,
    pub times: Vec<f64>,
    pub paths: usize,
    /// Relative tolerance between the closed-form `psi` and the step-by-step variance recursion.
    pub psi_tolerance: f64,
    pub recursion_steps: usize,
    /// Monte Carlo checks pass within this many standard errors.
    pub se_factor: f64,
}

impl Default for WickParams {
    fn default() -> Self {
        Self { grid: GridSpec::new(1, 64), eps: 0.1, times: vec![0.001, 0.01, 0.1], paths: 2000, psi_tolerance: 1e-12, recursion_steps: 1000, se_factor: 3.0 }
    }
}

impl WickParams {
    pub fn validate(&self) -> Result<()> {
        self.grid.checked("wick.grid")?;
        check(self.eps >= 0.0, "wick.eps", "must be >= 0")?;
        check(!self.times.is_empty() && self.times.iter().all(|&t| t > 0.0), "wick.times", "needs positive times")?;
        check(self.times.windows(2).all(|w| w[0] < w[1]), "wick.times", "must be increasing")?;
        check(self.paths >= 2, "wick.paths", "needs at least 2 paths")?;
        check(self.recursion_steps >= 1, "wick.recursion_steps", "must be at least 1")?;
        check(self.se_factor > 0.0, "wick.se_factor", "must be positive")
    }
}

/// `psi_eps(t)` from the per-mode variance recursion `v <- e^{-2 lambda h} v + (1 - e^{-2 lambda h}) / (2 lambda)`.
pub fn psi_by_recursion(grid: TorusGrid, eps: f64, t: f64, steps: usize) -> Result<f64> {
    let w = mollifier_weights(grid, eps)?;
    let d = grid.dim();
    let h = t / steps as f64;
    let mut total = t;
    for (i, &z) in w.iter().enumerate().skip(1) {
        if z == 0.0 {
            continue;
        }
        let lam = biharmonic_symbol(&grid.frequency(i)[..d]);
        let decay = (-2.0 * lam * h).exp();
        let gain = -(-2.0 * lam * h).exp_m1() / (2.0 * lam);
        let mut v = 0.0;
        for _ in 0..steps {
            v = decay * v + gain;
        }
        total += z * z * v;
    }
    Ok(total)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Sample variance and its standard error `sqrt((m4 - s^4) / n)`.
fn variance_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let s2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (s2, ((m4 - s2 * s2).max(0.0) / n).sqrt())
}

pub fn run_wick(p: &WickParams, seed: u64) -> Result<Outcome> {
    let grid = p.grid.grid()?;
    let mut out = Outcome {
        series: Table::new(&[
            "t", "psi", "psi_recursion", "mean_x2", "se_x2", "mean_y", "se_y", "mean_g", "se_g", "var_mean_y", "var_mean_y_theory", "se_var_mean_y",
        ]),
        ..Outcome::default()
    };
    let per_path = (0..p.paths as u64)
        .into_par_iter()
        .map(|k| {
            let raw = RawPath::simulate(grid, seed, k, &p.times)?;
            let triples = raw.wick_series(p.eps)?;
            Ok(triples
                .iter()
                .map(|w| {
                    let x2 = w.x.values().iter().map(|v| v * v).sum::<f64>() / grid.len() as f64;
                    [x2, w.y.mean(), w.g.mean()]
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    for (ti, &t) in p.times.iter().enumerate() {
        let psi = psi_discrete(grid, p.eps, t)?;
        let rec = psi_by_recursion(grid, p.eps, t, p.recursion_steps)?;
        let col = |c: usize| per_path.iter().map(|v| v[ti][c]).collect::<Vec<f64>>();
        let (mx, sx) = mean_se(&col(0));
        let (my, sy) = mean_se(&col(1));
        let (mg, sg) = mean_se(&col(2));
        let (vy, svy) = variance_se(&col(1));
        let theory = 2.0 * mode_variances(grid, p.eps, t)?.iter().map(|v| v * v).sum::<f64>();
        out.series.push([t, psi, rec, mx, sx, my, sy, mg, sg, vy, theory, svy].iter().map(|&v| cell(v)).collect());
        let k = p.se_factor;
        out.summary.insert(format!("psi t={t}"), psi);
        out.verdicts.push(Verdict::at_most(format!("psi closed form vs recursion t={t}"), (psi - rec).abs() / psi, p.psi_tolerance));
        out.verdicts.push(Verdict::at_most(format!("mean X^2 vs psi t={t} (SE units)"), (mx - psi).abs() / sx, k));
        out.verdicts.push(Verdict::at_most(format!("mean Y t={t} (SE units)"), my.abs() / sy, k));
        out.verdicts.push(Verdict::at_most(format!("mean G t={t} (SE units)"), mg.abs() / sg, k));
        out.verdicts.push(Verdict::at_most(format!("variance of mean Y t={t} (SE units)"), (vy - theory).abs() / svy, k));
    }
    Ok(out)
}

// ---------------------------------------------------------------- regularity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularityParams {
    pub grids: Vec<GridSpec>,
    pub time: f64,
    pub paths: usize,
    pub jmin: i32,
    /// Highest block of the fit; defaults to the last block whose annulus lies inside the band.
    pub jmax: Option<i32>,
    pub tolerance: f64,
}

impl Default for RegularityParams {
    fn default() -> Self {
        Self { grids: vec![GridSpec::new(1, 4096), GridSpec::new(2, 512)], time: 0.1, paths: 200, jmin: 3, jmax: None, tolerance: 0.2 }
    }
}

impl RegularityParams {
    pub fn validate(&self) -> Result<()> {
        check_grids(&self.grids, "regularity.grids")?;
        check(self.time > 0.0, "regularity.time", "must be positive")?;
        check(self.paths >= 1, "regularity.paths", "must be at least 1")?;
        for g in &self.grids {
            let grid = g.grid()?;
            let top = self.jmax.unwrap_or_else(|| last_full_block(grid));
            check(top - self.jmin + 1 >= 3, "regularity.jmin", format!("needs at least 3 blocks below {top} for d={} n={}", g.d, g.n))?;
        }
        check(self.tolerance > 0.0, "regularity.tolerance", "must be positive")
    }
}

/// Largest `j` whose annulus `2^j [3/4, 8/3]` fits inside the band.
pub fn last_full_block(grid: TorusGrid) -> i32 {
    let band = grid.band() as f64;
    let mut j = 0;
    while 2f64.powi(j + 1) * 8.0 / 3.0 <= band {
        j += 1;
    }
    j
}

pub fn run_regularity(p: &RegularityParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome { series: Table::new(&["d", "n", "j", "mean_block_norm"]), ..Outcome::default() };
    for gs in &p.grids {
        let grid = gs.grid()?;
        let bp = BlockProjector::new(grid);
        let sums = (0..p.paths as u64)
            .into_par_iter()
            .map(|k| {
                let mut state = OUState::new(grid, seed, k);
                state.advance_to(p.time)?;
                bp.block_sup_norms(&state.field(0.0)?)
            })
            .try_reduce(|| vec![0.0; (bp.max_block() + 2) as usize], |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()))?;
        let mean: Vec<f64> = sums.iter().map(|s| s / p.paths as f64).collect();
        for (k, v) in mean.iter().enumerate() {
            out.series.push(vec![grid.dim().to_string(), grid.n().to_string(), (k as i32 - 1).to_string(), cell(*v)]);
        }
        let top = p.jmax.unwrap_or_else(|| last_full_block(grid));
        let slope = slope_from_block_norms(&mean, p.jmin, top, bp.max_block())?;
        let target = 2.0 - grid.dim() as f64 / 2.0;
        let tag = format!("d{}n{}", grid.dim(), grid.n());
        out.summary.insert(format!("slope {tag}"), slope);
        out.verdicts.push(Verdict::within(format!("regularity slope {tag} blocks {}..={top}", p.jmin), slope, target, p.tolerance));
    }
    Ok(out)
}

// ---------------------------------------------------------------- lemma2

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma2Case {
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemma2Params {
    pub cases: Vec<Lemma2Case>,
    pub qmax: usize,
    /// Allowed `|slope|` of `log ratio` against `log(1 + |q|)`.
    pub slope_tolerance: f64,
}

impl Default for Lemma2Params {
    fn default() -> Self {
        Self {
            cases: vec![Lemma2Case { d: 1, alpha: 0.75, beta: 0.75 }, Lemma2Case { d: 2, alpha: 1.5, beta: 1.5 }],
            qmax: 64,
            slope_tolerance: 0.1,
        }
    }
}

impl Lemma2Params {
    pub fn validate(&self) -> Result<()> {
        check(!self.cases.is_empty(), "lemma2.cases", "needs at least one case")?;
        for c in &self.cases {
            let d = c.d as f64;
            check((1..=3).contains(&c.d), "lemma2.cases", format!("dimension {} outside 1..=3", c.d))?;
            check(c.alpha.max(c.beta) < d && c.alpha + c.beta > d, "lemma2.cases", format!("case {c:?} violates max(alpha, beta) < d < alpha + beta"))?;
        }
        check(self.qmax >= 16, "lemma2.qmax", "must be at least 16")?;
        check(self.slope_tolerance > 0.0, "lemma2.slope_tolerance", "must be positive")
    }
}

pub fn run_lemma2(p: &Lemma2Params) -> Result<Outcome> {
    let mut out = Outcome { series: Table::new(&["d", "alpha", "beta", "radius", "ratio"]), ..Outcome::default() };
    for c in &p.cases {
        let r = lemma2_check(c.d, c.alpha, c.beta, p.qmax)?;
        for (rad, ratio) in &r.profile {
            out.series.push(vec![c.d.to_string(), cell(c.alpha), cell(c.beta), cell(*rad), cell(*ratio)]);
        }
        let tag = format!("d={} alpha={} beta={}", c.d, c.alpha, c.beta);
        out.summary.insert(format!("max ratio {tag}"), r.max_ratio);
        out.summary.insert(format!("ratio at q=0 {tag}"), r.ratio_at_zero);
        out.verdicts.push(Verdict::flag(format!("finite constant {tag}"), r.max_ratio.is_finite(), "max ratio is finite"));
        out.verdicts.push(Verdict::within(format!("flat ratio {tag}"), r.slope, 0.0, p.slope_tolerance));
    }
    Ok(out)
}

// ---------------------------------------------------------------- solve

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveParams {
    pub grid: GridSpec,
    pub horizon: f64,
    /// Mollifier of the additive driver.
    pub eps: f64,
    pub initial: InitialData,
    pub solver: SolverConfig,
    /// Every accepted window must contract at least this much.
    pub contraction_limit: f64,
    /// Runs from the zero and the linear guess agree within this many Picard tolerances.
    pub guess_factor: f64,
    /// Run the step-halving check (zero driver).
    pub halving: bool,
    pub halving_dt: [f64; 3],
    pub halving_horizon: f64,
    /// Accepted range of the ratio of successive gaps.
    pub halving_ratio: [f64; 2],
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            grid: GridSpec::new(1, 128),
            horizon: 0.05,
            eps: 0.1,
            initial: InitialData::default(),
            solver: SolverConfig::default(),
            contraction_limit: 0.5,
            guess_factor: 2.0,
            halving: true,
            halving_dt: [4e-5, 2e-5, 1e-5],
            halving_horizon: 0.01,
            halving_ratio: [1.5, 2.5],
        }
    }
}

fn check_solver(cfg: &SolverConfig, key: &str, grid: TorusGrid, low_dim: bool) -> Result<()> {
    let r = if low_dim { cfg.check_low_dim(grid) } else { cfg.check_wick() };
    r.map_err(|e| match e {
        Error::Config { key: k, message } => Error::config(format!("{key}.{k}"), message),
        other => Error::config(format!("{key}.alpha"), other.to_string()),
    })
}

fn check_horizon(horizon: f64, dt: f64, key: &str) -> Result<usize> {
    let steps = (horizon / dt).round();
    check(horizon > 0.0 && steps >= 1.0 && ((steps * dt - horizon).abs() <= 1e-9 * horizon), key, format!("must be a positive multiple of dt = {dt}"))?;
    Ok(steps as usize)
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.checked("solve.grid")?;
        check_solver(&self.solver, "solve.solver", grid, true)?;
        check(self.initial.mode.abs() <= grid.band(), "solve.initial.mode", "outside the band")?;
        check_horizon(self.horizon, self.solver.dt, "solve.horizon")?;
        check(self.eps >= 0.0, "solve.eps", "must be >= 0")?;
        check(self.contraction_limit > 0.0 && self.contraction_limit < 1.0, "solve.contraction_limit", "must lie in (0, 1)")?;
        check(self.guess_factor > 0.0, "solve.guess_factor", "must be positive")?;
        if self.halving {
            check(self.halving_dt.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0), "solve.halving_dt", "must be positive and decreasing")?;
            for dt in self.halving_dt {
                check_horizon(self.halving_horizon, dt, "solve.halving_horizon")?;
            }
            check(self.halving_ratio[0] < self.halving_ratio[1], "solve.halving_ratio", "needs lo < hi")?;
        }
        Ok(())
    }
}

fn solver_times(horizon: f64, dt: f64) -> Vec<f64> {
    let steps = (horizon / dt).round() as usize;
    (0..=steps).map(|k| k as f64 * dt).collect()
}

fn accepted_contraction(t: &Trajectory) -> f64 {
    t.max_contraction()
}

pub fn run_solve(p: &SolveParams, seed: u64) -> Result<Outcome> {
    let grid = p.grid.grid()?;
    let g = p.initial.field(grid)?;
    let times = solver_times(p.horizon, p.solver.dt);
    let raw = RawPath::simulate(grid, seed, 0, &times)?;
    let driver = TimeSeries::new(times, raw.fields(p.eps)?)?;
    let main = solve_remainder_low_dim(&g, &driver, &p.solver)?;
    let zero = solve_remainder_low_dim(&g, &driver, &SolverConfig { guess: InitialGuess::Zero, ..p.solver.clone() })?;
    let linear = solve_remainder_low_dim(&g, &driver, &SolverConfig { guess: InitialGuess::Linear, ..p.solver.clone() })?;
    let mut out = Outcome { series: Table::new(&["t", "norm_alpha", "window", "picard_iterations", "contraction"]), ..Outcome::default() };
    for line in main.to_csv().lines().skip(1) {
        out.series.push(line.split(',').map(str::to_string).collect());
    }
    let contraction = [&main, &zero, &linear].iter().map(|t| accepted_contraction(t)).fold(0.0, f64::max);
    let spread = zero.sup_distance(&linear, p.solver.alpha)?;
    out.summary.insert("windows".into(), main.windows.len() as f64);
    out.summary.insert("max contraction".into(), contraction);
    out.summary.insert("guess spread".into(), spread);
    out.summary.insert("final norm".into(), *main.norms.last().unwrap_or(&f64::NAN));
    out.verdicts.push(Verdict::flag("completed", matches!(main.status, Status::Completed), "no explosion before the horizon"));
    out.verdicts.push(Verdict::at_most("picard contraction", contraction, p.contraction_limit));
    out.verdicts.push(Verdict::at_most("zero vs linear guess", spread, p.guess_factor * p.solver.picard_tol));
    if p.halving {
        let finals = p
            .halving_dt
            .iter()
            .map(|&dt| {
                let cfg = SolverConfig { dt, ..p.solver.clone() };
                let steps = (p.halving_horizon / dt).round() as usize;
                let drv = TimeSeries::constant(Field::zeros(grid), dt, steps)?;
                Ok(solve_remainder_low_dim(&g, &drv, &cfg)?.last().clone())
            })
            .collect::<Result<Vec<Field>>>()?;
        let bp = BlockProjector::new(grid);
        let e1 = bp.holder_norm(&finals[0].sub(&finals[1])?, p.solver.alpha)?;
        let e2 = bp.holder_norm(&finals[1].sub(&finals[2])?, p.solver.alpha)?;
        let ratio = e1 / e2;
        out.summary.insert("halving ratio".into(), ratio);
        out.verdicts.push(Verdict {
            name: "step halving ratio".into(),
            passed: ratio >= p.halving_ratio[0] && ratio <= p.halving_ratio[1],
            value: ratio,
            tolerance: p.halving_ratio[1],
            rule: format!("{} <= value <= {}", p.halving_ratio[0], p.halving_ratio[1]),
        });
    }
    out.dumps.push(("final".into(), main.last().clone()));
    out.trajectories.push(("trajectory".into(), main));
    Ok(out)
}

// ---------------------------------------------------------------- equivalence

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivalenceParams {
    pub grid: GridSpec,
    pub horizon: f64,
    pub eps: f64,
    pub paths: usize,
    /// Allowed sup-gap in units of the Picard tolerance.
    pub factor: f64,
    pub initial: InitialData,
    pub solver: SolverConfig,
}

impl Default for EquivalenceParams {
    fn default() -> Self {
        Self { grid: GridSpec::new(1, 128), horizon: 0.05, eps: 0.1, paths: 20, factor: 10.0, initial: InitialData::default(), solver: SolverConfig::default() }
    }
}

impl EquivalenceParams {
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.checked("equivalence.grid")?;
        check_solver(&self.solver, "equivalence.solver", grid, false)?;
        check(self.initial.mode.abs() <= grid.band(), "equivalence.initial.mode", "outside the band")?;
        check_horizon(self.horizon, self.solver.dt, "equivalence.horizon")?;
        check(self.eps > 0.0, "equivalence.eps", "must be positive")?;
        check(self.paths >= 1, "equivalence.paths", "must be at least 1")?;
        check(self.factor > 0.0, "equivalence.factor", "must be positive")
    }
}

/// Sup over common stored steps of `||f - (h + X)||_alpha` for one coupled path.
pub fn equivalence_gap(g: &Field, eps: f64, horizon: f64, seed: u64, trajectory: u64, cfg: &SolverConfig) -> Result<(f64, Trajectory, Trajectory)> {
    let grid = g.grid();
    let raw = RawPath::simulate(grid, seed, trajectory, &solver_times(horizon, cfg.dt))?;
    let f = solve_direct_mollified(g, &DirectInput::from_raw(&raw, eps)?, cfg)?;
    let wick = WickSeries::from_raw(&raw, eps)?;
    let h = solve_remainder_wick(&MollifierSymbol::new(eps)?.apply(g), &wick, cfg)?;
    for t in [&f, &h] {
        if let Status::Exploded { time } = t.status {
            return Err(Error::Exploded { time });
        }
    }
    let bp = BlockProjector::new(grid);
    let mut sup = 0.0f64;
    for (k, fk) in f.steps.iter().zip(&f.fields) {
        if let Ok(j) = h.steps.binary_search(k) {
            sup = sup.max(bp.holder_norm(&fk.sub(&h.fields[j].add(&wick.triples[*k].x)?)?, cfg.alpha)?);
        }
    }
    Ok((sup, f, h))
}

pub fn run_equivalence(p: &EquivalenceParams, seed: u64) -> Result<Outcome> {
    let grid = p.grid.grid()?;
    let g = p.initial.field(grid)?;
    let rows = (0..p.paths as u64)
        .into_par_iter()
        .map(|k| {
            let (gap, f, h) = equivalence_gap(&g, p.eps, p.horizon, seed, k, &p.solver)?;
            Ok((k, gap, f.windows.len(), h.windows.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outcome { series: Table::new(&["path", "sup_gap", "direct_windows", "wick_windows"]), ..Outcome::default() };
    for (k, gap, a, b) in &rows {
        out.series.push(vec![k.to_string(), cell(*gap), a.to_string(), b.to_string()]);
    }
    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    out.summary.insert("max sup gap".into(), worst);
    out.verdicts.push(Verdict::at_most("direct vs remainder plus noise", worst, p.factor * p.solver.picard_tol));
    Ok(out)
}

// ---------------------------------------------------------------- converge

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseLadder {
    pub enabled: bool,
    pub grid: GridSpec,
    /// Regularity of the gap norm.
    pub theta: f64,
    pub paths: usize,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolutionLadder {
    pub enabled: bool,
    pub grid: GridSpec,
    pub paths: usize,
    pub horizon: f64,
    pub initial: InitialData,
    pub solver: SolverConfig,
}

impl Default for NoiseLadder {
    fn default() -> Self {
        Self { enabled: true, grid: GridSpec::new(1, 64), theta: 1.3, paths: 200, times: vec![0.02, 0.05, 0.1] }
    }
}

impl Default for SolutionLadder {
    fn default() -> Self {
        Self { enabled: true, grid: GridSpec::new(1, 128), paths: 100, horizon: 0.02, initial: InitialData::default(), solver: SolverConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeParams {
    /// Mollifier ladder, coarsest first.
    pub eps: Vec<f64>,
    /// Reference level; 0 is the unmollified grid process.
    pub eps_ref: f64,
    /// `X` gaps.
    pub noise_x: NoiseLadder,
    /// `Y` and `G` gaps.
    pub noise_wick: NoiseLadder,
    /// Solution gaps to the reference `h + X`.
    pub solution: SolutionLadder,
}

impl Default for ConvergeParams {
    fn default() -> Self {
        Self {
            eps: vec![0.4, 0.2, 0.1],
            eps_ref: 0.0,
            noise_x: NoiseLadder::default(),
            noise_wick: NoiseLadder { grid: GridSpec::new(4, 16), theta: -0.2, paths: 100, times: vec![0.05, 0.1], ..NoiseLadder::default() },
            solution: SolutionLadder::default(),
        }
    }
}

impl ConvergeParams {
    pub fn validate(&self) -> Result<()> {
        check(self.eps.len() >= 2 && self.eps.iter().all(|&e| e > 0.0), "converge.eps", "needs at least two positive levels")?;
        check(self.eps.windows(2).all(|w| w[1] < w[0]), "converge.eps", "must be decreasing")?;
        check(self.eps_ref >= 0.0 && self.eps_ref < *self.eps.last().unwrap(), "converge.eps_ref", "must lie in [0, finest level)")?;
        for (key, l) in [("converge.noise_x", &self.noise_x), ("converge.noise_wick", &self.noise_wick)] {
            if l.enabled {
                l.grid.checked(&format!("{key}.grid"))?;
                check(l.paths >= 1, &format!("{key}.paths"), "must be at least 1")?;
                check(!l.times.is_empty() && l.times.iter().all(|&t| t > 0.0), &format!("{key}.times"), "needs positive times")?;
                check(l.times.windows(2).all(|w| w[0] < w[1]), &format!("{key}.times"), "must be increasing")?;
            }
        }
        let s = &self.solution;
        if s.enabled {
            let grid = s.grid.checked("converge.solution.grid")?;
            check_solver(&s.solver, "converge.solution.solver", grid, false)?;
            check(s.initial.mode.abs() <= grid.band(), "converge.solution.initial.mode", "outside the band")?;
            check_horizon(s.horizon, s.solver.dt, "converge.solution.horizon")?;
            check(s.paths >= 1, "converge.solution.paths", "must be at least 1")?;
        }
        Ok(())
    }
}

fn noise_ladder(l: &NoiseLadder, eps: &[f64], eps_ref: f64, seed: u64, wick: bool) -> Result<ConvergenceStat> {
    let grid = l.grid.grid()?;
    let mut levels = eps.to_vec();
    levels.push(eps_ref);
    let paths = (0..l.paths as u64)
        .into_par_iter()
        .map(|k| coupled_samples(grid, &levels, seed, k, &l.times, wick))
        .collect::<Result<Vec<_>>>()?;
    let mut stat = mollifier_convergence_stat(&paths, l.theta, l.theta)?;
    for v in [&mut stat.eps, &mut stat.x, &mut stat.y, &mut stat.g] {
        v.truncate(eps.len());
    }
    Ok(stat)
}

fn ladder_verdict(out: &mut Outcome, part: &str, eps: &[f64], medians: &[f64]) {
    for (e, m) in eps.iter().zip(medians) {
        out.series.push(vec![part.to_string(), cell(*e), cell(*m)]);
        out.summary.insert(format!("{part} median eps={e}"), *m);
    }
    let pts: Vec<(f64, f64)> = eps.iter().cloned().zip(medians.iter().cloned()).collect();
    if let Ok(fit) = fit_rate(&pts, RateModel::Power) {
        out.summary.insert(format!("{part} rate"), fit.exponent);
    }
    let worst = medians.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    out.verdicts.push(Verdict {
        name: format!("{part} medians strictly decreasing"),
        passed: ConvergenceStat::strictly_decreasing(medians),
        value: worst,
        tolerance: 1.0,
        rule: "largest ratio of successive medians < tolerance".into(),
    });
}

pub fn run_converge(p: &ConvergeParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome { series: Table::new(&["quantity", "eps", "median_gap"]), ..Outcome::default() };
    if p.noise_x.enabled {
        let st = noise_ladder(&p.noise_x, &p.eps, p.eps_ref, seed, false)?;
        ladder_verdict(&mut out, "X", &st.eps, &st.x);
    }
    if p.noise_wick.enabled {
        let st = noise_ladder(&p.noise_wick, &p.eps, p.eps_ref, seed, true)?;
        ladder_verdict(&mut out, "Y", &st.eps, &st.y);
        ladder_verdict(&mut out, "G", &st.eps, &st.g);
    }
    let s = &p.solution;
    if s.enabled {
        let grid = s.grid.grid()?;
        let g = s.initial.field(grid)?;
        let report = dpd_convergence_experiment(&g, &p.eps, p.eps_ref, s.horizon, s.paths, seed, &s.solver)?;
        for (e, x) in report.eps.iter().zip(&report.exploded) {
            out.summary.insert(format!("solution exploded fraction eps={e}"), *x as f64 / report.paths as f64);
        }
        for (e, t) in report.eps.iter().zip(&report.median_stopped) {
            out.summary.insert(format!("solution median stopped horizon eps={e}"), *t);
        }
        ladder_verdict(&mut out, "solution", &report.eps, &report.median_gap);
    }
    Ok(out)
}

// ---------------------------------------------------------------- stability

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityParams {
    pub grid: GridSpec,
    pub horizon: f64,
    /// Pairs that fit the constant.
    pub calibration: usize,
    /// Held-out pairs checked against the fitted constant.
    pub pairs: usize,
    pub slack: f64,
    /// Sup-norm of the base initial datum.
    pub base_amplitude: f64,
    /// Sup-norm scale of the perturbations.
    pub perturbation: f64,
    /// Sup-norm of the non-zero Wick inputs.
    pub wick_amplitude: f64,
    pub solver: SolverConfig,
}

impl Default for StabilityParams {
    fn default() -> Self {
        Self {
            grid: GridSpec::new(1, 32),
            horizon: 0.01,
            calibration: 100,
            pairs: 20,
            slack: 1.5,
            base_amplitude: 0.3,
            perturbation: 1e-3,
            wick_amplitude: 0.05,
            solver: SolverConfig::default(),
        }
    }
}

impl StabilityParams {
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.checked("stability.grid")?;
        check_solver(&self.solver, "stability.solver", grid, false)?;
        check_horizon(self.horizon, self.solver.dt, "stability.horizon")?;
        check(self.calibration >= 1, "stability.calibration", "must be at least 1")?;
        check(self.pairs >= 1, "stability.pairs", "must be at least 1")?;
        check(self.slack >= 1.0, "stability.slack", "must be at least 1")?;
        check(self.base_amplitude >= 0.0, "stability.base_amplitude", "must be >= 0")?;
        check(self.perturbation > 0.0, "stability.perturbation", "must be positive")?;
        check(self.wick_amplitude >= 0.0, "stability.wick_amplitude", "must be >= 0")
    }
}

/// Pair `k` of the stability corpus. The pattern cycles through: perturbed datum
/// with zero Wick inputs; perturbed Wick inputs only; both perturbed; Wick inputs
/// switched on from zero.
pub fn stability_pair(p: &StabilityParams, seed: u64, k: u64) -> Result<(InputBundle, InputBundle)> {
    let grid = p.grid.grid()?;
    let steps = (p.horizon / p.solver.dt).round() as usize;
    let mut rng = stream(seed, k, Channel::Perturbation);
    let law = |amp: f64, s: f64| FieldLaw { decay: (s, s + 1.0), support: None, amplitude: (amp, amp), coherent: 0.0 };
    let g1 = corpus::random_field(grid, &law(p.base_amplitude, 2.0), &mut rng);
    let scale = p.perturbation * (1.0 + (k % 5) as f64);
    let triple = |amp: f64, rng: &mut rand_chacha::ChaCha8Rng| -> Result<crate::noise::WickTriple> {
        if amp == 0.0 {
            return Ok(crate::noise::WickTriple::zero(grid));
        }
        let x = corpus::random_field(grid, &law(amp, 1.0), rng);
        let y = corpus::random_field(grid, &law(amp, 1.0), rng);
        let g = corpus::random_field(grid, &law(amp, 1.0), rng);
        crate::noise::WickTriple::from_fields(x, y, g, 0.0)
    };
    let kind = k % 4;
    let base = triple(if kind == 1 || kind == 2 { p.wick_amplitude } else { 0.0 }, &mut rng)?;
    let delta = triple(if kind == 0 { 0.0 } else { scale }, &mut rng)?;
    let moved = crate::noise::WickTriple::from_fields(base.x.add(&delta.x)?, base.y.add(&delta.y)?, base.g.add(&delta.g)?, 0.0)?;
    let g2 = if kind == 0 || kind == 2 { g1.add(&corpus::random_field(grid, &law(scale, 2.0), &mut rng))? } else { g1.clone() };
    Ok((
        InputBundle { g: g1, wick: WickSeries::constant(base, p.solver.dt, steps) },
        InputBundle { g: g2, wick: WickSeries::constant(moved, p.solver.dt, steps) },
    ))
}

pub fn run_stability(p: &StabilityParams, seed: u64) -> Result<Outcome> {
    let terms = (0..(p.calibration + p.pairs) as u64)
        .into_par_iter()
        .map(|k| {
            let (a, b) = stability_pair(p, seed, k)?;
            stability_terms(&a, &b, p.horizon, &p.solver)
        })
        .collect::<Result<Vec<_>>>()?;
    let (calib, held) = terms.split_at(p.calibration);
    let c = calib.iter().map(|t| t.minimal_constant()).fold(0.0, f64::max);
    let mut out = Outcome { series: Table::new(&["set", "pair", "left", "initial_gap", "right", "minimal_constant"]), ..Outcome::default() };
    let mut violations = 0;
    for (set, list, cc) in [("calibration", calib, c), ("held-out", held, p.slack * c)] {
        for (k, t) in list.iter().enumerate() {
            let right = t.right(cc);
            if set == "held-out" && t.left > right {
                violations += 1;
            }
            out.series.push(vec![set.into(), k.to_string(), cell(t.left), cell(t.initial_gap), cell(right), cell(t.minimal_constant())]);
        }
    }
    out.summary.insert("fitted constant".into(), c);
    out.summary.insert("largest held-out minimal constant".into(), held.iter().map(|t| t.minimal_constant()).fold(0.0, f64::max));
    out.verdicts.push(Verdict {
        name: "stability inequality on held-out pairs".into(),
        passed: violations == 0 && c.is_finite(),
        value: violations as f64,
        tolerance: 0.0,
        rule: format!("held-out violations with {} x fitted constant", p.slack),
    });
    Ok(out)
}

