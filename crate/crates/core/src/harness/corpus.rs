//! Random band-limited corpora and fitted-constant inequality tests.
//!
//! Each inequality `lhs <= c * rhs` is probed on a training corpus, which fixes
//! `c` as the largest observed ratio, and then asserted on a disjoint held-out
//! corpus with a multiplicative slack.

use num_complex::Complex64;
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{biharmonic_symbols, Field};
use crate::grid::{MultiIndex, TorusGrid};
use crate::littlewood_paley::{bernstein_ratio, BlockProjector};
use crate::paraproduct::{para_lt, resonant};
use crate::rng::{stream, Channel};
use crate::semigroup::duhamel_constant_mode;

/// Coherent profiles use decay `s - COHERENT_SHIFT`; rising spectra are the
/// near-extremal fields of the Bernstein bounds with `q < inf`.
const COHERENT_SHIFT: f64 = 1.5;

/// Shape of a random corpus field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldLaw {
    /// Spectral decay exponents `s` in `|c(m)| ~ (1 + |m|)^{-s}`, drawn uniformly.
    pub decay: (f64, f64),
    /// Frequencies kept: `lo <= |m| <= hi`; `None` keeps the whole band.
    pub support: Option<(f64, f64)>,
    /// Sup-norm drawn log-uniformly from this range.
    pub amplitude: (f64, f64),
    /// Probability of replacing the random coefficients by their tapered,
    /// phase-aligned profile, which concentrates the field into a smooth peak.
    pub coherent: f64,
}

impl Default for FieldLaw {
    fn default() -> Self {
        Self { decay: (0.0, 3.0), support: None, amplitude: (0.1, 10.0), coherent: 0.0 }
    }
}

/// Draw one field. When the band is whole a random cutoff in `[2, N]` is applied,
/// so the corpus mixes smooth and rough members.
pub fn random_field<R: Rng + ?Sized>(grid: TorusGrid, law: &FieldLaw, rng: &mut R) -> Field {
    let s = law.decay.0 + (law.decay.1 - law.decay.0) * rng.random::<f64>();
    let (lo, hi) = match law.support {
        Some(b) => b,
        None => (0.0, 2.0 + (grid.band() as f64 - 2.0).max(0.0) * rng.random::<f64>()),
    };
    let (alo, ahi) = (law.amplitude.0.ln(), law.amplitude.1.ln());
    let amp = (alo + (ahi - alo) * rng.random::<f64>()).exp();
    let f = Field::from_modes(grid, |m| {
        let r = m.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        if r < lo || r > hi {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(a, b) * (1.0 + r).powf(-s)
        }
    });
    let f = if law.coherent > 0.0 && rng.random::<f64>() < law.coherent {
        // A smooth taper keeps the L^1 norm of the peak bounded uniformly in the cutoff.
        f.map_spectrum(|m, _| {
            let r = m.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
            let t = r / (hi + 1.0);
            Complex64::new((1.0 + r).powf(COHERENT_SHIFT - s) * (1.0 - t * t).max(0.0).powi(2), 0.0)
        })
    } else {
        f
    };
    let sup = f.sup_norm();
    if sup > 0.0 {
        f.scale(amp / sup)
    } else {
        f
    }
}

/// Whether the fitted constant bounds the ratio from above or below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Upper,
    Lower,
}

/// Outcome of one fitted-constant inequality test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityOutcome {
    pub name: String,
    pub bound: Bound,
    pub fitted: f64,
    pub slack: f64,
    /// Extreme held-out ratio (max for upper bounds, min for lower bounds).
    pub held_out: f64,
    pub violations: usize,
    pub samples: usize,
}

impl InequalityOutcome {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.fitted.is_finite() && self.fitted > 0.0
    }
}

/// Fit on `train`, assert on `test`.
pub fn fitted_test(name: impl Into<String>, bound: Bound, train: &[f64], test: &[f64], slack: f64) -> Result<InequalityOutcome> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    if let Some(r) = train.iter().chain(test).find(|r| !r.is_finite() || **r < 0.0) {
        return Err(Error::Degenerate(format!("ratio {r} is not a finite non-negative number")));
    }
    let (fitted, held_out, violations) = match bound {
        Bound::Upper => {
            let c = train.iter().cloned().fold(0.0, f64::max);
            (c, test.iter().cloned().fold(0.0, f64::max), test.iter().filter(|&&r| r > slack * c).count())
        }
        Bound::Lower => {
            let c = train.iter().cloned().fold(f64::INFINITY, f64::min);
            (c, test.iter().cloned().fold(f64::INFINITY, f64::min), test.iter().filter(|&&r| r < c / slack).count())
        }
    };
    Ok(InequalityOutcome { name: name.into(), bound, fitted, slack, held_out, violations, samples: test.len() })
}

/// Ratios of `item` over the training items `0..size` and held-out items `size..2 size`.
/// Each item draws from its own stream, so the corpora are disjoint and replayable.
pub fn split_ratios<F>(seed: u64, salt: u64, size: usize, item: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<f64> + Sync,
{
    let all = (0..2 * size as u64)
        .into_par_iter()
        .map(|k| item(&mut stream(seed, (salt << 32) | k, Channel::Corpus)))
        .collect::<Result<Vec<f64>>>()?;
    let test = all[size..].to_vec();
    let mut train = all;
    train.truncate(size);
    Ok((train, test))
}

fn ratio(lhs: f64, rhs: f64) -> Result<f64> {
    if rhs > 0.0 {
        Ok(lhs / rhs)
    } else if lhs == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::Degenerate(format!("right side vanishes while left side is {lhs}")))
    }
}

/// Shared knobs of every corpus suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusPlan {
    pub seed: u64,
    pub size: usize,
    pub slack: f64,
}

fn label(grid: TorusGrid) -> String {
    format!("d{}n{}", grid.dim(), grid.n())
}

/// `(1, 0)` becomes `1:0`, which keeps commas out of CSV cells.
fn mu_label(mu: &MultiIndex) -> String {
    mu.components().iter().map(|k| k.to_string()).collect::<Vec<_>>().join(":")
}

/// A field supported in `|m| <= beta`. Half the draws keep only a random top
/// annulus, so fields dominated by the highest modes are well represented.
fn bernstein_field(grid: TorusGrid, beta: f64, rng: &mut rand_chacha::ChaCha8Rng) -> Field {
    let lo = if rng.random_bool(0.5) { 0.0 } else { beta * rng.random::<f64>() };
    random_field(grid, &FieldLaw { support: Some((lo, beta)), coherent: 0.5, ..FieldLaw::default() }, rng)
}

/// Upper Bernstein bound `||d^mu f||_inf <= c beta^{d/q + |mu|} ||f||_q` for fields
/// supported in `|m| <= beta`, pooled over all `betas`; plus the per-`beta` maxima.
pub fn bernstein_upper(grid: TorusGrid, betas: &[f64], q: f64, mu: &MultiIndex, plan: CorpusPlan, salt: u64) -> Result<(InequalityOutcome, Vec<f64>)> {
    for &b in betas {
        if b > grid.band() as f64 {
            return Err(Error::InvalidInput(format!("beta {b} exceeds the band {}", grid.band())));
        }
    }
    let nb = betas.len() as u64;
    let (train, test) = split_ratios(plan.seed, salt, plan.size, |rng| {
        let b = betas[rng.random_range(0..nb) as usize];
        bernstein_ratio(&bernstein_field(grid, b, rng), mu, q, b)
    })?;
    let per_beta = betas
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            let (tr, _) = split_ratios(plan.seed, salt + 1 + k as u64, plan.size, |rng| {
                bernstein_ratio(&bernstein_field(grid, b, rng), mu, q, b)
            })?;
            Ok(tr.into_iter().fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let name = format!("bernstein-upper {} q={q} mu={}", label(grid), mu_label(mu));
    Ok((fitted_test(name, Bound::Upper, &train, &test, plan.slack)?, per_beta))
}

/// Two-sided Bernstein bound on annuli `beta gamma2 <= |m| <= beta gamma3`:
/// `c1 beta^|mu| ||f||_inf <= ||d^mu f||_inf <= c2 beta^|mu| ||f||_inf`.
pub fn bernstein_annulus(grid: TorusGrid, betas: &[f64], annulus: (f64, f64), mu: &MultiIndex, plan: CorpusPlan, salt: u64) -> Result<[InequalityOutcome; 2]> {
    let nb = betas.len() as u64;
    let (train, test) = split_ratios(plan.seed, salt, plan.size, |rng| {
        let b = betas[rng.random_range(0..nb) as usize];
        let law = FieldLaw { support: Some((b * annulus.0, b * annulus.1)), ..FieldLaw::default() };
        let f = random_field(grid, &law, rng);
        ratio(f.derivative(mu)?.sup_norm(), b.powi(mu.order() as i32) * f.sup_norm())
    })?;
    let tag = format!("{} mu={}", label(grid), mu_label(mu));
    Ok([
        fitted_test(format!("bernstein-annulus-lower {tag}"), Bound::Lower, &train, &test, plan.slack)?,
        fitted_test(format!("bernstein-annulus-upper {tag}"), Bound::Upper, &train, &test, plan.slack)?,
    ])
}

/// `||f||_{alpha - d/q} <= c ||f||_{B^alpha_{q,d}}`.
pub fn embedding(grid: TorusGrid, alpha: f64, q: f64, plan: CorpusPlan, salt: u64) -> Result<InequalityOutcome> {
    let bp = BlockProjector::new(grid);
    let d = grid.dim() as f64;
    let (train, test) = split_ratios(plan.seed, salt, plan.size, |rng| {
        let f = random_field(grid, &FieldLaw::default(), rng);
        ratio(bp.holder_norm(&f, alpha - d / q)?, bp.besov_brg_norm(&f, alpha, q, d)?)
    })?;
    fitted_test(format!("embedding {} alpha={alpha} q={q}", label(grid)), Bound::Upper, &train, &test, plan.slack)
}

/// `||d^mu f||_{alpha - |mu|} <= c ||f||_alpha`.
pub fn derivative(grid: TorusGrid, alpha: f64, mu: &MultiIndex, plan: CorpusPlan, salt: u64) -> Result<InequalityOutcome> {
    let bp = BlockProjector::new(grid);
    let k = mu.order() as f64;
    let (train, test) = split_ratios(plan.seed, salt, plan.size, |rng| {
        let f = random_field(grid, &FieldLaw::default(), rng);
        ratio(bp.holder_norm(&f.derivative(mu)?, alpha - k)?, bp.holder_norm(&f, alpha)?)
    })?;
    fitted_test(format!("derivative {} alpha={alpha} mu={}", label(grid), mu_label(mu)), Bound::Upper, &train, &test, plan.slack)
}

/// `||f ⊘ g||_alpha <= c ||f||_inf ||g||_alpha`.
pub fn paraproduct_linf(grid: TorusGrid, alpha: f64, plan: CorpusPlan, salt: u64) -> Result<InequalityOutcome> {
    let bp = BlockProjector::new(grid);
    let (train, test) = split_ratios(plan.seed, salt, plan.size, |rng| {
        let f = random_field(grid, &FieldLaw::default(), rng);
        let g = random_field(grid, &FieldLaw::default(), rng);
        ratio(bp.holder_norm(&para_lt(&f, &g)?, alpha)?, f.sup_norm() * bp.holder_norm(&g, alpha)?)
    })?;
    fitted_test(format!("paraproduct-linf {} alpha={alpha}", label(grid)), Bound::Upper, &train, &test, plan.slack)
}

/// `||f ⊘ g||_{alpha + beta} <= c ||f||_alpha ||g||_beta` with `alpha < 0`.
pub fn paraproduct_gain(grid: TorusGrid, alpha: f64, beta: f64, plan: CorpusPlan, salt: u64) -> Result<InequalityOutcome> {
    if !(alpha < 0.0) {
        return Err(Error::Hypothesis(format!("the low-frequency factor needs negative regularity, got {alpha}")));
    }
    let bp = BlockProjector::new(grid);
    let (train, test) = split_ratios(plan.seed, salt, plan.size, |rng| {
        let f = random_field(grid, &FieldLaw::default(), rng);
        let g = random_field(grid, &FieldLaw::default(), rng);
        ratio(bp.holder_norm(&para_lt(&f, &g)?, alpha + beta)?, bp.holder_norm(&f, alpha)? * bp.holder_norm(&g, beta)?)
    })?;
    fitted_test(format!("paraproduct-gain {} alpha={alpha} beta={beta}", label(grid)), Bound::Upper, &train, &test, plan.slack)
}

/// `||f ⊙ g||_{alpha + beta} <= c ||f||_alpha ||g||_beta` with `alpha + beta > 0`.
pub fn resonant_bound(grid: TorusGrid, alpha: f64, beta: f64, plan: CorpusPlan, salt: u64) -> Result<InequalityOutcome> {
    if !(alpha + beta > 0.0) {
        return Err(Error::Hypothesis(format!("resonant bound needs alpha + beta > 0, got {}", alpha + beta)));
    }
    let bp = BlockProjector::new(grid);
    let (train, test) = split_ratios(plan.seed, salt, plan.size, |rng| {
        let f = random_field(grid, &FieldLaw::default(), rng);
        let g = random_field(grid, &FieldLaw::default(), rng);
        ratio(bp.holder_norm(&resonant(&f, &g)?, alpha + beta)?, bp.holder_norm(&f, alpha)? * bp.holder_norm(&g, beta)?)
    })?;
    fitted_test(format!("resonant {} alpha={alpha} beta={beta}", label(grid)), Bound::Upper, &train, &test, plan.slack)
}

/// `||fg||_{min(alpha, beta)} <= c ||f||_alpha ||g||_beta` with `alpha + beta > 0`.
pub fn product_bound(grid: TorusGrid, alpha: f64, beta: f64, plan: CorpusPlan, salt: u64) -> Result<InequalityOutcome> {
    if !(alpha + beta > 0.0) {
        return Err(Error::Hypothesis(format!("product bound needs alpha + beta > 0, got {}", alpha + beta)));
    }
    let bp = BlockProjector::new(grid);
    let (train, test) = split_ratios(plan.seed, salt, plan.size, |rng| {
        let f = random_field(grid, &FieldLaw::default(), rng);
        let g = random_field(grid, &FieldLaw::default(), rng);
        ratio(bp.holder_norm(&f.product_dealiased(&g)?, alpha.min(beta))?, bp.holder_norm(&f, alpha)? * bp.holder_norm(&g, beta)?)
    })?;
    fitted_test(format!("product {} alpha={alpha} beta={beta}", label(grid)), Bound::Upper, &train, &test, plan.slack)
}

/// Time-integral Schauder bound for sources constant in time:
/// `sup_{t <= U} ||int_0^t P_{t-s} g ds||_{alpha+beta} <= c max(U, U^{1-beta/4}) ||g||_alpha`,
/// with `U` drawn log-uniformly from `horizons`.
pub fn schauder_integral(grid: TorusGrid, alpha: f64, beta: f64, horizons: (f64, f64), plan: CorpusPlan, salt: u64) -> Result<InequalityOutcome> {
    if !(beta > 0.0 && beta < 4.0) {
        return Err(Error::InvalidInput(format!("smoothing gain must lie in (0, 4), got {beta}")));
    }
    let bp = BlockProjector::new(grid);
    let lambdas = biharmonic_symbols(grid);
    let (train, test) = split_ratios(plan.seed, salt, plan.size, |rng| {
        let g = random_field(grid, &FieldLaw::default(), rng);
        let (lo, hi) = (horizons.0.ln(), horizons.1.ln());
        let u = (lo + (hi - lo) * rng.random::<f64>()).exp();
        let mut sup = 0.0f64;
        for k in 1..=32 {
            let t = u * (k as f64 / 32.0).powi(3);
            let w = g.map_indexed(|i, c| c * duhamel_constant_mode(lambdas[i], t));
            sup = sup.max(bp.holder_norm(&w, alpha + beta)?);
        }
        ratio(sup, u.max(u.powf(1.0 - beta / 4.0)) * bp.holder_norm(&g, alpha)?)
    })?;
    fitted_test(format!("schauder-integral {} alpha={alpha} beta={beta}", label(grid)), Bound::Upper, &train, &test, plan.slack)
}
