//! Dyadic partition of unity, Littlewood-Paley blocks and Besov norms.
//!
//! Block `j >= -1` is the spectral multiplier `rho_j(|m|)` with
//! `rho_{-1} = chi`, `rho_j(t) = chi(2^{-j-1} t) - chi(2^{-j} t)`, where `chi`
//! is a smooth step equal to 1 on `[0, 3/4]` and 0 on `[4/3, inf)`. The sum
//! of all blocks telescopes to 1 on every frequency.
//!
//! Besov weights follow the convention `2^{alpha j} ||Delta_j f||`, so block
//! `-1` carries weight `2^{-alpha}`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{MultiIndex, TorusGrid};

/// Smooth step: 0 for `s <= 0`, 1 for `s >= 1`, `C^inf` in between.
pub fn smooth_step(s: f64) -> f64 {
    fn bump(s: f64) -> f64 {
        if s > 0.0 {
            (-1.0 / s).exp()
        } else {
            0.0
        }
    }
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = bump(s);
    let b = bump(1.0 - s);
    a / (a + b)
}

/// The concrete radial profiles `rho_{-1}` and `rho_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicPartition {
    /// `rho_{-1}` vanishes beyond this radius.
    pub inner_radius: f64,
    /// `rho_0` is supported in `[annulus_lo, annulus_hi]`.
    pub annulus_lo: f64,
    pub annulus_hi: f64,
}

impl Default for DyadicPartition {
    fn default() -> Self {
        make_partition()
    }
}

pub fn make_partition() -> DyadicPartition {
    DyadicPartition { inner_radius: 4.0 / 3.0, annulus_lo: 3.0 / 4.0, annulus_hi: 8.0 / 3.0 }
}

impl DyadicPartition {
    /// Cut-off `chi`: 1 on `[0, 3/4]`, 0 on `[4/3, inf)`.
    pub fn chi(&self, t: f64) -> f64 {
        let lo = self.annulus_lo;
        let hi = self.inner_radius;
        smooth_step((hi - t) / (hi - lo))
    }

    pub fn rho_minus1(&self, t: f64) -> f64 {
        self.chi(t)
    }

    pub fn rho0(&self, t: f64) -> f64 {
        (self.chi(0.5 * t) - self.chi(t)).max(0.0)
    }

    /// `rho_q(t)` for `q >= -1`.
    pub fn rho(&self, q: i32, t: f64) -> f64 {
        if q < 0 {
            self.rho_minus1(t)
        } else {
            self.rho0(t * (-(q as f64)).exp2())
        }
    }
}

/// Highest block index that can be non-zero on `grid`: `ceil(log2(sqrt(d) N)) + 1`.
pub fn max_block(grid: TorusGrid) -> i32 {
    let r = (grid.dim() as f64).sqrt() * grid.band() as f64;
    r.log2().ceil() as i32 + 1
}

/// Precomputed block multipliers for one grid.
#[derive(Debug, Clone)]
pub struct BlockProjector {
    grid: TorusGrid,
    partition: DyadicPartition,
    jmax: i32,
    /// `multipliers[j + 1][flat]`.
    multipliers: Vec<Vec<f64>>,
}

impl BlockProjector {
    pub fn new(grid: TorusGrid) -> Self {
        Self::with_partition(grid, make_partition())
    }

    pub fn with_partition(grid: TorusGrid, partition: DyadicPartition) -> Self {
        let jmax = max_block(grid);
        let norms = grid.frequency_norms();
        let multipliers = (-1..=jmax)
            .map(|j| norms.iter().map(|&r| partition.rho(j, r)).collect())
            .collect();
        Self { grid, partition, jmax, multipliers }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn partition(&self) -> &DyadicPartition {
        &self.partition
    }

    pub fn max_block(&self) -> i32 {
        self.jmax
    }

    /// Block indices `-1..=jmax`.
    pub fn indices(&self) -> impl Iterator<Item = i32> {
        -1..=self.jmax
    }

    pub fn multiplier(&self, j: i32) -> Option<&[f64]> {
        if j < -1 || j > self.jmax {
            None
        } else {
            Some(&self.multipliers[(j + 1) as usize])
        }
    }

    /// `Delta_j f`; zero for `j > jmax`.
    pub fn block(&self, f: &Field, j: i32) -> Result<Field> {
        if j < -1 {
            return Err(Error::InvalidInput(format!("block index {j} < -1")));
        }
        self.check_grid(f)?;
        Ok(match self.multiplier(j) {
            Some(mult) => apply_mask(f, mult),
            None => Field::zeros(self.grid),
        })
    }

    pub fn decompose(&self, f: &Field) -> Result<BlockSet> {
        self.check_grid(f)?;
        let blocks = self.indices().map(|j| apply_mask(f, self.multiplier(j).unwrap())).collect();
        Ok(BlockSet { blocks })
    }

    /// `||Delta_j f||_{L^inf}` (grid maximum) for every block.
    pub fn block_sup_norms(&self, f: &Field) -> Result<Vec<f64>> {
        self.block_lp_norms(f, f64::INFINITY)
    }

    pub fn block_lp_norms(&self, f: &Field, r: f64) -> Result<Vec<f64>> {
        self.check_grid(f)?;
        Ok(self
            .indices()
            .map(|j| {
                let mult = self.multiplier(j).unwrap();
                if f.coeffs().iter().zip(mult).all(|(c, &w)| w == 0.0 || c.norm_sqr() == 0.0) {
                    0.0
                } else {
                    apply_mask(f, mult).lp_norm(r)
                }
            })
            .collect())
    }

    /// `||f||_alpha = max_j 2^{alpha j} ||Delta_j f||_{L^inf}`.
    pub fn besov_sup_norm(&self, f: &Field, alpha: f64) -> Result<BesovReport> {
        let norms = self.block_sup_norms(f)?;
        Ok(BesovReport::from_block_norms(alpha, &norms))
    }

    /// Shorthand for the sup value of [`BlockProjector::besov_sup_norm`].
    pub fn holder_norm(&self, f: &Field, alpha: f64) -> Result<f64> {
        Ok(self.besov_sup_norm(f, alpha)?.sup)
    }

    /// `(sum_j 2^{alpha gamma j} ||Delta_j f||_{L^r}^gamma)^{1/gamma}`.
    pub fn besov_brg_norm(&self, f: &Field, alpha: f64, r: f64, gamma: f64) -> Result<f64> {
        if !(r >= 1.0) || !(gamma >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "B^alpha_(r,gamma) needs r >= 1 and gamma >= 1, got r = {r}, gamma = {gamma}"
            )));
        }
        let norms = self.block_lp_norms(f, r)?;
        let weighted = self
            .indices()
            .zip(&norms)
            .map(|(j, &v)| (alpha * j as f64).exp2() * v);
        if gamma.is_infinite() {
            return Ok(weighted.fold(0.0, f64::max));
        }
        Ok(weighted.map(|w| w.powf(gamma)).sum::<f64>().powf(1.0 / gamma))
    }

    pub fn check_grid(&self, f: &Field) -> Result<()> {
        if f.grid() != self.grid {
            return Err(Error::GridMismatch(format!(
                "projector built for {:?}, field on {:?}",
                self.grid,
                f.grid()
            )));
        }
        Ok(())
    }
}

fn apply_mask(f: &Field, mult: &[f64]) -> Field {
    f.map_indexed(|i, c| c * mult[i])
}

/// All blocks `Delta_{-1} f, ..., Delta_{jmax} f`.
#[derive(Debug, Clone)]
pub struct BlockSet {
    pub blocks: Vec<Field>,
}

impl BlockSet {
    /// `sum_j Delta_j f`.
    pub fn reconstruct(&self) -> Field {
        let mut acc = Field::zeros(self.blocks[0].grid());
        for b in &self.blocks {
            acc = acc.add(b).expect("same grid");
        }
        acc
    }

    /// Block `j` (`j >= -1`), or `None` beyond the stored range.
    pub fn get(&self, j: i32) -> Option<&Field> {
        if j < -1 {
            return None;
        }
        self.blocks.get((j + 1) as usize)
    }
}

/// Per-block Besov weights and their supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct BesovReport {
    pub alpha: f64,
    /// `(j, ||Delta_j f||_inf, 2^{alpha j} ||Delta_j f||_inf)`.
    pub blocks: Vec<(i32, f64, f64)>,
    pub sup: f64,
    pub brg: Option<f64>,
}

impl BesovReport {
    pub fn from_block_norms(alpha: f64, norms: &[f64]) -> Self {
        let blocks: Vec<_> = norms
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let j = k as i32 - 1;
                (j, v, (alpha * j as f64).exp2() * v)
            })
            .collect();
        let sup = blocks.iter().fold(0.0, |m: f64, b| m.max(b.2));
        Self { alpha, blocks, sup, brg: None }
    }

    /// CSV with header `block,block_norm,weighted`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("block,block_norm,weighted\n");
        for (j, v, w) in &self.blocks {
            let _ = writeln!(s, "{j},{v:e},{w:e}");
        }
        s
    }
}

/// `Delta_q f` with a freshly built projector.
pub fn block(f: &Field, q: i32) -> Result<Field> {
    BlockProjector::new(f.grid()).block(f, q)
}

pub fn besov_sup_norm(f: &Field, alpha: f64) -> Result<BesovReport> {
    BlockProjector::new(f.grid()).besov_sup_norm(f, alpha)
}

pub fn besov_brg_norm(f: &Field, alpha: f64, r: f64, gamma: f64) -> Result<f64> {
    BlockProjector::new(f.grid()).besov_brg_norm(f, alpha, r, gamma)
}

/// Least-squares slope of `log2 E||Delta_j f||_inf` against `j` over
/// `jmin..=jmax`, negated: the estimated Hölder-Besov regularity.
pub fn regularity_slope(fields: &[Field], jmin: i32, jmax: i32) -> Result<f64> {
    let first = fields.first().ok_or_else(|| Error::InvalidInput("no fields".into()))?;
    let projector = BlockProjector::new(first.grid());
    let mean = mean_block_norms(&projector, fields)?;
    slope_from_block_norms(&mean, jmin, jmax, projector.max_block())
}

/// Sample mean of the block sup-norms over an ensemble.
pub fn mean_block_norms(projector: &BlockProjector, fields: &[Field]) -> Result<Vec<f64>> {
    let mut mean = vec![0.0; (projector.max_block() + 2) as usize];
    for f in fields {
        for (m, v) in mean.iter_mut().zip(projector.block_sup_norms(f)?) {
            *m += v;
        }
    }
    let k = fields.len() as f64;
    Ok(mean.into_iter().map(|v| v / k).collect())
}

/// Regularity estimate from mean block norms (index 0 is block -1).
pub fn slope_from_block_norms(mean: &[f64], jmin: i32, jmax: i32, available: i32) -> Result<f64> {
    if jmin < -1 || jmax > available || jmax - jmin + 1 < 3 {
        return Err(Error::InvalidInput(format!(
            "block range {jmin}..={jmax} needs at least 3 blocks within -1..={available}"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in jmin..=jmax {
        let v = mean[(j + 1) as usize];
        if !(v > 0.0) {
            return Err(Error::Degenerate(format!("block {j} is identically zero")));
        }
        xs.push(j as f64);
        ys.push(v.log2());
    }
    Ok(-least_squares_slope(&xs, &ys))
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `||d^mu f||_inf / (beta^{d/q + |mu|} ||f||_{L^q})` for `f` supported in `|m| <= beta`.
pub fn bernstein_ratio(f: &Field, mu: &MultiIndex, q: f64, beta: f64) -> Result<f64> {
    if !(q >= 1.0) || !(beta > 0.0) {
        return Err(Error::InvalidInput(format!("need q >= 1 and beta > 0, got {q}, {beta}")));
    }
    let grid = f.grid();
    let d = grid.dim();
    let scale = f.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    for (i, c) in f.coeffs().iter().enumerate() {
        if c.norm() > 1e-13 * scale {
            let m = grid.frequency(i);
            let r = m[..d].iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
            if r > beta * (1.0 + 1e-12) {
                return Err(Error::SupportViolation { frequency: m[..d].to_vec(), radius: beta });
            }
        }
    }
    let lq = f.lp_norm(q);
    if lq == 0.0 {
        return Err(Error::Degenerate("zero field".into()));
    }
    let num = f.derivative(mu)?.sup_norm();
    let power = if q.is_infinite() { 0.0 } else { d as f64 / q } + mu.order() as f64;
    Ok(num / (beta.powf(power) * lq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn profiles_at_origin_and_two() {
        let p = make_partition();
        assert_eq!(p.rho_minus1(0.0), 1.0);
        for q in 0..10 {
            assert_eq!(p.rho(q, 0.0), 0.0);
        }
        assert_eq!(p.rho_minus1(2.0), 0.0);
        assert!((p.rho0(2.0) + p.rho0(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn supports() {
        let p = make_partition();
        for k in 0..=4000 {
            let t = k as f64 * 1e-3;
            let r1 = p.rho_minus1(t);
            let r0 = p.rho0(t);
            assert!(r1 >= 0.0 && r0 >= 0.0);
            if t >= 4.0 / 3.0 {
                assert_eq!(r1, 0.0);
            }
            if t <= 0.75 || t >= 8.0 / 3.0 {
                assert_eq!(r0, 0.0, "rho0({t})");
            }
        }
    }

    #[test]
    fn constant_blocks() {
        let g = TorusGrid::new(2, 16).unwrap();
        let c = Field::constant(g, 2.0);
        let bp = BlockProjector::new(g);
        assert!(bp.block(&c, -1).unwrap().relative_sup_distance(&c) < 1e-15);
        for j in 0..=bp.max_block() + 2 {
            assert_eq!(bp.block(&c, j).unwrap().sup_norm(), 0.0);
        }
        assert!(bp.block(&c, -2).is_err());
    }

    #[test]
    fn mode_four_lives_in_blocks_one_and_two() {
        let g = TorusGrid::new(1, 64).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * PI * 4.0 * x[0]).cos()).unwrap();
        let bp = BlockProjector::new(g);
        let p = make_partition();
        for j in bp.indices() {
            let n = bp.block(&f, j).unwrap().sup_norm();
            let expected = p.rho(j, 4.0);
            assert!((n - expected).abs() < 1e-13, "block {j}: {n} vs {expected}");
            assert_eq!(n > 1e-14, j == 1 || j == 2);
        }
    }

    #[test]
    fn besov_of_constants_and_zero() {
        let g = TorusGrid::new(1, 32).unwrap();
        let bp = BlockProjector::new(g);
        for alpha in [-1.5, 0.0, 0.7, 2.0] {
            let v = bp.holder_norm(&Field::constant(g, -3.0), alpha).unwrap();
            assert!((v - 3.0 * (-alpha).exp2()).abs() < 1e-14);
            assert_eq!(bp.holder_norm(&Field::zeros(g), alpha).unwrap(), 0.0);
            for (r, gam) in [(1.0, 1.0), (2.0, 3.0), (4.0, f64::INFINITY)] {
                let b = bp.besov_brg_norm(&Field::constant(g, -3.0), alpha, r, gam).unwrap();
                assert!((b - 3.0 * (-alpha).exp2()).abs() < 1e-13);
            }
        }
        assert!(bp.besov_brg_norm(&Field::zeros(g), 0.0, 0.5, 1.0).is_err());
        assert!(bp.besov_brg_norm(&Field::zeros(g), 0.0, 1.0, 0.9).is_err());
    }

    #[test]
    fn csv_rows() {
        let g = TorusGrid::new(1, 16).unwrap();
        let rep = besov_sup_norm(&Field::constant(g, 1.0), 1.0).unwrap();
        let csv = rep.to_csv();
        assert!(csv.starts_with("block,block_norm,weighted\n-1,"));
        assert_eq!(csv.lines().count(), rep.blocks.len() + 1);
    }

    #[test]
    fn constant_slope_is_degenerate() {
        let g = TorusGrid::new(1, 64).unwrap();
        let r = regularity_slope(&[Field::constant(g, 1.0)], 0, 3);
        assert!(matches!(r, Err(Error::Degenerate(_))));
        assert!(regularity_slope(&[Field::constant(g, 1.0)], 0, 1).is_err());
    }

    #[test]
    fn bernstein_support_violation() {
        let g = TorusGrid::new(1, 32).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * PI * 5.0 * x[0]).sin()).unwrap();
        let mu = MultiIndex::zero(1);
        assert!(matches!(
            bernstein_ratio(&f, &mu, 2.0, 4.0),
            Err(Error::SupportViolation { .. })
        ));
        assert!(bernstein_ratio(&f, &mu, 2.0, 5.0).is_ok());
    }

    #[test]
    fn bernstein_cosine_closed_form() {
        // ||f'||_inf = 2 pi and ||f||_inf = 1 for cos(2 pi x).
        let g = TorusGrid::new(1, 64).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let r = bernstein_ratio(&f, &MultiIndex::axis(1, 0, 1).unwrap(), f64::INFINITY, 1.0).unwrap();
        assert!((r - 2.0 * PI).abs() < 1e-12);
        let r0 = bernstein_ratio(&f, &MultiIndex::zero(1), f64::INFINITY, 1.0).unwrap();
        assert!((r0 - 1.0).abs() < 1e-15);
    }
}
