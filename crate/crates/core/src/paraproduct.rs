//! Bony decomposition `fg = f ⊘ g + f ⊙ g + f ⊗ g`.
//!
//! In block numbering (`Delta_a f Delta_b g`, `a, b >= -1`):
//!
//! * `f ⊘ g`: pairs with `a <= b - 2` (low frequencies of `f` modulate `g`),
//! * `f ⊙ g`: pairs with `|a - b| <= 1`, each counted once,
//! * `f ⊗ g = g ⊘ f`: pairs with `b <= a - 2`.
//!
//! Block products are sampled on the `3n/2` grid, where a quadratic product
//! projects onto the band without aliasing. Projection is linear, so each sum
//! is accumulated there and projected once.

use num_complex::Complex64;
use rustfft::FftDirection;

use crate::error::Result;
use crate::fft;
use crate::field::Field;
use crate::littlewood_paley::BlockProjector;

/// Which pairs `(a, b)` a bilinear term keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairClass {
    ParaLow,
    Resonant,
    ParaHigh,
}

/// Classify a block pair `(a, b)`.
pub fn classify(a: i32, b: i32) -> PairClass {
    if a <= b - 2 {
        PairClass::ParaLow
    } else if b <= a - 2 {
        PairClass::ParaHigh
    } else {
        PairClass::Resonant
    }
}

#[derive(Debug, Clone)]
pub struct BonyDecomposition {
    pub para_lt: Field,
    pub resonant: Field,
    pub para_gt: Field,
}

impl BonyDecomposition {
    pub fn sum(&self) -> Field {
        self.para_lt.add(&self.resonant).and_then(|s| s.add(&self.para_gt)).expect("same grid")
    }
}

/// Samples on the `3n/2` grid of every block of `f` and of `g`. Both are real, so one
/// complex transform of `F_j + i G_j` yields the pair.
fn padded_blocks(bp: &BlockProjector, f: &Field, g: &Field) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    bp.check_grid(f)?;
    f.ensure_same_grid(g)?;
    let grid = f.grid();
    let fine = grid.quadratic_padded();
    let d = grid.dim();
    let to_fine: Vec<usize> = (0..grid.len()).map(|i| fine.flat_of_frequency(&grid.frequency(i)[..d]).expect("coarse band fits")).collect();
    let (mut fb, mut gb) = (Vec::new(), Vec::new());
    for j in bp.indices() {
        let mult = bp.multiplier(j).expect("index in range");
        let mut data = vec![Complex64::new(0.0, 0.0); fine.len()];
        for (i, ((&m, &a), &b)) in mult.iter().zip(f.coeffs()).zip(g.coeffs()).enumerate() {
            if m != 0.0 {
                data[to_fine[i]] = m * (a + Complex64::i() * b);
            }
        }
        fft::transform(&mut data, d, fine.n(), FftDirection::Inverse);
        fb.push(data.iter().map(|c| c.re).collect());
        gb.push(data.iter().map(|c| c.im).collect());
    }
    Ok((fb, gb))
}

/// Packing mixes roundoff between the two factors; a zero factor gives an exact zero.
fn is_zero(f: &Field) -> bool {
    f.coeffs().iter().all(|c| c.norm() == 0.0)
}

fn accumulate(
    f: &Field,
    g: &Field,
    bp: &BlockProjector,
    keep: impl Fn(PairClass) -> bool,
) -> Result<Field> {
    let (fb, gb) = padded_blocks(bp, f, g)?;
    if is_zero(f) || is_zero(g) {
        return Ok(Field::zeros(f.grid()));
    }
    let mut acc = vec![0.0; fb[0].len()];
    for (ia, xa) in fb.iter().enumerate() {
        for (ib, yb) in gb.iter().enumerate() {
            if !keep(classify(ia as i32 - 1, ib as i32 - 1)) {
                continue;
            }
            for ((s, x), y) in acc.iter_mut().zip(xa).zip(yb) {
                *s += x * y;
            }
        }
    }
    Field::project_from(f.grid(), f.grid().quadratic_padded(), &acc)
}

/// `f ⊘ g`.
pub fn para_lt(f: &Field, g: &Field) -> Result<Field> {
    accumulate(f, g, &BlockProjector::new(f.grid()), |c| c == PairClass::ParaLow)
}

/// `f ⊙ g`.
pub fn resonant(f: &Field, g: &Field) -> Result<Field> {
    accumulate(f, g, &BlockProjector::new(f.grid()), |c| c == PairClass::Resonant)
}

/// `f ⊗ g = g ⊘ f`.
pub fn para_gt(f: &Field, g: &Field) -> Result<Field> {
    para_lt(g, f)
}

pub fn bony_decompose(f: &Field, g: &Field) -> Result<BonyDecomposition> {
    bony_decompose_with(&BlockProjector::new(f.grid()), f, g)
}

/// All three parts with a caller-supplied projector (blocks computed once).
pub fn bony_decompose_with(bp: &BlockProjector, f: &Field, g: &Field) -> Result<BonyDecomposition> {
    let (fb, gb) = padded_blocks(bp, f, g)?;
    if is_zero(f) || is_zero(g) {
        let z = Field::zeros(f.grid());
        return Ok(BonyDecomposition { para_lt: z.clone(), resonant: z.clone(), para_gt: z });
    }
    let fine = f.grid().quadratic_padded();
    let len = fb[0].len();
    let mut parts = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    // Running sums of blocks `<= k - 2` turn the paraproducts into one pass each.
    let (mut low_f, mut low_g) = (vec![0.0; len], vec![0.0; len]);
    for k in 0..fb.len() {
        if k >= 2 {
            for ((lf, lg), (x, y)) in low_f.iter_mut().zip(low_g.iter_mut()).zip(fb[k - 2].iter().zip(&gb[k - 2])) {
                *lf += x;
                *lg += y;
            }
        }
        let [lt, res, gt] = &mut parts;
        for i in 0..len {
            lt[i] += low_f[i] * gb[k][i];
            gt[i] += fb[k][i] * low_g[i];
        }
        for b in k.saturating_sub(1)..(k + 2).min(gb.len()) {
            for ((s, x), y) in res.iter_mut().zip(&fb[k]).zip(&gb[b]) {
                *s += x * y;
            }
        }
    }
    let [lt, res, gt] = parts;
    Ok(BonyDecomposition {
        para_lt: Field::project_from(f.grid(), fine, &lt)?,
        resonant: Field::project_from(f.grid(), fine, &res)?,
        para_gt: Field::project_from(f.grid(), fine, &gt)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use std::collections::HashMap;
    use std::f64::consts::PI;

    /// Enumerate the pair sets exactly as the defining sums index them
    /// (`Delta_{n-1} f Delta_q g` for `q >= 1, 0 <= n <= q-1`; the resonant
    /// triple `Delta_{q-1} f (Delta_{max(q-2,-1)} g + Delta_{q-1} g + Delta_q g)`)
    /// and check they match the block-numbered classes.
    #[test]
    fn index_sets_partition_all_pairs() {
        let jmax = 9;
        let mut low = Vec::new();
        for q in 1..=jmax {
            for n in 0..q {
                low.push((n - 1, q));
            }
        }
        let mut res_multiset: HashMap<(i32, i32), usize> = HashMap::new();
        for q in 0..=jmax + 1 {
            for b in [(q - 2).max(-1), q - 1, q] {
                if b <= jmax && q - 1 <= jmax {
                    *res_multiset.entry((q - 1, b)).or_default() += 1;
                }
            }
        }
        // Verbatim, the bottom term lists Delta_{-1} g twice.
        assert_eq!(res_multiset[&(-1, -1)], 2);
        assert!(res_multiset.iter().all(|(&k, &v)| v == 1 || k == (-1, -1)));
        for a in -1..=jmax {
            for b in -1..=jmax {
                let in_low = low.contains(&(a, b));
                let in_high = low.contains(&(b, a));
                let in_res = res_multiset.contains_key(&(a, b));
                assert_eq!(in_low as u8 + in_high as u8 + in_res as u8, 1, "pair ({a},{b})");
                let expected = if in_low {
                    PairClass::ParaLow
                } else if in_high {
                    PairClass::ParaHigh
                } else {
                    PairClass::Resonant
                };
                assert_eq!(classify(a, b), expected);
            }
        }
    }

    #[test]
    fn constants() {
        let grid = TorusGrid::new(1, 64).unwrap();
        let one = Field::constant(grid, 1.0);
        let g = Field::from_fn(grid, |x| (2.0 * PI * x[0]).sin() + 0.3 * (2.0 * PI * 9.0 * x[0]).cos()).unwrap();
        let bp = BlockProjector::new(grid);
        // 1 ⊘ g = g - Delta_{-1} g - Delta_0 g
        let lhs = para_lt(&one, &g).unwrap();
        let rhs = g.sub(&bp.block(&g, -1).unwrap()).unwrap().sub(&bp.block(&g, 0).unwrap()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().sup_norm() < 1e-14);
        // f ⊘ 1 = 0
        assert!(para_lt(&g, &one).unwrap().sup_norm() < 1e-15);
        // 1 ⊙ 1 = 1
        let r = resonant(&one, &one).unwrap();
        assert!(r.relative_sup_distance(&one) < 1e-15);
        // c ⊙ g = c (Delta_{-1} g + Delta_0 g)
        let c = Field::constant(grid, 2.5);
        let lhs = resonant(&c, &g).unwrap();
        let rhs = bp.block(&g, -1).unwrap().add(&bp.block(&g, 0).unwrap()).unwrap().scale(2.5);
        assert!(lhs.sub(&rhs).unwrap().sup_norm() < 1e-14);
    }

    #[test]
    fn cosine_square_parts_sum() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let f = Field::from_fn(grid, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let parts = bony_decompose(&f, &f).unwrap();
        let expect = Field::from_fn(grid, |x| 0.5 + 0.5 * (4.0 * PI * x[0]).cos()).unwrap();
        assert!(parts.sum().relative_sup_distance(&expect) < 1e-14);
        let z = Field::zeros(grid);
        let p = bony_decompose(&f, &z).unwrap();
        assert_eq!(p.para_lt.sup_norm() + p.resonant.sup_norm() + p.para_gt.sup_norm(), 0.0);
    }

    #[test]
    fn separated_supports_have_no_resonance() {
        let grid = TorusGrid::new(1, 256).unwrap();
        let f = Field::from_fn(grid, |x| (2.0 * PI * 4.0 * x[0]).cos() + 0.5 * (2.0 * PI * 3.0 * x[0]).sin()).unwrap();
        let g = Field::from_fn(grid, |x| (2.0 * PI * 64.0 * x[0]).cos() - (2.0 * PI * 70.0 * x[0]).sin()).unwrap();
        assert!(resonant(&f, &g).unwrap().sup_norm() < 1e-12);
        assert!(para_gt(&f, &g).unwrap().sup_norm() < 1e-12);
    }
}
