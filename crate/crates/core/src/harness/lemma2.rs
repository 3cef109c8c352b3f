//! Numerical check of the discrete convolution bound
//! `sum_m (1+|q-m|^4)^{-alpha/4} (1+|m|^4)^{-beta/4} <= c (1+|q|^4)^{(d-alpha-beta)/4}`.
//!
//! The inner sum is exact over `|m| <= 4 Qmax` (one FFT convolution) and the
//! rest is replaced by the matching integral over `|x| > R`, evaluated by
//! Gauss-Legendre quadrature in polar coordinates aligned with `q`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::transform;
use crate::fit::linear_regression;

/// Largest convolution grid (`L^d` points) the check will allocate.
const MAX_POINTS: usize = 1 << 24;
const QUAD_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Report {
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub qmax: usize,
    /// Largest ratio over `|q| <= Qmax`: the empirical constant.
    pub max_ratio: f64,
    /// Least-squares slope of `log ratio` against `log(1 + |q|)` over all lattice `q`.
    pub slope: f64,
    pub ratio_at_zero: f64,
    /// `(|q|, ratio)` for each distinct radius, largest ratio at that radius.
    pub profile: Vec<(f64, f64)>,
}

fn weight(r: f64, s: f64) -> f64 {
    (1.0 + r.powi(4)).powf(-s / 4.0)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `int_{|x| > r0} (1+|q-x|^4)^{-alpha/4} (1+|x|^4)^{-beta/4} dx` with `|q| = qn`.
fn tail_integral(d: usize, qn: f64, alpha: f64, beta: f64, r0: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    // rho = r0 u^{-k} flattens the radial decay rho^{d-1-alpha-beta} to O(1) in u.
    let k = 1.0 / (alpha + beta - d as f64);
    let (nodes, weights) = rule;
    let mut total = 0.0;
    for (&xu, &wu) in nodes.iter().zip(weights) {
        let u = 0.5 * (xu + 1.0);
        let rho = r0 * u.powf(-k);
        let jac = 0.5 * wu * k * r0 * u.powf(-k - 1.0);
        let radial = rho.powi(d as i32 - 1) * weight(rho, beta);
        let angular = match d {
            1 => weight((qn - rho).abs(), alpha) + weight(qn + rho, alpha),
            _ => {
                let sphere = if d == 2 { 2.0 } else { 2.0 * PI };
                let mut acc = 0.0;
                for (&xt, &wt) in nodes.iter().zip(weights) {
                    let th = 0.5 * PI * (xt + 1.0);
                    let dist = (rho * rho + qn * qn - 2.0 * rho * qn * th.cos()).max(0.0).sqrt();
                    acc += 0.5 * PI * wt * th.sin().powi(d as i32 - 2) * weight(dist, alpha);
                }
                sphere * acc
            }
        };
        total += jac * radial * angular;
    }
    total
}

fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => PI,
        _ => 4.0 * PI / 3.0,
    }
}

/// Evaluate the ratio for every `|q| <= qmax`.
pub fn lemma2_check(d: usize, alpha: f64, beta: f64, qmax: usize) -> Result<Lemma2Report> {
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidInput(format!("dimension {d} outside 1..=3")));
    }
    let df = d as f64;
    if !(alpha.max(beta) < df) || !(alpha + beta > df) {
        return Err(Error::Hypothesis(format!(
            "need max(alpha, beta) < d and alpha + beta > d, got alpha = {alpha}, beta = {beta}, d = {d}"
        )));
    }
    if qmax < 16 {
        return Err(Error::InvalidInput(format!("Qmax must be at least 16, got {qmax}")));
    }
    let q = qmax as i64;
    let r = 4 * q;
    // `q - m` stays within 5 Qmax per axis, so a period above 10 Qmax has no wrap-around.
    let l = (10 * qmax + 1).next_power_of_two();
    if l.pow(d as u32) > MAX_POINTS {
        return Err(Error::InvalidInput(format!("convolution grid {l}^{d} too large; lower Qmax")));
    }
    let len = l.pow(d as u32);
    let wrap = |k: i64| k.rem_euclid(l as i64) as usize;
    let coords = |flat: usize| -> [i64; 3] {
        let mut c = [0i64; 3];
        let mut rest = flat;
        for a in (0..d).rev() {
            let v = (rest % l) as i64;
            c[a] = if v >= l as i64 / 2 { v - l as i64 } else { v };
            rest /= l;
        }
        c
    };
    let mut a = vec![Complex64::new(0.0, 0.0); len];
    let mut b = vec![Complex64::new(0.0, 0.0); len];
    let mut count = 0usize;
    for (i, (ai, bi)) in a.iter_mut().zip(b.iter_mut()).enumerate() {
        let c = coords(i);
        let n2: i64 = c[..d].iter().map(|v| v * v).sum();
        let norm = (n2 as f64).sqrt();
        if c[..d].iter().all(|v| v.abs() <= 5 * q) {
            *ai = Complex64::new(weight(norm, alpha), 0.0);
        }
        if n2 <= r * r {
            *bi = Complex64::new(weight(norm, beta), 0.0);
            count += 1;
        }
    }
    transform(&mut a, d, l, FftDirection::Forward);
    transform(&mut b, d, l, FftDirection::Forward);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    transform(&mut a, d, l, FftDirection::Inverse);
    let scale = 1.0 / len as f64;

    // Cut the integral where the lattice ball's volume ends.
    let r_eff = (count as f64 / unit_ball_volume(d)).powf(1.0 / df);
    let rule = gauss_legendre(QUAD_NODES);
    let mut tails: BTreeMap<i64, f64> = BTreeMap::new();
    let mut by_radius: BTreeMap<i64, f64> = BTreeMap::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut idx = [0i64; 3];
    let span = 2 * q + 1;
    for flat in 0..span.pow(d as u32) {
        let mut rest = flat;
        for v in idx[..d].iter_mut() {
            *v = rest % span - q;
            rest /= span;
        }
        let n2: i64 = idx[..d].iter().map(|v| v * v).sum();
        if n2 > q * q {
            continue;
        }
        let qn = (n2 as f64).sqrt();
        let tail = *tails.entry(n2).or_insert_with(|| tail_integral(d, qn, alpha, beta, r_eff, &rule));
        let mut at = 0usize;
        for &v in &idx[..d] {
            at = at * l + wrap(v);
        }
        let sum = a[at].re * scale + tail;
        let ratio = sum / weight(qn, alpha + beta - df);
        let e = by_radius.entry(n2).or_insert(0.0);
        *e = e.max(ratio);
        xs.push((1.0 + qn).ln());
        ys.push(ratio.ln());
    }
    let (slope, _, _) = linear_regression(&xs, &ys)?;
    let profile: Vec<(f64, f64)> = by_radius.iter().map(|(&n2, &v)| ((n2 as f64).sqrt(), v)).collect();
    let max_ratio = profile.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(Lemma2Report { d, alpha, beta, qmax, max_ratio, slope, ratio_at_zero: profile[0].1, profile })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct sum over `|m| <= big` plus the far-field tail `2 big^{1-s}/(s-1)`, `s = alpha + beta`.
    fn direct_1d(q: f64, alpha: f64, beta: f64) -> f64 {
        let big = 2_000_000i64;
        let s: f64 = (-big..=big).map(|m| weight((q - m as f64).abs(), alpha) * weight((m as f64).abs(), beta)).sum();
        let e = alpha + beta;
        (s + 2.0 * (big as f64).powf(1.0 - e) / (e - 1.0)) / weight(q, e - 1.0)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let int = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert!((int(0) - 2.0).abs() < 1e-14);
        assert!((int(14) - 2.0 / 15.0).abs() < 1e-14);
        assert!(int(7).abs() < 1e-14);
    }

    #[test]
    fn one_dimensional_ratios_match_direct_sums() {
        let r = lemma2_check(1, 0.75, 0.75, 64).unwrap();
        let at = |q: f64| r.profile.iter().find(|p| p.0 == q).unwrap().1;
        for q in [0.0, 16.0, 64.0] {
            let want = direct_1d(q, 0.75, 0.75);
            assert!((at(q) - want).abs() < 2e-3 * want, "q = {q}: {} vs {want}", at(q));
        }
        assert!((r.ratio_at_zero - at(0.0)).abs() == 0.0);
        assert!(r.max_ratio.is_finite());
    }

    #[test]
    fn two_dimensional_ratio_at_origin_matches_direct_sum() {
        let r = lemma2_check(2, 1.5, 1.5, 16).unwrap();
        let big = 3000i64;
        let mut s = 0.0;
        for i in -big..=big {
            for j in -big..=big {
                s += weight(((i * i + j * j) as f64).sqrt(), 3.0);
            }
        }
        // Far field of the square: 2 pi int_{R}^inf rho^{-2} d rho with the square's equivalent radius.
        let radius = big as f64 * (4.0 / PI).sqrt();
        s += 2.0 * PI / radius;
        assert!((r.ratio_at_zero - s).abs() < 2e-3 * s, "{} vs {s}", r.ratio_at_zero);
    }

    #[test]
    fn hypotheses_are_enforced() {
        assert!(matches!(lemma2_check(1, 1.0, 0.5, 32), Err(Error::Hypothesis(_))));
        assert!(matches!(lemma2_check(1, 0.4, 0.5, 32), Err(Error::Hypothesis(_))));
        assert!(matches!(lemma2_check(4, 3.0, 3.0, 32), Err(Error::InvalidInput(_))));
        assert!(matches!(lemma2_check(1, 0.75, 0.75, 8), Err(Error::InvalidInput(_))));
    }
}
