//! Ratio of the lattice convolution of two power weights to its predicted decay.

use chx::harness::lemma2::lemma2_check;
use chx::Result;

fn main() -> Result<()> {
    for (d, alpha, beta) in [(1, 0.75, 0.75), (2, 1.5, 1.5)] {
        let r = lemma2_check(d, alpha, beta, 64)?;
        println!("d = {d}, alpha = {alpha}, beta = {beta}: ratio(0) {:.4}, max {:.4}, log-log slope {:.4}", r.ratio_at_zero, r.max_ratio, r.slope);
        for (q, ratio) in r.profile.iter().filter(|p| [1.0, 4.0, 16.0, 64.0].contains(&p.0)) {
            println!("  |q| = {q:>4}: {ratio:.4}");
        }
    }
    Ok(())
}
