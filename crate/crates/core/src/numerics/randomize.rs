//! Gaussian randomization for rounding a lifted unit-diagonal PSD matrix to a
//! unit-modulus vector.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::linalg::{c, hermitian_eig, CMat, CVec, C64};
use crate::error::{Error, Result};

/// Draws `trials` candidates `xi = U Lambda^{1/2} r`, `r ~ CN(0, I)`,
/// de-homogenizes by the last coordinate and projects each entry to the unit
/// circle. Returns the best-scoring candidate (length `n - 1`) and its score.
pub fn gaussian_randomize<F>(w: &CMat, trials: usize, mut score: F, seed: u64) -> Result<(CVec, f64)>
where
    F: FnMut(&CVec) -> f64,
{
    if trials == 0 {
        return Err(Error::InvalidArgument("randomization needs at least one trial".into()));
    }
    let n = w.nrows();
    if n < 2 {
        return Err(Error::Dimension {
            context: "lifted matrix",
            expected: 2,
            got: n,
        });
    }
    let (vals, vecs) = hermitian_eig(w)?;
    let mut shape = vecs;
    for j in 0..n {
        let s = if vals[j] > 1e-12 * vals[0].max(0.0) { vals[j].sqrt() } else { 0.0 };
        for i in 0..n {
            shape[(i, j)] *= s;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut best: Option<(CVec, f64)> = None;
    for _ in 0..trials {
        let r = CVec::from_fn(n, |_, _| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            c(a * half, b * half)
        });
        let xi = &shape * r;
        let anchor = xi[n - 1];
        let phi = CVec::from_fn(n - 1, |i, _| {
            let z = xi[i] * anchor.conj();
            if z.norm() > 0.0 {
                C64::from_polar(1.0, z.arg())
            } else {
                c(1.0, 0.0)
            }
        });
        let s = score(&phi);
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((phi, s));
        }
    }
    Ok(best.expect("trials > 0"))
}
