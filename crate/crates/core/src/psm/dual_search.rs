//! One-dimensional dual search for the diagonal power-constrained QP
//! `max -psi^H Q psi + 2 Re{q^H psi}  s.t.  psi^H D psi <= P`.

use crate::error::{Error, Result};
use crate::numerics::CVec;
use nalgebra::DVector;

const MAX_DOUBLINGS: usize = 60;
const COARSE: f64 = 1e-6;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// `psi(mu) = (Q + mu D)^{-1} q` for diagonal `Q`, `D`.
pub fn psi_at(q: &CVec, q_diag: &DVector<f64>, d_diag: &DVector<f64>, mu: f64) -> CVec {
    CVec::from_fn(q.len(), |i, _| q[i] / (q_diag[i] + mu * d_diag[i]))
}

pub fn power_at(q: &CVec, q_diag: &DVector<f64>, d_diag: &DVector<f64>, mu: f64) -> f64 {
    (0..q.len())
        .map(|i| d_diag[i] * q[i].norm_sqr() / (q_diag[i] + mu * d_diag[i]).powi(2))
        .sum()
}

/// Dual function `G(mu) = -q^H (Q + mu D)^{-1} q - mu P`, concave in `mu`.
pub fn dual_value(q: &CVec, q_diag: &DVector<f64>, d_diag: &DVector<f64>, p: f64, mu: f64) -> f64 {
    let s: f64 = (0..q.len()).map(|i| q[i].norm_sqr() / (q_diag[i] + mu * d_diag[i])).sum();
    -s - mu * p
}

/// Multiplier of the power constraint. Requires that the unconstrained
/// maximizer `Q^{-1} q` violates the budget.
pub fn dual_search(q: &CVec, q_diag: &DVector<f64>, d_diag: &DVector<f64>, p: f64, tol: f64) -> Result<f64> {
    if q.len() != q_diag.len() || q.len() != d_diag.len() {
        return Err(Error::Dimension {
            context: "dual search diagonals",
            expected: q.len(),
            got: q_diag.len().min(d_diag.len()),
        });
    }
    if q_diag.iter().chain(d_diag.iter()).any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument("Q and D must be positive definite".into()));
    }
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("power budget {p} must be positive")));
    }
    if power_at(q, q_diag, d_diag, 0.0) <= p {
        return Err(Error::InvalidArgument("unconstrained maximizer already meets the budget".into()));
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while power_at(q, q_diag, d_diag, hi) > p {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::Infeasible(format!("dual bracket did not close after {MAX_DOUBLINGS} doublings")));
        }
        hi *= 2.0;
    }
    // golden-section on the concave dual to a coarse bracket, then bisection
    // on its derivative `power(mu) - P` (G is too flat near the top for
    // comparisons of G alone to resolve mu below ~1e-8)
    let g = |mu: f64| dual_value(q, q_diag, d_diag, p, mu);
    let (mut a, mut b) = (0.0_f64, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut g1, mut g2) = (g(x1), g(x2));
    while b - a > COARSE * b.max(1.0) {
        if g1 < g2 {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + INV_PHI * (b - a);
            g2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - INV_PHI * (b - a);
            g1 = g(x1);
        }
    }
    let over = |mu: f64| power_at(q, q_diag, d_diag, mu) > p;
    let (mut lo, mut up) = ((a - (b - a)).max(0.0), (b + (b - a)).min(hi));
    if !over(lo) {
        lo = 0.0;
    }
    if over(up) {
        up = hi;
    }
    while up - lo > tol * up.max(1.0) {
        let mid = 0.5 * (lo + up);
        if over(mid) {
            lo = mid;
        } else {
            up = mid;
        }
    }
    // the upper end keeps the budget
    let mu = up;
    debug_assert!(g(mu) >= g(0.0).min(g(hi)) - 1e-9 * g(mu).abs().max(1.0));
    Ok(mu)
}
