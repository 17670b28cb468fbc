//! Surrogate bounds used by the phase-shift steps.

use crate::error::{Error, Result};
use crate::numerics::linalg::{cholesky_pd, hpd_inverse, quad_form};
use crate::numerics::{CMat, CVec, C64};

/// `ln tr(L W~) + tr(L (W - W~)) / tr(L W~)`, an upper bound on `ln tr(L W)`.
pub fn log_trace_upper(l: &CMat, w: &CMat, w_anchor: &CMat) -> Result<f64> {
    let anchor = (l * w_anchor).trace().re;
    if !(anchor > 0.0) {
        return Err(Error::LogDomain { value: anchor });
    }
    let now = (l * w).trace().re;
    Ok(anchor.ln() + (now - anchor) / anchor)
}

/// Lower bound on `ln(1 + |a|^2 / b)` tight at `(a~, b~)`:
/// `ln(1 + |a~|^2/b~) - |a~|^2/b~ + 2 Re{a~* a}/b~ - c (|a|^2 + b)`.
pub fn ab_lower(a: C64, b: f64, a_anchor: C64, b_anchor: f64) -> f64 {
    let r = a_anchor.norm_sqr();
    let c = ab_curvature(a_anchor, b_anchor);
    (1.0 + r / b_anchor).ln() - r / b_anchor + 2.0 * (a_anchor.conj() * a).re / b_anchor - c * (a.norm_sqr() + b)
}

/// `c = |a~|^2 / (b~ (b~ + |a~|^2))`.
pub fn ab_curvature(a_anchor: C64, b_anchor: f64) -> f64 {
    let r = a_anchor.norm_sqr();
    r / (b_anchor * (b_anchor + r))
}

pub fn ln_det_hpd(a: &CMat) -> Result<f64> {
    let ch = cholesky_pd(a).ok_or(Error::NotPositiveDefinite {
        min_eig: f64::NAN,
        max_eig: f64::NAN,
    })?;
    Ok(ch.l_dirty().diagonal().iter().take(a.nrows()).map(|z| 2.0 * z.re.ln()).sum())
}

/// `ln|S~| + tr(S~^{-1} (S - S~))`, an upper bound on `ln|S|`.
pub fn log_det_upper(s: &CMat, s_anchor: &CMat) -> Result<f64> {
    let inv = hpd_inverse(s_anchor)?;
    Ok(ln_det_hpd(s_anchor)? + (inv * (s - s_anchor)).trace().re)
}

/// Minorant of `-theta^H Q1 theta` obtained by replacing `Q1` with
/// `lambda I`, tight at `theta~` when `lambda >= lambda_max(Q1)`.
pub fn lambda_max_lower(q1: &CMat, lambda: f64, theta: &CVec, theta_anchor: &CVec) -> f64 {
    let n = q1.nrows();
    let gap = CMat::identity(n, n).scale(lambda) - q1;
    -lambda * theta.norm_squared() + 2.0 * theta_anchor.dotc(&(&gap * theta)).re - quad_form(&gap, theta_anchor)
}

/// `[[X, u], [u^H, gamma]]`.
pub fn schur_block(x: &CMat, u: &CVec, gamma: f64) -> CMat {
    let n = x.nrows();
    let mut e = CMat::zeros(n + 1, n + 1);
    e.view_mut((0, 0), (n, n)).copy_from(x);
    e.view_mut((0, n), (n, 1)).copy_from(u);
    e.view_mut((n, 0), (1, n)).copy_from(&u.adjoint());
    e[(n, n)] = C64::new(gamma, 0.0);
    e
}
