//! Unit-diagonal SDP with a logarithmic objective term:
//!
//! ```text
//! maximize   ln tr[C_log W] - sum_i w_i tr[C_i W]
//! subject to W >= 0,  W(i,i) = 1
//! ```
//!
//! Solved through its Lagrange dual
//!
//! ```text
//! minimize   sum(y) - ln(tau) - 1
//! subject to Diag(y) + C - tau * C_log >= 0,  tau > 0
//! ```
//!
//! which has only n + 1 real variables, with a log-barrier path-following
//! Newton method. On the central path `W = S^{-1} / t` has unit diagonal and
//! the duality gap is exactly `n / t`.

use nalgebra::{DMatrix, DVector};

use super::linalg::{check_hermitian, cholesky_pd, cr, hermitian_part, lambda_min, CMat};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DiagSdpLogProblem {
    pub c_log: CMat,
    pub c_lin: Vec<(CMat, f64)>,
}

#[derive(Debug, Clone)]
pub struct SdpLogSolution {
    pub w: CMat,
    pub objective: f64,
    /// Certified gap between the dual bound and `objective`.
    pub gap: f64,
    pub newton_steps: usize,
}

pub const MAX_NEWTON_STEPS: usize = 500;
const STAGE_STEPS: usize = 60;
/// Newton decrement below which a barrier stage counts as centered.
const CENTERED: f64 = 1e-9;

impl DiagSdpLogProblem {
    pub fn dim(&self) -> usize {
        self.c_log.nrows()
    }

    fn combined_linear(&self) -> CMat {
        let n = self.dim();
        self.c_lin
            .iter()
            .fold(CMat::zeros(n, n), |acc, (m, w)| acc + m.scale(*w))
    }

    pub fn objective(&self, w: &CMat) -> Result<f64> {
        let arg = (self.c_log.clone() * w).trace().re;
        if arg <= 0.0 {
            return Err(Error::LogDomain { value: arg });
        }
        Ok(arg.ln() - (self.combined_linear() * w).trace().re)
    }
}

struct DualPoint {
    y: DVector<f64>,
    tau: f64,
}

/// Barrier value, with `None` when the point leaves the dual cone.
fn barrier(t: f64, p: &DualPoint, c: &CMat, a: &CMat) -> Option<f64> {
    if p.tau <= 0.0 {
        return None;
    }
    let s = slack(p, c, a);
    let chol = cholesky_pd(&s)?;
    let logdet: f64 = (0..chol.l_dirty().nrows())
        .map(|i| 2.0 * chol.l_dirty()[(i, i)].re.ln())
        .sum();
    Some(t * (p.y.sum() - p.tau.ln()) - logdet)
}

fn slack(p: &DualPoint, c: &CMat, a: &CMat) -> CMat {
    let mut s = c - a.scale(p.tau);
    for i in 0..s.nrows() {
        s[(i, i)] += cr(p.y[i]);
    }
    hermitian_part(&s)
}

/// Primal iterate recovered from the dual slack and rescaled to unit diagonal.
fn primal_from_slack(s_inv: &CMat) -> CMat {
    let n = s_inv.nrows();
    let d: Vec<f64> = (0..n).map(|i| s_inv[(i, i)].re.max(f64::MIN_POSITIVE).sqrt()).collect();
    let mut w = CMat::from_fn(n, n, |i, j| s_inv[(i, j)] / (d[i] * d[j]));
    for i in 0..n {
        w[(i, i)] = cr(1.0);
    }
    hermitian_part(&w)
}

pub fn solve_diag_sdp_log(p: &DiagSdpLogProblem, tol: f64) -> Result<SdpLogSolution> {
    let n = p.dim();
    check_hermitian(&p.c_log)?;
    for (m, _) in &p.c_lin {
        check_hermitian(m)?;
        if m.nrows() != n {
            return Err(Error::Dimension {
                context: "linear term",
                expected: n,
                got: m.nrows(),
            });
        }
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty SDP".into()));
    }
    let scale = p.c_log.trace().re;
    if scale <= 0.0 {
        return Err(Error::LogDomain { value: scale });
    }
    let a = hermitian_part(&p.c_log).unscale(scale);
    let c = hermitian_part(&p.combined_linear());

    let tau0 = 1.0;
    let shift = (-lambda_min(&(&c - a.scale(tau0)))?).max(0.0) + 1.0;
    let mut pt = DualPoint {
        y: DVector::from_element(n, shift),
        tau: tau0,
    };

    let nf = n as f64;
    let mut t = nf.max(1.0);
    let mu = 8.0;
    let mut steps = 0usize;
    let mut best: Option<SdpLogSolution> = None;

    loop {
        // centering
        let stage_start = steps;
        loop {
            if steps >= MAX_NEWTON_STEPS || steps - stage_start >= STAGE_STEPS {
                break;
            }
            let s = slack(&pt, &c, &a);
            let s_inv = match cholesky_pd(&s) {
                Some(ch) => ch.inverse(),
                None => break,
            };
            let sas = &s_inv * &a * &s_inv;
            let mut grad = DVector::zeros(n + 1);
            let mut hess = DMatrix::zeros(n + 1, n + 1);
            for i in 0..n {
                grad[i] = t - s_inv[(i, i)].re;
                for j in 0..n {
                    hess[(i, j)] = s_inv[(i, j)].norm_sqr();
                }
                hess[(i, n)] = -sas[(i, i)].re;
                hess[(n, i)] = -sas[(i, i)].re;
            }
            grad[n] = -t / pt.tau + (&s_inv * &a).trace().re;
            hess[(n, n)] = t / (pt.tau * pt.tau) + (&sas * &a).trace().re;

            let step = match hess.clone().cholesky() {
                Some(ch) => -ch.solve(&grad),
                None => match hess.clone().lu().solve(&(-&grad)) {
                    Some(s) => s,
                    None => break,
                },
            };
            let decrement = -grad.dot(&step);
            steps += 1;
            if !(decrement > 0.0) || decrement < 1e-14 {
                break;
            }
            let f0 = match barrier(t, &pt, &c, &a) {
                Some(v) => v,
                None => break,
            };
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-12 {
                let cand = DualPoint {
                    y: &pt.y + step.rows(0, n) * alpha,
                    tau: pt.tau + alpha * step[n],
                };
                if let Some(f1) = barrier(t, &cand, &c, &a) {
                    if f1 <= f0 - 0.25 * alpha * decrement {
                        pt = cand;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved || decrement < CENTERED {
                break;
            }
        }

        // certify the current iterate
        let s = slack(&pt, &c, &a);
        if let Some(ch) = cholesky_pd(&s) {
            let w = primal_from_slack(&ch.inverse());
            let arg = (&a * &w).trace().re;
            if arg > 0.0 {
                let primal = arg.ln() - (&c * &w).trace().re;
                let dual = pt.y.sum() - pt.tau.ln() - 1.0;
                let gap = (dual - primal).max(0.0);
                let candidate = SdpLogSolution {
                    w,
                    objective: primal + scale.ln(),
                    gap,
                    newton_steps: steps,
                };
                if best.as_ref().is_none_or(|b| candidate.gap < b.gap) {
                    best = Some(candidate);
                }
            }
        }
        let done = best.as_ref().is_some_and(|b| b.gap <= tol) && nf / t <= tol;
        if done {
            break;
        }
        if steps >= MAX_NEWTON_STEPS || t > 1e15 {
            break;
        }
        t *= mu;
    }

    match best {
        Some(b) if b.gap <= tol => Ok(b),
        Some(b) => Err(Error::IterationCap {
            solver: "solve_diag_sdp_log",
            iterations: steps,
            gap: b.gap,
            best_objective: b.objective,
        }),
        None => Err(Error::IterationCap {
            solver: "solve_diag_sdp_log",
            iterations: steps,
            gap: f64::INFINITY,
            best_objective: f64::NAN,
        }),
    }
}
