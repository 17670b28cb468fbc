//! Convex QCQP over the complex unit ball:
//!
//! ```text
//! maximize   2 Re{t^H v} - v^H T v
//! subject to ||v||^2 <= 1
//!            v^H B v <= 2 Re{b^H v} - c0      (optional)
//! ```
//!
//! Solved on the Lagrange dual: for multipliers (l1, l2) the maximizer is
//! `v = (T + l1 I + l2 B)^{-1} (t + l2 b)`. `l1` is found by bisection on the
//! ball residual, `l2` by bisection on the (monotone) second residual.

use super::linalg::{check_hermitian, hermitian_eig, quad_form, CMat, CVec};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct QuadVsLin {
    pub b_mat: CMat,
    pub b_lin: CVec,
    pub c0: f64,
}

impl QuadVsLin {
    /// `v^H B v - 2 Re{b^H v} + c0`; feasible when `<= 0`.
    pub fn residual(&self, v: &CVec) -> f64 {
        quad_form(&self.b_mat, v) - 2.0 * self.b_lin.dotc(v).re + self.c0
    }
}

#[derive(Debug, Clone)]
pub struct ConvexQcqpProblem {
    pub t2: CMat,
    pub t_lin: CVec,
    pub quad_vs_lin: Option<QuadVsLin>,
}

impl ConvexQcqpProblem {
    pub fn objective(&self, v: &CVec) -> f64 {
        2.0 * self.t_lin.dotc(v).re - quad_form(&self.t2, v)
    }
}

#[derive(Debug, Clone)]
pub struct QcqpSolution {
    pub v: CVec,
    pub objective: f64,
    pub ball_multiplier: f64,
    pub quad_multiplier: f64,
}

const BISECTION_STEPS: usize = 200;

/// Maximizer over the ball of `2 Re{r^H v} - v^H M v` for PSD `M`.
fn ball_step(m: &CMat, r: &CVec) -> Result<(CVec, f64)> {
    let (vals, vecs) = hermitian_eig(m)?;
    let coef: CVec = vecs.adjoint() * r;
    let top = vals.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let floor = 1e-13 * top;
    let norm_sq = |l1: f64| -> f64 {
        (0..vals.len())
            .map(|i| {
                let d = vals[i].max(0.0) + l1;
                if d <= floor {
                    if coef[i].norm_sqr() > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    coef[i].norm_sqr() / (d * d)
                }
            })
            .sum()
    };
    let solve = |l1: f64| -> CVec {
        let scaled = CVec::from_fn(vals.len(), |i, _| {
            let d = vals[i].max(0.0) + l1;
            if d <= floor {
                coef[i] * 0.0
            } else {
                coef[i] / d
            }
        });
        &vecs * scaled
    };
    if norm_sq(0.0) <= 1.0 {
        return Ok((solve(0.0), 0.0));
    }
    let mut hi = r.norm().max(1.0);
    while norm_sq(hi) > 1.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if norm_sq(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok((solve(hi), hi))
}

pub fn solve_convex_qcqp(p: &ConvexQcqpProblem, tol: f64) -> Result<QcqpSolution> {
    let n = p.t_lin.len();
    if p.t2.nrows() != n {
        return Err(Error::Dimension {
            context: "QCQP quadratic cost",
            expected: n,
            got: p.t2.nrows(),
        });
    }
    check_hermitian(&p.t2)?;
    let finish = |v: CVec, l1: f64, l2: f64| QcqpSolution {
        objective: p.objective(&v),
        v,
        ball_multiplier: l1,
        quad_multiplier: l2,
    };
    let Some(c) = &p.quad_vs_lin else {
        let (v, l1) = ball_step(&p.t2, &p.t_lin)?;
        return Ok(finish(v, l1, 0.0));
    };
    check_hermitian(&c.b_mat)?;

    let at = |l2: f64| -> Result<(CVec, f64)> {
        let m = &p.t2 + c.b_mat.scale(l2);
        let r = &p.t_lin + c.b_lin.scale(l2);
        ball_step(&m, &r)
    };
    let (v0, l10) = at(0.0)?;
    if c.residual(&v0) <= 0.0 {
        return Ok(finish(v0, l10, 0.0));
    }
    let mut hi = 1.0;
    let mut found = None;
    for _ in 0..60 {
        let (v, l1) = at(hi)?;
        if c.residual(&v) <= 0.0 {
            found = Some((v, l1));
            break;
        }
        hi *= 2.0;
    }
    let Some(mut best) = found else {
        return Err(Error::Infeasible(
            "QCQP: no multiplier restores the quadratic-vs-linear constraint".into(),
        ));
    };
    let mut lo = 0.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let (v, l1) = at(mid)?;
        if c.residual(&v) <= 0.0 {
            hi = mid;
            best = (v, l1);
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1e-300) {
            break;
        }
    }
    let (v, l1) = best;
    let scale = 1.0 + c.b_mat.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if v.norm_squared() > 1.0 + tol || c.residual(&v) > tol * scale {
        return Err(Error::Infeasible("QCQP: final iterate violates constraints".into()));
    }
    Ok(finish(v, l1, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linalg::{c, cr};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_cost_unit_linear_term() {
        let t = CVec::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let p = ConvexQcqpProblem {
            t2: CMat::identity(2, 2),
            t_lin: t.clone(),
            quad_vs_lin: None,
        };
        let sol = solve_convex_qcqp(&p, 1e-8).unwrap();
        assert!((sol.v - t).norm() < 1e-12);
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_linear_term() {
        let p = ConvexQcqpProblem {
            t2: CMat::identity(3, 3),
            t_lin: CVec::zeros(3),
            quad_vs_lin: None,
        };
        let sol = solve_convex_qcqp(&p, 1e-8).unwrap();
        assert_eq!(sol.v.norm(), 0.0);
        assert_eq!(sol.objective, 0.0);
    }

    fn random_instance(rng: &mut ChaCha8Rng) -> ConvexQcqpProblem {
        let g = CMat::from_fn(2, 2, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let h = CMat::from_fn(2, 2, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let vt = CVec::from_vec(vec![c(0.3, 0.1), c(-0.2, 0.4)]);
        let b_mat = &h * h.adjoint();
        let p1 = 1.2 * quad_form(&b_mat, &vt) / vt.norm_squared() + 0.05;
        ConvexQcqpProblem {
            t2: CMat::identity(2, 2) + &g * g.adjoint(),
            t_lin: CVec::from_fn(2, |_, _| c(3.0 * rng.random::<f64>(), 3.0 * rng.random::<f64>())),
            quad_vs_lin: Some(QuadVsLin {
                b_lin: vt.scale(p1),
                c0: p1 * vt.norm_squared(),
                b_mat,
            }),
        }
    }

    fn grid_best(p: &ConvexQcqpProblem) -> f64 {
        // |v1| = r cos a, |v2| = r sin a, phases p1, p2
        let feasible = |v: &CVec| {
            v.norm_squared() <= 1.0 + 1e-12
                && p.quad_vs_lin.as_ref().is_none_or(|q| q.residual(v) <= 1e-12)
        };
        let mut best = f64::NEG_INFINITY;
        let mut centre = (0.5, 0.7, 0.0, 0.0);
        let mut widths = (0.5, 0.8, std::f64::consts::PI, std::f64::consts::PI);
        for _ in 0..7 {
            let steps = 16;
            let mut local = (f64::NEG_INFINITY, centre);
            for i in 0..=steps {
                for j in 0..=steps {
                    for k in 0..=steps {
                        for l in 0..=steps {
                            let f = |x: f64, c0: f64, w: f64| c0 - w + 2.0 * w * x / steps as f64;
                            let r = f(i as f64, centre.0, widths.0).clamp(0.0, 1.0);
                            let a = f(j as f64, centre.1, widths.1).clamp(0.0, std::f64::consts::FRAC_PI_2);
                            let p1 = f(k as f64, centre.2, widths.2);
                            let p2 = f(l as f64, centre.3, widths.3);
                            let v = CVec::from_vec(vec![
                                C64::from_polar(r * a.cos(), p1),
                                C64::from_polar(r * a.sin(), p2),
                            ]);
                            if feasible(&v) {
                                let o = p.objective(&v);
                                if o > local.0 {
                                    local = (o, (r, a, p1, p2));
                                }
                            }
                        }
                    }
                }
            }
            best = best.max(local.0);
            centre = local.1;
            widths = (widths.0 / 4.0, widths.1 / 4.0, widths.2 / 4.0, widths.3 / 4.0);
        }
        best
    }

    use crate::numerics::linalg::C64;

    #[test]
    fn matches_grid_on_two_dimensional_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let p = random_instance(&mut rng);
            let sol = solve_convex_qcqp(&p, 1e-8).unwrap();
            let grid = grid_best(&p);
            assert!(sol.objective >= grid - 1e-9, "{} < {}", sol.objective, grid);
            assert!((sol.objective - grid).abs() < 1e-3);
        }
    }

    #[test]
    fn multipliers_satisfy_stationarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_instance(&mut rng);
        let sol = solve_convex_qcqp(&p, 1e-8).unwrap();
        let q = p.quad_vs_lin.as_ref().unwrap();
        let lhs = (&p.t2 + CMat::identity(2, 2).scale(sol.ball_multiplier) + q.b_mat.scale(sol.quad_multiplier)) * &sol.v;
        let rhs = &p.t_lin + q.b_lin.scale(sol.quad_multiplier);
        assert!((lhs - rhs).norm() < 1e-6 * (1.0 + p.t_lin.norm()));
    }

    #[test]
    fn empty_feasible_set_is_reported() {
        // v^H v <= 2 Re{b^H v} - 10 has no solution in the unit ball
        let p = ConvexQcqpProblem {
            t2: CMat::identity(1, 1),
            t_lin: CVec::from_vec(vec![cr(1.0)]),
            quad_vs_lin: Some(QuadVsLin {
                b_mat: CMat::identity(1, 1),
                b_lin: CVec::from_vec(vec![cr(1.0)]),
                c0: 10.0,
            }),
        };
        assert!(matches!(solve_convex_qcqp(&p, 1e-8), Err(Error::Infeasible(_))));
    }
}
