//! Small dense linear-matrix-inequality programs.
//!
//! [`solve_lmi_program`] minimizes a linear cost `c^T x` over real `x` subject
//! to a list of affine Hermitian LMIs `F_j(x) = F_j0 + sum_k x_k F_jk >= 0`,
//! using a log-det barrier and damped Newton centering.
//!
//! [`solve_lmi_qp`] layers a complex quadratic cost and a quadratic power
//! budget on top: both are lifted into Schur-form LMI blocks.

use nalgebra::{DMatrix, DVector};

use super::linalg::{
    c, check_hermitian, cholesky_pd, cr, hermitian_eig, hermitian_part, lambda_min, max_abs, quad_form, CMat, CVec,
};
use crate::error::{Error, Result};

/// `F(x) = base + sum_k x_k coeffs[k]`.
#[derive(Debug, Clone)]
pub struct AffineLmi {
    pub base: CMat,
    pub coeffs: Vec<CMat>,
}

impl AffineLmi {
    /// Extracts the affine form of `f` by evaluating it at the origin and at
    /// each unit vector. `f` must be affine.
    pub fn from_fn(nvars: usize, f: impl Fn(&[f64]) -> CMat) -> Self {
        let zero = vec![0.0; nvars];
        let base = hermitian_part(&f(&zero));
        let coeffs = (0..nvars)
            .map(|k| {
                let mut e = zero.clone();
                e[k] = 1.0;
                hermitian_part(&(f(&e) - &base))
            })
            .collect();
        Self { base, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    pub fn eval(&self, x: &[f64]) -> CMat {
        let mut m = self.base.clone();
        for (xk, fk) in x.iter().zip(&self.coeffs) {
            if *xk != 0.0 {
                m += fk.scale(*xk);
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct LmiProgram {
    pub cost: DVector<f64>,
    pub blocks: Vec<AffineLmi>,
}

#[derive(Debug, Clone)]
pub struct LmiSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Barrier duality-gap bound `m / t`.
    pub gap: f64,
    /// Infinity norm of the Lagrangian gradient at the implied dual point.
    pub kkt_residual: f64,
    pub newton_steps: usize,
}

pub const MAX_NEWTON_STEPS: usize = 500;
const STAGE_STEPS: usize = 60;
/// Newton decrement below which a barrier stage counts as centered.
const CENTERED: f64 = 1e-9;

fn logdet_pd(m: &CMat) -> Option<f64> {
    let ch = cholesky_pd(m)?;
    let l = ch.l_dirty();
    Some((0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

fn barrier_value(prog: &LmiProgram, t: f64, x: &DVector<f64>) -> Option<f64> {
    let mut acc = t * prog.cost.dot(x);
    for b in &prog.blocks {
        acc -= logdet_pd(&b.eval(x.as_slice()))?;
    }
    Some(acc)
}

/// Stationarity residual `max_k |c_k - sum_j Re tr(Z_j F_jk)|`, relative to
/// `1 + max|c|`, for the Newton-corrected dual estimate
/// `Z_j = (F_j^{-1} - F_j^{-1} dF_j F_j^{-1}) / t`. Returns `None` when the
/// estimate is not dual feasible.
fn stationarity(prog: &LmiProgram, t: f64, x: &DVector<f64>) -> Option<f64> {
    let nvars = prog.cost.len();
    let mut grad = prog.cost.scale(t);
    let mut hess = DMatrix::<f64>::zeros(nvars, nvars);
    let mut inverses = Vec::with_capacity(prog.blocks.len());
    for b in &prog.blocks {
        let finv = cholesky_pd(&b.eval(x.as_slice()))?.inverse();
        let g: Vec<CMat> = b.coeffs.iter().map(|fk| &finv * fk).collect();
        for k in 0..nvars {
            grad[k] -= g[k].trace().re;
            for l in 0..nvars {
                hess[(k, l)] += (&g[k] * &g[l]).trace().re;
            }
        }
        inverses.push(finv);
    }
    let step = hess.lu().solve(&(-&grad))?;
    let mut r = prog.cost.clone();
    for (b, finv) in prog.blocks.iter().zip(&inverses) {
        let df = b.coeffs.iter().zip(step.iter()).fold(CMat::zeros(b.dim(), b.dim()), |acc, (fk, dk)| acc + fk.scale(*dk));
        let z = (finv - finv * df * finv).unscale(t);
        if lambda_min(&hermitian_part(&z)).ok()? < -1e-12 * max_abs(&z) {
            return None;
        }
        for (k, fk) in b.coeffs.iter().enumerate() {
            r[k] -= (&z * fk).trace().re;
        }
    }
    Some(r.amax() / (1.0 + prog.cost.amax()))
}

/// Minimizes `cost^T x` subject to every block being positive semidefinite,
/// starting from a strictly feasible `x0`.
pub fn solve_lmi_program(prog: &LmiProgram, x0: DVector<f64>, tol: f64) -> Result<LmiSolution> {
    let nvars = prog.cost.len();
    if x0.len() != nvars {
        return Err(Error::Dimension {
            context: "LMI starting point",
            expected: nvars,
            got: x0.len(),
        });
    }
    for b in &prog.blocks {
        if b.coeffs.len() != nvars {
            return Err(Error::Dimension {
                context: "LMI block coefficients",
                expected: nvars,
                got: b.coeffs.len(),
            });
        }
    }
    if barrier_value(prog, 1.0, &x0).is_none() {
        return Err(Error::Infeasible("LMI starting point is not strictly feasible".into()));
    }
    let m: f64 = prog.blocks.iter().map(|b| b.dim() as f64).sum();
    let mut x = x0;
    let mut t = 1.0;
    let mu = 10.0;
    let mut steps = 0usize;
    let mut last_grad_norm = f64::INFINITY;

    loop {
        let stage_start = steps;
        loop {
            if steps >= MAX_NEWTON_STEPS || steps - stage_start >= STAGE_STEPS {
                break;
            }
            let mut grad = prog.cost.scale(t);
            let mut hess = DMatrix::<f64>::zeros(nvars, nvars);
            for b in &prog.blocks {
                let f = b.eval(x.as_slice());
                let finv = match cholesky_pd(&f) {
                    Some(ch) => ch.inverse(),
                    None => return Err(Error::Infeasible("lost LMI feasibility".into())),
                };
                let g: Vec<CMat> = b.coeffs.iter().map(|fk| &finv * fk).collect();
                for k in 0..nvars {
                    grad[k] -= g[k].trace().re;
                    for l in k..nvars {
                        let mut s = 0.0;
                        let gk = &g[k];
                        let gl = &g[l];
                        let d = gk.nrows();
                        for a in 0..d {
                            for bb in 0..d {
                                s += (gk[(a, bb)] * gl[(bb, a)]).re;
                            }
                        }
                        hess[(k, l)] += s;
                        if l != k {
                            hess[(l, k)] += s;
                        }
                    }
                }
            }
            last_grad_norm = grad.amax() / t;
            let reg = 1e-14 * (1.0 + hess.diagonal().amax());
            let step = match hess.clone().cholesky() {
                Some(ch) => -ch.solve(&grad),
                None => {
                    let mut h2 = hess.clone();
                    for i in 0..nvars {
                        h2[(i, i)] += reg;
                    }
                    match h2.cholesky() {
                        Some(ch) => -ch.solve(&grad),
                        None => break,
                    }
                }
            };
            let decrement = -grad.dot(&step);
            steps += 1;
            if !(decrement > 0.0) || decrement < 1e-13 {
                break;
            }
            let f0 = match barrier_value(prog, t, &x) {
                Some(v) => v,
                None => break,
            };
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-12 {
                let cand = &x + &step * alpha;
                if let Some(f1) = barrier_value(prog, t, &cand) {
                    if f1 <= f0 - 0.25 * alpha * decrement {
                        x = cand;
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
        let gap = m / t;
        if gap <= tol {
            return Ok(LmiSolution {
                objective: prog.cost.dot(&x),
                kkt_residual: stationarity(prog, t, &x).unwrap_or(last_grad_norm),
                x,
                gap,
                newton_steps: steps,
            });
        }
        if steps >= MAX_NEWTON_STEPS {
            return Err(Error::IterationCap {
                solver: "solve_lmi_program",
                iterations: steps,
                gap,
                best_objective: prog.cost.dot(&x),
            });
        }
        t *= mu;
    }
}

/// Affine Hermitian matrix builder in `(psi, gamma)`.
pub type LmiBuilder = Box<dyn Fn(&CVec, f64) -> CMat + Send + Sync>;

/// ```text
/// minimize   psi^H Q psi - 2 Re{q^H psi} + c_gamma * gamma
/// subject to lmi(psi, gamma) >= 0,  psi^H D psi <= p_max
/// ```
pub struct LmiQpProblem {
    pub q_mat: CMat,
    pub q_lin: CVec,
    pub gamma_cost: f64,
    pub lmi: LmiBuilder,
    pub power: (CMat, f64),
    /// Optional starting `psi`; shrunk toward zero if not strictly inside the
    /// power budget.
    pub start: Option<CVec>,
}

#[derive(Debug, Clone)]
pub struct LmiQpSolution {
    pub psi: CVec,
    pub gamma: f64,
    pub objective: f64,
    pub kkt_residual: f64,
    pub gap: f64,
    pub newton_steps: usize,
}

impl LmiQpProblem {
    pub fn quadratic_cost(&self, psi: &CVec) -> f64 {
        quad_form(&self.q_mat, psi) - 2.0 * self.q_lin.dotc(psi).re
    }

    pub fn objective(&self, psi: &CVec, gamma: f64) -> f64 {
        self.quadratic_cost(psi) + self.gamma_cost * gamma
    }

    pub fn power(&self, psi: &CVec) -> f64 {
        quad_form(&self.power.0, psi)
    }
}

/// Rows `R` with `R^H R = A` for a PSD `A` (zero rows dropped).
fn psd_factor(a: &CMat) -> Result<CMat> {
    let (vals, vecs) = hermitian_eig(a)?;
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-14 * top.max(f64::MIN_POSITIVE)).collect();
    let n = a.nrows();
    let mut r = CMat::zeros(keep.len(), n);
    for (row, &i) in keep.iter().enumerate() {
        let s = vals[i].sqrt();
        for j in 0..n {
            r[(row, j)] = vecs[(j, i)].conj() * s;
        }
    }
    Ok(r)
}

fn psi_from(x: &[f64], k: usize) -> CVec {
    CVec::from_fn(k, |i, _| c(x[i], x[k + i]))
}

pub fn solve_lmi_qp(p: &LmiQpProblem, tol: f64) -> Result<LmiQpSolution> {
    let (d_mat, p_max) = (&p.power.0, p.power.1);
    if !(p_max >= 0.0) {
        return Err(Error::Infeasible(format!("power budget {p_max} is negative")));
    }
    check_hermitian(&p.q_mat)?;
    check_hermitian(d_mat)?;
    let k_dim = p.q_lin.len();
    // a zero budget pins psi at the origin
    let k = if p_max > 0.0 { k_dim } else { 0 };
    let nvars = 2 * k + 2;
    let ig = 2 * k;
    let is = 2 * k + 1;

    let full_psi = |x: &[f64]| -> CVec {
        if k == 0 {
            CVec::zeros(k_dim)
        } else {
            psi_from(x, k)
        }
    };

    let mut blocks = Vec::new();
    blocks.push(AffineLmi::from_fn(nvars, |x| (p.lmi)(&full_psi(x), x[ig])));

    let r_q = psd_factor(&p.q_mat)?;
    let rq = r_q.nrows();
    blocks.push(AffineLmi::from_fn(nvars, |x| {
        let psi = full_psi(x);
        let mut m = CMat::identity(rq + 1, rq + 1);
        let col = &r_q * &psi;
        for i in 0..rq {
            m[(i, rq)] = col[i];
            m[(rq, i)] = col[i].conj();
        }
        m[(rq, rq)] = cr(x[is] + 2.0 * p.q_lin.dotc(&psi).re);
        m
    }));

    if k > 0 {
        let r_d = psd_factor(d_mat)?;
        let rd = r_d.nrows();
        blocks.push(AffineLmi::from_fn(nvars, |x| {
            let psi = full_psi(x);
            let mut m = CMat::identity(rd + 1, rd + 1);
            let col = &r_d * &psi;
            for i in 0..rd {
                m[(i, rd)] = col[i];
                m[(rd, i)] = col[i].conj();
            }
            m[(rd, rd)] = cr(p_max);
            m
        }));
    }

    let mut cost = DVector::zeros(nvars);
    cost[ig] = p.gamma_cost;
    cost[is] = 1.0;
    let prog = LmiProgram { cost, blocks };

    // strictly feasible start
    let mut psi0 = match (&p.start, k) {
        (_, 0) => CVec::zeros(k_dim),
        (Some(s), _) => s.clone(),
        (None, _) => CVec::zeros(k_dim),
    };
    let pw = p.power(&psi0);
    if k > 0 && pw > 0.999 * p_max {
        psi0 *= c((0.999 * p_max / pw).sqrt(), 0.0);
    }
    let mut gamma0 = 1.0;
    let mut found = false;
    for _ in 0..400 {
        if cholesky_pd(&(p.lmi)(&psi0, gamma0)).is_some() {
            found = true;
            break;
        }
        gamma0 *= 2.0;
    }
    if !found && k > 0 {
        psi0 = CVec::zeros(k_dim);
        gamma0 = 1.0;
        for _ in 0..400 {
            if cholesky_pd(&(p.lmi)(&psi0, gamma0)).is_some() {
                found = true;
                break;
            }
            gamma0 *= 2.0;
        }
    }
    if !found {
        return Err(Error::Infeasible("no strictly feasible (psi, gamma) found".into()));
    }
    let mut x0 = DVector::zeros(nvars);
    for i in 0..k {
        x0[i] = psi0[i].re;
        x0[k + i] = psi0[i].im;
    }
    x0[ig] = gamma0;
    x0[is] = p.quadratic_cost(&psi0) + 1.0;

    let sol = solve_lmi_program(&prog, x0, tol)?;
    let psi = full_psi(sol.x.as_slice());
    let gamma = sol.x[ig];
    Ok(LmiQpSolution {
        objective: p.objective(&psi, gamma),
        psi,
        gamma,
        kkt_residual: sol.kkt_residual,
        gap: sol.gap,
        newton_steps: sol.newton_steps,
    })
}
