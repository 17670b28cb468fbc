//! Separate optimization: passive phases by SDR + MM + Gaussian
//! randomization, then active amplitudes by a slack-variable LMI program.

use log::debug;

use super::{PsmSettings, StepOutcome};
use crate::error::{Error, Result};
use crate::numerics::linalg::{hermitian_eig, hermitian_part, hpd_inverse, quad_form};
use crate::numerics::{
    cr, gaussian_randomize, solve_diag_sdp_log, solve_lmi_qp, CMat, CVec, DiagSdpLogProblem, LmiQpProblem, C64,
};
use crate::system::ThetaLinearization;

/// Lifted matrices for the passive step with `psi` fixed. The lifted
/// variable is `x = [phi_p; 1]` over the passive indices `p`.
#[derive(Debug, Clone)]
pub struct PassiveSdrState {
    pub l_m: CMat,
    pub l_a: CMat,
    pub l_e: CMat,
    pub passive: Vec<usize>,
    /// Current `theta`; passive entries are overwritten by `unlift`.
    pub theta: CVec,
}

fn take_cols(a: &CMat, idx: &[usize]) -> CMat {
    CMat::from_fn(a.nrows(), idx.len(), |r, j| a[(r, idx[j])])
}

fn active_part(a: &CMat, theta: &CVec, active: &[usize]) -> CVec {
    let mut acc = CVec::zeros(a.nrows());
    for &i in active {
        acc += a.column(i) * theta[i];
    }
    acc
}

/// `[A, b]` as a single matrix.
fn append_col(a: &CMat, b: &CVec) -> CMat {
    let mut out = CMat::zeros(a.nrows(), a.ncols() + 1);
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.set_column(a.ncols(), b);
    out
}

pub fn build_passive_sdr(lin: &ThetaLinearization, theta: &CVec) -> Result<PassiveSdrState> {
    let m = theta.len();
    let passive: Vec<usize> = (0..m).filter(|i| !lin.active.contains(i)).collect();
    let n = passive.len();

    // Bob's amplitude t_p^H phi_p + l~, written as c_A^H x
    let l_tilde = lin.l_ab + lin.active.iter().map(|&i| lin.t_aib[i].conj() * theta[i]).sum::<C64>();
    let mut c_a = CVec::zeros(n + 1);
    for (j, &i) in passive.iter().enumerate() {
        c_a[j] = lin.t_aib[i];
    }
    c_a[n] = l_tilde.conj();
    let l_a = &c_a * c_a.adjoint();

    let pm_conj = lin.p_mib.map(|z| z.conj());
    let g_tail = active_part(&pm_conj, theta, &lin.active) + lin.t_mb.map(|z| z.conj());
    let g = append_col(&take_cols(&pm_conj, &passive), &g_tail);
    let sigma_tilde: f64 = lin.active.iter().map(|&i| lin.p_ib[i].norm_sqr() * theta[i].norm_sqr()).sum::<f64>()
        + lin.sigma_b2;
    let mut l_m = g.adjoint() * &g;
    l_m[(n, n)] += cr(sigma_tilde);

    let h_tail = active_part(&lin.p_aim, theta, &lin.active) + &lin.t_am;
    let h = append_col(&take_cols(&lin.p_aim, &passive), &h_tail);
    let r_inv = hpd_inverse(&lin.mallory_interference(theta))?;
    let mut l_e = h.adjoint() * r_inv * &h;
    l_e[(n, n)] += cr(1.0);

    Ok(PassiveSdrState {
        l_m: hermitian_part(&l_m),
        l_a: hermitian_part(&l_a),
        l_e: hermitian_part(&l_e),
        passive,
        theta: theta.clone(),
    })
}

impl PassiveSdrState {
    pub fn dim(&self) -> usize {
        self.passive.len() + 1
    }

    pub fn lift(&self, theta: &CVec) -> CVec {
        let n = self.passive.len();
        CVec::from_fn(n + 1, |j, _| if j < n { theta[self.passive[j]] } else { cr(1.0) })
    }

    pub fn unlift(&self, phi: &CVec) -> CVec {
        let mut theta = self.theta.clone();
        for (j, &i) in self.passive.iter().enumerate() {
            theta[i] = phi[j];
        }
        theta
    }

    /// `g1(W) = ln tr((L_M + L_A) W) - ln tr(L_M W) - ln tr(L_E W)`.
    pub fn g1(&self, w: &CMat) -> Result<f64> {
        let tm = (&self.l_m * w).trace().re;
        let ta = (&self.l_a * w).trace().re;
        let te = (&self.l_e * w).trace().re;
        if !(tm > 0.0) {
            return Err(Error::LogDomain { value: tm });
        }
        if !(te > 0.0) {
            return Err(Error::LogDomain { value: te });
        }
        Ok((tm + ta).ln() - tm.ln() - te.ln())
    }

    /// MM surrogate of `g1` anchored at `w_anchor`.
    pub fn surrogate(&self, w: &CMat, w_anchor: &CMat) -> Result<f64> {
        let tm = (&self.l_m * w_anchor).trace().re;
        let te = (&self.l_e * w_anchor).trace().re;
        let c_sum = &self.l_m + &self.l_a;
        let top = (&c_sum * w).trace().re;
        if !(top > 0.0) {
            return Err(Error::LogDomain { value: top });
        }
        Ok(top.ln() - tm.ln() - (&self.l_m * w).trace().re / tm + 1.0 - te.ln() - (&self.l_e * w).trace().re / te + 1.0)
    }
}

/// Passive step with the active amplitudes held fixed.
pub fn sop_passive_step(lin: &ThetaLinearization, theta_init: &CVec, set: &PsmSettings) -> Result<StepOutcome> {
    let state = build_passive_sdr(lin, theta_init)?;
    let before = lin.objective(theta_init)?;
    if state.passive.is_empty() {
        return Ok(StepOutcome {
            theta: theta_init.clone(),
            accepted: false,
            objective_before: before,
            objective_after: before,
            surrogate_trace: vec![],
        });
    }
    let c_sum = &state.l_m + &state.l_a;
    let c_scale = c_sum.norm().max(f64::MIN_POSITIVE);
    let x0 = state.lift(theta_init);
    let mut w_anchor = &x0 * x0.adjoint();
    let mut g_prev = state.g1(&w_anchor)?;
    let mut trace = vec![g_prev];
    for _ in 0..set.inner_cap {
        let tm = (&state.l_m * &w_anchor).trace().re;
        let te = (&state.l_e * &w_anchor).trace().re;
        let prob = DiagSdpLogProblem {
            c_log: c_sum.unscale(c_scale),
            c_lin: vec![(state.l_m.clone(), 1.0 / tm), (state.l_e.clone(), 1.0 / te)],
        };
        let sol = solve_diag_sdp_log(&prob, set.tol)?;
        let g = state.g1(&sol.w)?;
        trace.push(g);
        if g < g_prev {
            // solver slack only; keep the anchor
            break;
        }
        w_anchor = sol.w;
        let gain = g - g_prev;
        g_prev = g;
        if gain < set.eps {
            break;
        }
    }
    let score = |phi: &CVec| lin.objective(&state.unlift(phi)).unwrap_or(f64::NEG_INFINITY);
    let (mut phi, mut after) = gaussian_randomize(&w_anchor, set.trials, score, set.seed)?;
    // principal-eigenvector rounding as one extra deterministic candidate
    let (_, vecs) = hermitian_eig(&w_anchor)?;
    let x = vecs.column(0);
    let n = state.passive.len();
    let eig_phi = CVec::from_fn(n, |j, _| {
        let z = x[j] * x[n].conj();
        if z.norm() > 0.0 {
            z / z.norm()
        } else {
            cr(1.0)
        }
    });
    let eig_obj = lin.objective(&state.unlift(&eig_phi)).unwrap_or(f64::NEG_INFINITY);
    if eig_obj > after {
        phi = eig_phi;
        after = eig_obj;
    }
    debug!("passive step: g1 {:?}, objective {before:.6e} -> {after:.6e}", trace.last());
    if after >= before {
        Ok(StepOutcome {
            theta: state.unlift(&phi),
            accepted: true,
            objective_before: before,
            objective_after: after,
            surrogate_trace: trace,
        })
    } else {
        Ok(StepOutcome {
            theta: theta_init.clone(),
            accepted: false,
            objective_before: before,
            objective_after: before,
            surrogate_trace: trace,
        })
    }
}

/// Quantities for the active step with `phi` fixed, anchored at `psi~`.
#[derive(Debug, Clone)]
pub struct ActiveLmiState {
    /// `t_Q` with Bob's amplitude `x(psi) = t_Q^H psi + l_bar`.
    pub t_q: CVec,
    pub l_bar: C64,
    /// `conj(P_MIB)` restricted to the active columns, and the fixed part.
    pub pm_q: CMat,
    pub t_bar_mb: CVec,
    /// `|P_IB,ii|^2` on the active set.
    pub p_ib2: Vec<f64>,
    pub p_aim_q: CMat,
    pub t_bar_am: CVec,
    pub p_im_q: Vec<f64>,
    pub d_q: Vec<f64>,
    pub h: CVec,
    pub r_nj: CMat,
    pub sigma_b2: f64,
    pub x_anchor: C64,
    pub y_anchor: f64,
    pub gamma_anchor: f64,
    pub psi_anchor: CVec,
}

pub fn build_active_state(lin: &ThetaLinearization, theta: &CVec) -> Result<ActiveLmiState> {
    let passive: Vec<usize> = (0..theta.len()).filter(|i| !lin.active.contains(i)).collect();
    let act = &lin.active;
    let pm_conj = lin.p_mib.map(|z| z.conj());
    let t_q = CVec::from_iterator(act.len(), act.iter().map(|&i| lin.t_aib[i]));
    let l_bar = lin.l_ab + passive.iter().map(|&i| lin.t_aib[i].conj() * theta[i]).sum::<C64>();
    let t_bar_mb = active_part(&pm_conj, theta, &passive) + lin.t_mb.map(|z| z.conj());
    let t_bar_am = active_part(&lin.p_aim, theta, &passive) + &lin.t_am;
    let psi_anchor = CVec::from_iterator(act.len(), act.iter().map(|&i| theta[i]));
    let x_anchor = lin.bob_amplitude(theta);
    let y_anchor = lin.bob_interference(theta);
    let u = lin.mallory_signal(theta);
    let gamma_anchor = quad_form(&hpd_inverse(&lin.mallory_interference(theta))?, &u).max(0.0);
    Ok(ActiveLmiState {
        t_q,
        l_bar,
        pm_q: take_cols(&pm_conj, act),
        t_bar_mb,
        p_ib2: act.iter().map(|&i| lin.p_ib[i].norm_sqr()).collect(),
        p_aim_q: take_cols(&lin.p_aim, act),
        t_bar_am,
        p_im_q: act.iter().map(|&i| lin.p_im[i]).collect(),
        d_q: act.iter().map(|&i| lin.d[i]).collect(),
        h: lin.h_im_r.clone(),
        r_nj: lin.r_nj.clone(),
        sigma_b2: lin.sigma_b2,
        x_anchor,
        y_anchor,
        gamma_anchor,
        psi_anchor,
    })
}

impl ActiveLmiState {
    pub fn x(&self, psi: &CVec) -> C64 {
        self.t_q.dotc(psi) + self.l_bar
    }

    pub fn y(&self, psi: &CVec) -> f64 {
        let relay: f64 = (0..psi.len()).map(|i| self.p_ib2[i] * psi[i].norm_sqr()).sum();
        (&self.pm_q * psi + &self.t_bar_mb).norm_squared() + relay + self.sigma_b2
    }

    pub fn u(&self, psi: &CVec) -> CVec {
        &self.p_aim_q * psi + &self.t_bar_am
    }

    /// `psi^H P_IM psi`.
    pub fn relay_noise(&self, psi: &CVec) -> f64 {
        (0..psi.len()).map(|i| self.p_im_q[i] * psi[i].norm_sqr()).sum()
    }

    /// Exact Schur block `E(psi, gamma)`.
    pub fn e_block(&self, psi: &CVec, gamma: f64) -> CMat {
        let x = &self.r_nj + (&self.h * self.h.adjoint()).scale(self.relay_noise(psi));
        super::bounds::schur_block(&x, &self.u(psi), gamma)
    }

    /// Linearized block `E_bar(psi, gamma)`, with `psi^H P_IM psi` replaced by
    /// its tangent at `psi~`.
    pub fn e_bar_block(&self, psi: &CVec, gamma: f64) -> CMat {
        let l: f64 = (0..psi.len())
            .map(|i| self.p_im_q[i] * (2.0 * (psi[i].conj() * self.psi_anchor[i]).re - self.psi_anchor[i].norm_sqr()))
            .sum();
        let x = &self.r_nj + (&self.h * self.h.adjoint()).scale(l);
        super::bounds::schur_block(&x, &self.u(psi), gamma)
    }

    /// `ln(1 + |x|^2/y) - ln(1 + u^H X^{-1} u)` (nats).
    pub fn g2(&self, psi: &CVec) -> Result<f64> {
        let x = &self.r_nj + (&self.h * self.h.adjoint()).scale(self.relay_noise(psi));
        let u = self.u(psi);
        let gamma = quad_form(&hpd_inverse(&x)?, &u).max(0.0);
        Ok((1.0 + self.x(psi).norm_sqr() / self.y(psi)).ln() - gamma.ln_1p())
    }

    /// Quadratic model `psi^H Q psi - 2 Re{q^H psi}` and the slack cost
    /// `1/(1 + gamma~)` of the minimized surrogate.
    pub fn cost_terms(&self) -> (CMat, CVec, f64) {
        let k = self.t_q.len();
        let c = super::bounds::ab_curvature(self.x_anchor, self.y_anchor);
        let mut q_mat = &self.t_q * self.t_q.adjoint() + self.pm_q.adjoint() * &self.pm_q;
        for i in 0..k {
            q_mat[(i, i)] += cr(self.p_ib2[i]);
        }
        let q_mat = hermitian_part(&q_mat.scale(c));
        let q_lin = self.t_q.scale(1.0 / self.y_anchor) * self.x_anchor
            - (self.t_q.clone() * self.l_bar + self.pm_q.adjoint() * &self.t_bar_mb).scale(c);
        (q_mat, q_lin, 1.0 / (1.0 + self.gamma_anchor))
    }
}

/// Active step with the passive phases held fixed.
pub fn sop_active_step(lin: &ThetaLinearization, theta_init: &CVec, set: &PsmSettings) -> Result<StepOutcome> {
    let before = lin.objective(theta_init)?;
    let k = lin.active.len();
    if k == 0 {
        return Ok(StepOutcome {
            theta: theta_init.clone(),
            accepted: false,
            objective_before: before,
            objective_after: before,
            surrogate_trace: vec![],
        });
    }
    let power = lin.power(theta_init);
    if power > set.p_rmax * (1.0 + 1e-9) {
        return Err(Error::Infeasible(format!(
            "initial active amplitudes use {power:e} of a {:e} budget",
            set.p_rmax
        )));
    }
    let mut theta = theta_init.clone();
    let mut best = before;
    let mut trace = vec![before * std::f64::consts::LN_2];
    for _ in 0..set.inner_cap {
        let st = build_active_state(lin, &theta)?;
        let (q_mat, q_lin, gamma_cost) = st.cost_terms();
        // variable scaling psi = omega psi' and a congruence on the LMI block
        let d_sum: f64 = st.d_q.iter().sum();
        let omega = (set.p_rmax / d_sum).sqrt();
        let nm = st.r_nj.nrows();
        let s = 1.0 / (st.r_nj.trace().re / nm as f64).sqrt();
        let st_lmi = st.clone();
        let lmi = Box::new(move |psi_s: &CVec, gamma: f64| {
            let mut e = st_lmi.e_bar_block(&psi_s.scale(omega), gamma);
            for r in 0..=nm {
                for col in 0..=nm {
                    let f = if r < nm { s } else { 1.0 } * if col < nm { s } else { 1.0 };
                    e[(r, col)] *= f;
                }
            }
            e
        });
        let d_mat = CMat::from_diagonal(&CVec::from_iterator(k, st.d_q.iter().map(|&d| cr(d * omega * omega))));
        let prob = LmiQpProblem {
            q_mat: q_mat.scale(omega * omega),
            q_lin: q_lin.scale(omega),
            gamma_cost,
            lmi,
            power: (d_mat, set.p_rmax),
            start: Some(st.psi_anchor.unscale(omega)),
        };
        let sol = solve_lmi_qp(&prob, set.tol)?;
        let psi = sol.psi.scale(omega);
        let mut cand = theta.clone();
        for (j, &i) in lin.active.iter().enumerate() {
            cand[i] = psi[j];
        }
        let obj = lin.objective(&cand)?;
        trace.push(obj * std::f64::consts::LN_2);
        if obj < best {
            break;
        }
        let gain = (obj - best) * std::f64::consts::LN_2;
        theta = cand;
        best = obj;
        if gain < set.eps {
            break;
        }
    }
    debug!("active step: objective {before:.6e} -> {best:.6e}");
    Ok(StepOutcome {
        accepted: best > before,
        theta,
        objective_before: before,
        objective_after: best,
        surrogate_trace: trace,
    })
}
