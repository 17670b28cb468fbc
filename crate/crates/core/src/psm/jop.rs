//! Joint optimization: one surrogate over the whole phase vector, closed-form
//! passive phases and a dual search for the active amplitudes.

use log::{debug, warn};
use nalgebra::DVector;

use super::bounds::{ab_curvature, ln_det_hpd};
use super::dual_search::{dual_search, power_at, psi_at};
use super::{PsmSettings, StepOutcome};
use crate::error::{Error, Result};
use crate::numerics::linalg::{hermitian_part, hpd_inverse, lambda_max, quad_form};
use crate::numerics::{CMat, CVec, C64};
use crate::system::ThetaLinearization;

#[derive(Debug, Clone)]
pub struct JopSurrogateState {
    pub a_anchor: C64,
    pub b_anchor: f64,
    pub c: f64,
    pub f_t: CMat,
    pub e: f64,
    pub q1: CMat,
    pub q1_lin: CVec,
    pub lambda: f64,
    pub q2: CVec,
    /// `rho = h^H R_NJ^{-1} h`.
    pub rho: f64,
    /// `P_ir` per active index.
    pub p_ir: Vec<f64>,
    /// Jensen weights per active index.
    pub weights: Vec<f64>,
    pub q_x_diag: DVector<f64>,
    pub q_x: CVec,
    pub d_x: DVector<f64>,
    pub theta_anchor: CVec,
}

pub fn build_jop_surrogate(lin: &ThetaLinearization, theta: &CVec) -> Result<JopSurrogateState> {
    let m = theta.len();
    let act = &lin.active;
    let k = act.len();
    let a_anchor = lin.bob_amplitude(theta);
    let b_anchor = lin.bob_interference(theta);
    let c = ab_curvature(a_anchor, b_anchor);
    let u = lin.mallory_signal(theta);
    let x = lin.mallory_interference(theta);
    let f_t = hermitian_part(&(&x + &u * u.adjoint()));
    let f_inv = hpd_inverse(&f_t)?;
    let h = &lin.h_im_r;
    let e = quad_form(&f_inv, h);

    let t = &lin.t_aib;
    let pm_conj = lin.p_mib.map(|z| z.conj());
    let q1 = hermitian_part(
        &((pm_conj.adjoint() * &pm_conj + t * t.adjoint()).scale(c) + lin.p_aim.adjoint() * &f_inv * &lin.p_aim),
    );
    let q1_lin = (pm_conj.adjoint() * lin.t_mb.map(|z| z.conj()) + t * lin.l_ab).scale(c)
        + lin.p_aim.adjoint() * &f_inv * &lin.t_am;
    let lambda = lambda_max(&q1)?;
    let gap = CMat::identity(m, m).scale(lambda) - &q1;
    let q2 = &gap * theta - &q1_lin + t * (a_anchor / b_anchor);

    let rho = quad_form(&hpd_inverse(&lin.r_nj)?, h);
    let z: Vec<f64> = act.iter().map(|&i| rho * lin.p_im[i] * theta[i].norm_sqr()).collect();
    let z_sum: f64 = z.iter().sum();
    let weights: Vec<f64> = z.iter().map(|zi| (1.0 / k as f64 + zi) / (1.0 + z_sum)).collect();
    let p_ir: Vec<f64> = act.iter().map(|&i| (k as f64 * rho * lin.p_im[i]).sqrt()).collect();

    let mut q_x_diag = DVector::zeros(k);
    let mut q_x = CVec::zeros(k);
    let mut d_x = DVector::zeros(k);
    for (j, &i) in act.iter().enumerate() {
        let alpha2 = p_ir[j] * p_ir[j] * theta[i].norm_sqr();
        let r = alpha2 / (1.0 + alpha2);
        let pir2 = p_ir[j] * p_ir[j];
        q_x_diag[j] = lambda + c * lin.p_ib[i].norm_sqr() + e * lin.p_im[i] + weights[j] * r * pir2;
        q_x[j] = q2[i] + theta[i] * (weights[j] * pir2);
        d_x[j] = lin.d[i];
    }
    if q_x_diag.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::NotPositiveDefinite {
            min_eig: q_x_diag.min(),
            max_eig: q_x_diag.max(),
        });
    }
    Ok(JopSurrogateState {
        a_anchor,
        b_anchor,
        c,
        f_t,
        e,
        q1,
        q1_lin,
        lambda,
        q2,
        rho,
        p_ir,
        weights,
        q_x_diag,
        q_x,
        d_x,
        theta_anchor: theta.clone(),
    })
}

impl JopSurrogateState {
    /// Weighted-Jensen plus (ab)-lemma minorant of `ln(1 + rho psi^H P_IM psi)`,
    /// evaluated at active amplitudes `psi` (length K).
    pub fn jensen_lower(&self, lin: &ThetaLinearization, psi: &CVec) -> f64 {
        let k = psi.len() as f64;
        let mut total = 0.0;
        for (j, &i) in lin.active.iter().enumerate() {
            let w = self.weights[j];
            let at = self.theta_anchor[i] * self.p_ir[j];
            let a = psi[j] * self.p_ir[j];
            let ab = super::bounds::ab_lower(a, 1.0, at, 1.0);
            total += w * ((1.0 / (k * w)).ln() + ab);
        }
        total
    }

    /// Exact `ln(1 + rho psi^H P_IM psi)`.
    pub fn jensen_target(&self, lin: &ThetaLinearization, psi: &CVec) -> f64 {
        let s: f64 = lin.active.iter().enumerate().map(|(j, &i)| lin.p_im[i] * psi[j].norm_sqr()).sum();
        (self.rho * s).ln_1p()
    }
}

#[derive(Debug, Clone)]
pub struct JopStep {
    pub outcome: StepOutcome,
    pub mu: f64,
    pub jensen_fallback: bool,
}

pub fn jop_step(lin: &ThetaLinearization, theta_prev: &CVec, set: &PsmSettings) -> Result<JopStep> {
    let before = lin.objective(theta_prev)?;
    let st = build_jop_surrogate(lin, theta_prev)?;
    let mut theta = theta_prev.clone();
    for i in 0..theta.len() {
        if !lin.active.contains(&i) && st.q2[i].norm() > 0.0 {
            theta[i] = st.q2[i] / st.q2[i].norm();
        }
    }
    let mut mu = 0.0;
    let mut jensen_fallback = false;
    if !lin.active.is_empty() {
        let mut psi = psi_at(&st.q_x, &st.q_x_diag, &st.d_x, 0.0);
        if power_at(&st.q_x, &st.q_x_diag, &st.d_x, 0.0) > set.p_rmax {
            mu = dual_search(&st.q_x, &st.q_x_diag, &st.d_x, set.p_rmax, 1e-10)?;
            psi = psi_at(&st.q_x, &st.q_x_diag, &st.d_x, mu);
            let pw = power_at(&st.q_x, &st.q_x_diag, &st.d_x, mu);
            if pw > set.p_rmax {
                psi = psi.scale((set.p_rmax / pw).sqrt());
            }
        }
        if st.jensen_lower(lin, &psi) > st.jensen_target(lin, &psi) + 1e-9 {
            warn!("Jensen minorant exceeded its target; keeping the previous amplitudes");
            jensen_fallback = true;
            psi = CVec::from_iterator(lin.active.len(), lin.active.iter().map(|&i| theta_prev[i]));
        }
        for (j, &i) in lin.active.iter().enumerate() {
            theta[i] = psi[j];
        }
    }
    let after = lin.objective(&theta)?;
    let accepted = after >= before;
    debug!("jop step: objective {before:.6e} -> {after:.6e} (mu {mu:.3e})");
    Ok(JopStep {
        outcome: StepOutcome {
            theta: if accepted { theta } else { theta_prev.clone() },
            accepted,
            objective_before: before,
            objective_after: if accepted { after } else { before },
            surrogate_trace: vec![],
        },
        mu,
        jensen_fallback,
    })
}

/// Repeats [`jop_step`] until the objective gain (nats) drops below `eps`.
pub fn jo_psm(lin: &ThetaLinearization, theta_init: &CVec, set: &PsmSettings) -> Result<StepOutcome> {
    let mut theta = theta_init.clone();
    let before = lin.objective(theta_init)?;
    let mut obj = before;
    let mut trace = vec![before];
    for _ in 0..set.inner_cap {
        let step = jop_step(lin, &theta, set)?;
        let gain = (step.outcome.objective_after - obj) * std::f64::consts::LN_2;
        trace.push(step.outcome.objective_after);
        theta = step.outcome.theta;
        obj = step.outcome.objective_after;
        if !step.outcome.accepted || gain < set.eps {
            break;
        }
    }
    Ok(StepOutcome {
        theta,
        accepted: obj > before,
        objective_before: before,
        objective_after: obj,
        surrogate_trace: trace,
    })
}

/// `ln|X + u u^H| - ln|X|`, i.e. `ln(1 + u^H X^{-1} u)`, for the anchor
/// quantities of a JO surrogate.
pub fn mallory_log_ratio(lin: &ThetaLinearization, theta: &CVec) -> Result<f64> {
    let u = lin.mallory_signal(theta);
    let x = lin.mallory_interference(theta);
    Ok(ln_det_hpd(&hermitian_part(&(&x + &u * u.adjoint())))? - ln_det_hpd(&x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::c;
    use crate::psm::dual_search::dual_value;
    use crate::psm::testutil::{phases, small_lin};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn settings(p_rmax: f64) -> PsmSettings {
        PsmSettings {
            eps: 1e-10,
            tol: 1e-8,
            trials: 100,
            inner_cap: 50,
            seed: 7,
            p_rmax,
        }
    }

    fn start(lin: &ThetaLinearization, m: usize, frac: f64, p: f64, seed: u64) -> CVec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = phases(&mut rng, m);
        let k = lin.active.len() as f64;
        for &i in &lin.active {
            theta[i] *= (frac * p / (k * lin.d[i])).sqrt();
        }
        theta
    }

    #[test]
    fn passive_entries_follow_q2_phases() {
        let (sc, lin) = small_lin(10, vec![0, 1], 20.0, 2);
        let theta = start(&lin, 10, 0.81, sc.cfg.p_rmax(), 2);
        let st = build_jop_surrogate(&lin, &theta).unwrap();
        let step = jop_step(&lin, &theta, &settings(sc.cfg.p_rmax())).unwrap();
        assert!(step.outcome.accepted);
        for i in 2..10 {
            let got = step.outcome.theta[i];
            assert!((got.norm() - 1.0).abs() < 1e-15);
            assert!((got - st.q2[i] / st.q2[i].norm()).norm() < 1e-15);
        }
    }

    #[test]
    fn generous_budget_gives_unconstrained_branch() {
        let (sc, lin) = small_lin(6, vec![2], 80.0, 3);
        let theta = start(&lin, 6, 1e-6, sc.cfg.p_rmax(), 3);
        let st = build_jop_surrogate(&lin, &theta).unwrap();
        let step = jop_step(&lin, &theta, &settings(sc.cfg.p_rmax())).unwrap();
        assert_eq!(step.mu, 0.0);
        let expect = st.q_x[0] / st.q_x_diag[0];
        if step.outcome.accepted {
            assert!((step.outcome.theta[2] - expect).norm() <= 1e-12 * expect.norm());
        }
    }

    #[test]
    fn binding_multiplier_matches_dual_grid() {
        let (sc, lin) = small_lin(6, vec![4], 20.0, 4);
        let p = sc.cfg.p_rmax();
        let theta = start(&lin, 6, 0.81, p, 4);
        let st = build_jop_surrogate(&lin, &theta).unwrap();
        assert!(power_at(&st.q_x, &st.q_x_diag, &st.d_x, 0.0) > p, "instance must bind");
        let step = jop_step(&lin, &theta, &settings(p)).unwrap();
        assert!(step.mu > 0.0);
        // grid over (0, mu_hi], zoomed around the best cell
        let g = |mu: f64| dual_value(&st.q_x, &st.q_x_diag, &st.d_x, p, mu);
        let mut hi = 1.0;
        while power_at(&st.q_x, &st.q_x_diag, &st.d_x, hi) > p {
            hi *= 2.0;
        }
        let (mut lo, mut up) = (0.0, hi);
        for _ in 0..8 {
            let n = 1000;
            let h = (up - lo) / n as f64;
            let best = (0..=n).map(|i| lo + h * i as f64).fold((lo, f64::NEG_INFINITY), |acc, mu| {
                let v = g(mu);
                if v > acc.1 { (mu, v) } else { acc }
            });
            lo = (best.0 - h).max(0.0);
            up = best.0 + h;
        }
        let grid_mu = 0.5 * (lo + up);
        assert!((step.mu - grid_mu).abs() <= 1e-6 * grid_mu.max(1.0), "{} vs {}", step.mu, grid_mu);
        let psi = psi_at(&st.q_x, &st.q_x_diag, &st.d_x, step.mu);
        let used = power_at(&st.q_x, &st.q_x_diag, &st.d_x, step.mu);
        assert!((used - p).abs() <= 1e-6 * p);
        if step.outcome.accepted && !step.jensen_fallback {
            assert!((step.outcome.theta[4] - psi[0]).norm() <= 1e-9 * psi[0].norm());
        }
    }

    #[test]
    fn steps_never_decrease_the_objective() {
        for seed in 0..10 {
            let (sc, lin) = small_lin(12, vec![0, 5], 20.0, 100 + seed);
            let p = sc.cfg.p_rmax();
            let mut theta = start(&lin, 12, 0.81, p, seed);
            let mut prev = lin.objective(&theta).unwrap();
            for _ in 0..20 {
                let step = jop_step(&lin, &theta, &settings(p)).unwrap();
                theta = step.outcome.theta;
                let now = lin.objective(&theta).unwrap();
                assert!(now >= prev - 1e-9);
                assert!(lin.power(&theta) <= p * (1.0 + 1e-10));
                prev = now;
            }
        }
    }

    #[test]
    fn no_active_elements_only_moves_phases() {
        let (sc, lin) = small_lin(8, vec![], 20.0, 5);
        let theta = start(&lin, 8, 0.0, sc.cfg.p_rmax(), 5);
        let step = jop_step(&lin, &theta, &settings(sc.cfg.p_rmax())).unwrap();
        assert_eq!(step.mu, 0.0);
        assert!(step.outcome.theta.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn jensen_minorant_is_tight_and_below() {
        let (sc, lin) = small_lin(8, vec![1, 2, 6], 20.0, 6);
        let theta = start(&lin, 8, 0.5, sc.cfg.p_rmax(), 6);
        let st = build_jop_surrogate(&lin, &theta).unwrap();
        let psi0 = CVec::from_iterator(3, lin.active.iter().map(|&i| theta[i]));
        assert!((st.jensen_lower(&lin, &psi0) - st.jensen_target(&lin, &psi0)).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let scale = psi0.norm() * 3.0;
            let psi = phases(&mut rng, 3).component_mul(&crate::psm::testutil::unit_vec(&mut rng, 3).map(|z| c(z.norm() * scale, 0.0)));
            assert!(st.jensen_lower(&lin, &psi) <= st.jensen_target(&lin, &psi) + 1e-12);
        }
    }

    #[test]
    fn log_ratio_equals_rate() {
        let (sc, lin) = small_lin(6, vec![0], 20.0, 7);
        let theta = start(&lin, 6, 0.5, sc.cfg.p_rmax(), 7);
        let r = mallory_log_ratio(&lin, &theta).unwrap();
        assert!((r / std::f64::consts::LN_2 - lin.rate_mallory(&theta).unwrap()).abs() < 1e-10);
    }
}
