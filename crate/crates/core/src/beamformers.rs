//! Receive beamformer (generalized Rayleigh quotient) and the Dinkelbach/SCA
//! transmit beamformer.

use log::warn;

use crate::error::{Error, Result};
use crate::numerics::linalg::{hermitian_eig, hermitian_part, hpd_inverse, quad_form};
use crate::numerics::{max_generalized_eigvec, solve_convex_qcqp, ConvexQcqpProblem, CMat, CVec, QuadVsLin};
use crate::system::{assemble_covariances, BeamState, CovarianceBundle, PhaseState, Scenario};

/// Unit `v_BR` maximizing Bob's SINR for the given covariances.
pub fn opt_receive(bundle: &CovarianceBundle) -> Result<CVec> {
    let (v, _) = max_generalized_eigvec(&bundle.r_ab, &bundle.bob_interference())?;
    Ok(v)
}

#[derive(Debug, Clone)]
pub struct TransmitSubproblem {
    pub t1: CMat,
    pub t2: CMat,
    pub b: CMat,
    /// Budget left for the beam-dependent part of the relay power.
    pub p1: f64,
    pub kappa: f64,
    pub h_a1: CMat,
}

impl TransmitSubproblem {
    pub fn ratio(&self, v: &CVec) -> f64 {
        quad_form(&self.t1, v) / quad_form(&self.t2, v)
    }

    /// `v^H B v - p1 ||v||^2`; feasible when `<= 0`.
    pub fn power_residual(&self, v: &CVec) -> f64 {
        quad_form(&self.b, v) - self.p1 * v.norm_squared()
    }
}

/// Beam-independent part of the relay power,
/// `tr[Psi (g_IM P_M H_MI^H H_MI + sigma_R^2 I) Psi^H]`.
pub fn relay_power_floor(sc: &Scenario, phase: &PhaseState) -> f64 {
    let ch = &sc.ch;
    let psi = phase.psi();
    (0..psi.len())
        .map(|i| {
            let row: f64 = ch.mi.row(i).iter().map(|z| z.norm_sqr()).sum();
            psi[i].norm_sqr() * (ch.g_im * sc.cfg.p_m() * row + sc.cfg.sigma_r2())
        })
        .sum()
}

pub fn build_transmit_subproblem(sc: &Scenario, phase: &PhaseState, v_br: &CVec) -> Result<TransmitSubproblem> {
    let cfg = &sc.cfg;
    let ch = &sc.ch;
    let n_a = cfg.n_a;
    let probe = BeamState {
        v: CVec::zeros(n_a),
        v_br: v_br.clone(),
    };
    let bundle = assemble_covariances(sc, phase, &probe)?;
    let bpa = cfg.beta * cfg.p_a();
    let kappa = quad_form(&(&bundle.r_mj + &bundle.r_br), v_br) + bundle.sigma_b2;
    let g = bundle.h_a1.adjoint() * v_br;
    let t1 = (&g * g.adjoint()).scale(bpa / kappa) + CMat::identity(n_a, n_a);
    let a_inv = hpd_inverse(&bundle.mallory_interference())?;
    let t2 = (bundle.h_a2.adjoint() * a_inv * &bundle.h_a2).scale(bpa) + CMat::identity(n_a, n_a);
    let psi = phase.psi();
    let mut scaled = ch.ai.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= psi[i];
    }
    let b = (scaled.adjoint() * &scaled).scale(ch.g_ai * bpa);
    let p1 = cfg.p_rmax() - relay_power_floor(sc, phase);
    if !(p1 > 0.0) {
        return Err(Error::Infeasible(format!(
            "relay budget exhausted by the beam-independent power (P1 = {p1:e})"
        )));
    }
    Ok(TransmitSubproblem {
        t1: hermitian_part(&t1),
        t2: hermitian_part(&t2),
        b: hermitian_part(&b),
        p1,
        kappa,
        h_a1: bundle.h_a1,
    })
}

/// Uniformly shrinks `psi` so the beam-independent relay power uses at most
/// 95% of the budget. Returns `true` when the phase state was changed.
pub fn restore_headroom(sc: &Scenario, phase: &mut PhaseState) -> bool {
    let floor = relay_power_floor(sc, phase);
    let target = 0.95 * sc.cfg.p_rmax();
    if floor <= target {
        return false;
    }
    let s = (target / floor).sqrt();
    let psi = phase.psi_active().scale(s);
    phase.set_psi_active(&psi);
    true
}

/// Normalized principal right singular vector of `H_A1`.
pub fn matched_transmit(h_a1: &CMat) -> CVec {
    let (_, vecs) = hermitian_eig(&hermitian_part(&(h_a1.adjoint() * h_a1))).expect("Gram matrix is Hermitian");
    vecs.column(0).into_owned()
}

/// Picks a feasible unit starting beam: `warm` if given and feasible, else the
/// matched filter, else the direction of least relay power.
pub fn transmit_start(st: &TransmitSubproblem, warm: Option<&CVec>) -> CVec {
    let tol = 1e-12 * st.p1.max(1e-300);
    if let Some(w) = warm {
        let n = w.norm();
        if n > 0.0 {
            let w = w.unscale(n);
            if st.power_residual(&w) <= tol {
                return w;
            }
        }
    }
    let v = matched_transmit(&st.h_a1);
    if st.power_residual(&v) <= tol {
        return v;
    }
    let (_, vecs) = hermitian_eig(&st.b).expect("B is Hermitian");
    vecs.column(vecs.ncols() - 1).into_owned()
}

#[derive(Debug, Clone)]
pub struct TransmitOutcome {
    pub v: CVec,
    pub ratio: f64,
    pub iterations: usize,
    pub residual: f64,
    pub ratio_trace: Vec<f64>,
    pub capped: bool,
}

/// Dinkelbach iterations with one SCA convexification of the power constraint
/// per iteration.
pub fn opt_transmit(st: &TransmitSubproblem, v_init: &CVec, eps: f64, cap: usize, tol: f64) -> Result<TransmitOutcome> {
    let n0 = v_init.norm();
    if !(n0 > 0.0) {
        return Err(Error::InvalidArgument("zero initial transmit beamformer".into()));
    }
    let mut v_prev = v_init.unscale(n0);
    let mut eta = st.ratio(&v_prev);
    let mut best = (v_prev.clone(), eta);
    let mut trace = vec![eta];
    let use_power = st.b.iter().any(|z| z.norm() > 0.0);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut capped = true;
    for _ in 0..cap {
        iterations += 1;
        let p = ConvexQcqpProblem {
            t2: st.t2.scale(eta),
            t_lin: &st.t1 * &v_prev,
            quad_vs_lin: use_power.then(|| QuadVsLin {
                b_mat: st.b.clone(),
                b_lin: v_prev.scale(st.p1),
                c0: st.p1 * v_prev.norm_squared(),
            }),
        };
        let sol = solve_convex_qcqp(&p, tol)?;
        let v = sol.v;
        residual = quad_form(&st.t1, &v) - eta * quad_form(&st.t2, &v);
        let nv = v.norm();
        if nv > 0.0 {
            v_prev = v.unscale(nv);
        }
        eta = st.ratio(&v_prev);
        trace.push(eta);
        if eta > best.1 {
            best = (v_prev.clone(), eta);
        }
        if residual < eps {
            capped = false;
            break;
        }
    }
    if capped {
        warn!("transmit beamformer hit the iteration cap ({cap}); residual {residual:e}");
    }
    Ok(TransmitOutcome {
        v: best.0,
        ratio: best.1,
        iterations,
        residual,
        ratio_trace: trace,
        capped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::numerics::{c, cr};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
        CVec::from_fn(n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn bare(t1: CMat, t2: CMat) -> TransmitSubproblem {
        let n = t1.nrows();
        TransmitSubproblem {
            t1,
            t2,
            b: CMat::zeros(n, n),
            p1: 1.0,
            kappa: 1.0,
            h_a1: CMat::identity(n, n),
        }
    }

    fn bundle_with(r_ab: CMat, r_mj: CMat, sigma_b2: f64) -> CovarianceBundle {
        let n = r_ab.nrows();
        CovarianceBundle {
            h_a1: CMat::zeros(n, 1),
            h_m1: CMat::zeros(n, 1),
            h_a2: CMat::zeros(1, 1),
            r_ab,
            r_br: CMat::zeros(n, n),
            r_mj,
            r_am: CMat::zeros(1, 1),
            r_aj: CMat::zeros(1, 1),
            r_mr: CMat::zeros(1, 1),
            sigma_b2,
            sigma_m2: 1.0,
        }
    }

    #[test]
    fn receive_picks_dominant_direction() {
        let r = CMat::from_diagonal(&CVec::from_vec(vec![cr(1.0), cr(5.0), cr(2.0)]));
        let v = opt_receive(&bundle_with(r, CMat::zeros(3, 3), 1.0)).unwrap();
        assert!((v - CVec::from_vec(vec![cr(0.0), cr(1.0), cr(0.0)])).norm() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = rand_vec(&mut rng, 4);
        let u = u.unscale(u.norm());
        let v = opt_receive(&bundle_with((&u * u.adjoint()).scale(2.0), CMat::zeros(4, 4), 2.0)).unwrap();
        assert!((v.dotc(&u).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn receive_beats_random_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = CMat::from_fn(4, 4, |_, _| c(rng.random::<f64>(), rng.random::<f64>() - 0.5));
        let a = rand_vec(&mut rng, 4);
        let b = bundle_with(&a * a.adjoint(), &g * g.adjoint(), 0.3);
        let v = opt_receive(&b).unwrap();
        let best = b.bob_sinr(&v);
        for _ in 0..10_000 {
            let x = rand_vec(&mut rng, 4);
            assert!(b.bob_sinr(&x) <= best * (1.0 + 1e-12));
        }
    }

    #[test]
    fn equal_matrices_give_unit_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = CMat::from_fn(3, 3, |_, _| c(rng.random::<f64>(), rng.random::<f64>()));
        let t = &g * g.adjoint() + CMat::identity(3, 3);
        let st = bare(t.clone(), t);
        let out = opt_transmit(&st, &rand_vec(&mut rng, 3), 1e-10, 200, 1e-8).unwrap();
        assert!((out.ratio - 1.0).abs() < 1e-12);
        assert!(out.iterations <= 2);
    }

    #[test]
    fn rank_one_numerator_converges_to_its_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = rand_vec(&mut rng, 4);
        let u = u.unscale(u.norm());
        let st = bare((&u * u.adjoint()).scale(10.0) + CMat::identity(4, 4), CMat::identity(4, 4));
        let out = opt_transmit(&st, &rand_vec(&mut rng, 4), 1e-10, 200, 1e-8).unwrap();
        assert!((out.ratio - 11.0).abs() < 1e-8);
        assert!((out.v.dotc(&u).norm() - 1.0).abs() < 1e-8);
        assert!(!out.capped);
    }

    #[test]
    fn unconstrained_case_matches_generalized_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let a = CMat::from_fn(4, 4, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let b = CMat::from_fn(4, 4, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let t1 = (&a * a.adjoint()).scale(5.0) + CMat::identity(4, 4);
            let t2 = &b * b.adjoint() + CMat::identity(4, 4);
            let (_, val) = max_generalized_eigvec(&t1, &t2).unwrap();
            let st = bare(t1, t2);
            let out = opt_transmit(&st, &rand_vec(&mut rng, 4), 1e-10, 200, 1e-8).unwrap();
            assert!((out.ratio - val).abs() < 1e-5, "{} vs {}", out.ratio, val);
            for w in out.ratio_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-10);
            }
        }
    }

    #[test]
    fn power_constraint_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = rand_vec(&mut rng, 3);
        let u = u.unscale(u.norm());
        let mut st = bare((&u * u.adjoint()).scale(10.0) + CMat::identity(3, 3), CMat::identity(3, 3));
        st.b = (&u * u.adjoint()).scale(4.0);
        st.p1 = 1.0;
        let w = CVec::from_fn(3, |i, _| if i == 0 { cr(1.0) } else { cr(0.0) });
        let start = transmit_start(&st, Some(&w));
        assert!(st.power_residual(&start) <= 1e-12);
        let out = opt_transmit(&st, &start, 1e-10, 200, 1e-8).unwrap();
        assert!((out.v.norm() - 1.0).abs() < 1e-12);
        assert!(st.power_residual(&out.v) <= 1e-8);
        // |u^H v|^2 <= 1/4 on the feasible set
        assert!((out.ratio - (1.0 + 10.0 * 0.25)).abs() < 1e-6);
    }

    #[test]
    fn vacuous_power_constraint_without_active_elements() {
        let cfg = ScenarioConfig {
            m: 8,
            ..ScenarioConfig::default()
        };
        let sc = Scenario::new(cfg).unwrap();
        let mut phase = PhaseState::zero(8, sc.cfg.active_set.clone());
        for i in 2..8 {
            phase.theta[i] = cr(1.0);
        }
        let v_br = CVec::from_element(5, cr(1.0 / 5f64.sqrt()));
        let st = build_transmit_subproblem(&sc, &phase, &v_br).unwrap();
        assert_eq!(st.b.norm(), 0.0);
        assert_eq!(st.p1, sc.cfg.p_rmax());

        let cfg0 = ScenarioConfig {
            beta: 0.0,
            m: 8,
            ..ScenarioConfig::default()
        };
        let sc0 = Scenario::new(cfg0).unwrap();
        let st0 = build_transmit_subproblem(&sc0, &phase, &v_br).unwrap();
        assert!((st0.t1 - CMat::identity(5, 5)).norm() < 1e-15);
    }

    #[test]
    fn single_active_element_budget_by_hand() {
        let cfg = ScenarioConfig {
            m: 6,
            active_set: vec![3],
            ..ScenarioConfig::default()
        };
        let sc = Scenario::new(cfg).unwrap();
        let mut phase = PhaseState::zero(6, vec![3]);
        for i in 0..6 {
            phase.theta[i] = if i == 3 { c(30.0, -40.0) } else { cr(1.0) };
        }
        let v_br = CVec::from_element(5, cr(1.0 / 5f64.sqrt()));
        let st = build_transmit_subproblem(&sc, &phase, &v_br).unwrap();
        let row: f64 = (0..5).map(|j| sc.ch.mi[(3, j)].norm_sqr()).sum();
        let by_hand = sc.cfg.p_rmax() - 2500.0 * (sc.ch.g_im * sc.cfg.p_m() * row + sc.cfg.sigma_r2());
        assert!((st.p1 - by_hand).abs() < 1e-9 * by_hand.abs());
    }

    #[test]
    fn headroom_is_restored() {
        let cfg = ScenarioConfig {
            m: 6,
            ..ScenarioConfig::default()
        };
        let sc = Scenario::new(cfg).unwrap();
        let mut phase = PhaseState::zero(6, vec![0, 1]);
        phase.theta[0] = cr(1e5);
        phase.theta[1] = cr(1e5);
        assert!(restore_headroom(&sc, &mut phase));
        let floor = relay_power_floor(&sc, &phase);
        assert!((floor - 0.95 * sc.cfg.p_rmax()).abs() < 1e-9 * floor);
    }
}
