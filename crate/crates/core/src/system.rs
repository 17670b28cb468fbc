//! Signal model: AN projector, covariance matrices, worst-case rate bounds,
//! relay power, and the forms of all of these that are linear in the phase
//! vector `theta`.

use log::warn;
use nalgebra::DVector;

use crate::channel::{build_channels, ChannelSet};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::numerics::linalg::{hermitian_part, hpd_inverse, quad_form};
use crate::numerics::{cr, pseudo_inverse, CMat, CVec, C64};

/// Configuration together with its channels and AN projector.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub ch: ChannelSet,
    pub t_an: CMat,
    /// Set when the AN null space is empty and AN is disabled.
    pub an_disabled: bool,
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let ch = build_channels(&cfg.geometry, cfg.sizes(), cfg.loss_const)?;
        let (t_an, an_disabled) = an_projection(&ch.ai, &ch.ab);
        if an_disabled {
            warn!("AN projector is zero; artificial noise is disabled");
        }
        Ok(Self {
            cfg,
            ch,
            t_an,
            an_disabled,
        })
    }
}

/// Phase vector `theta = phi + psi`; `psi` lives on the active set.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub theta: CVec,
    /// Sorted 0-based active indices.
    pub active: Vec<usize>,
}

impl PhaseState {
    pub fn new(theta: CVec, active: Vec<usize>) -> Self {
        Self { theta, active }
    }

    pub fn zero(m: usize, active: Vec<usize>) -> Self {
        Self::new(CVec::zeros(m), active)
    }

    pub fn m(&self) -> usize {
        self.theta.len()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active.binary_search(&i).is_ok()
    }

    pub fn passive_indices(&self) -> Vec<usize> {
        (0..self.m()).filter(|&i| !self.is_active(i)).collect()
    }

    pub fn phi(&self) -> CVec {
        CVec::from_fn(self.m(), |i, _| if self.is_active(i) { cr(0.0) } else { self.theta[i] })
    }

    pub fn psi(&self) -> CVec {
        CVec::from_fn(self.m(), |i, _| if self.is_active(i) { self.theta[i] } else { cr(0.0) })
    }

    /// `psi` restricted to the active set (length K).
    pub fn psi_active(&self) -> CVec {
        CVec::from_iterator(self.active.len(), self.active.iter().map(|&i| self.theta[i]))
    }

    pub fn set_psi_active(&mut self, psi: &CVec) {
        for (j, &i) in self.active.iter().enumerate() {
            self.theta[i] = psi[j];
        }
    }

    /// Largest deviation of a passive entry from unit modulus.
    pub fn unit_modulus_error(&self) -> f64 {
        self.passive_indices()
            .into_iter()
            .map(|i| (self.theta[i].norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamState {
    pub v: CVec,
    pub v_br: CVec,
}

/// `T = I - H^H (H H^H)^+ H` for `H = [H_AI^H; H_AB^H]`, scaled to unit
/// Frobenius norm. Returns the zero matrix and `true` when the null space is
/// empty.
pub fn an_projection(ai: &CMat, ab: &CMat) -> (CMat, bool) {
    let n_a = ai.ncols();
    let mut h = CMat::zeros(ai.nrows() + ab.nrows(), n_a);
    h.rows_mut(0, ai.nrows()).copy_from(ai);
    h.rows_mut(ai.nrows(), ab.nrows()).copy_from(ab);
    let gram = &h * h.adjoint();
    let proj = CMat::identity(n_a, n_a) - h.adjoint() * pseudo_inverse(&gram) * &h;
    let proj = hermitian_part(&proj);
    let norm = proj.norm();
    if norm <= 1e-9 * (n_a as f64).sqrt() {
        return (CMat::zeros(n_a, n_a), true);
    }
    (proj.unscale(norm), false)
}

#[derive(Debug, Clone)]
pub struct CovarianceBundle {
    pub h_a1: CMat,
    pub h_m1: CMat,
    pub h_a2: CMat,
    pub r_ab: CMat,
    pub r_mj: CMat,
    pub r_br: CMat,
    pub r_am: CMat,
    pub r_aj: CMat,
    pub r_mr: CMat,
    pub sigma_b2: f64,
    pub sigma_m2: f64,
}

fn check_dims(sc: &Scenario, phase: &PhaseState, beam: &BeamState) -> Result<()> {
    let s = sc.cfg.sizes();
    for (ctx, expected, got) in [
        ("phase vector", s.m, phase.m()),
        ("transmit beamformer", s.n_a, beam.v.len()),
        ("receive beamformer", s.n_b, beam.v_br.len()),
    ] {
        if expected != got {
            return Err(Error::Dimension {
                context: ctx,
                expected,
                got,
            });
        }
    }
    Ok(())
}

/// Equivalent channels `(H_A1, H_M1, H_A2)` for a given `theta`.
pub fn equivalent_channels(sc: &Scenario, theta: &CVec) -> (CMat, CMat, CMat) {
    let ch = &sc.ch;
    let scale_cols = |m: &CMat| {
        let mut out = m.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= theta[j];
        }
        out
    };
    let ib_t = scale_cols(&ch.ib);
    let im_t = scale_cols(&ch.im);
    let h_a1 = (&ib_t * &ch.ai).scale(ch.g_aib().sqrt()) + ch.ab.scale(ch.g_ab.sqrt());
    let h_m1 = (&ib_t * &ch.mi).scale(ch.g_mib().sqrt()) + ch.mb.scale(ch.g_mb.sqrt());
    let h_a2 = (&im_t * &ch.ai).scale(ch.g_aim().sqrt()) + ch.am.scale(ch.g_am.sqrt());
    (h_a1, h_m1, h_a2)
}

pub fn assemble_covariances(sc: &Scenario, phase: &PhaseState, beam: &BeamState) -> Result<CovarianceBundle> {
    check_dims(sc, phase, beam)?;
    let cfg = &sc.cfg;
    let ch = &sc.ch;
    let (h_a1, h_m1, h_a2) = equivalent_channels(sc, &phase.theta);
    let bpa = cfg.beta * cfg.p_a();
    let a1v = &h_a1 * &beam.v;
    let a2v = &h_a2 * &beam.v;
    let r_ab = (&a1v * a1v.adjoint()).scale(bpa);
    let r_am = (&a2v * a2v.adjoint()).scale(bpa);
    let r_mj = (&h_m1 * h_m1.adjoint()).scale(cfg.p_m());
    let psi = phase.psi();
    let scale_cols = |m: &CMat| {
        let mut out = m.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= psi[j];
        }
        out
    };
    let ib_p = scale_cols(&ch.ib);
    let im_p = scale_cols(&ch.im);
    let sr2 = cfg.sigma_r2();
    let r_br = (&ib_p * ib_p.adjoint()).scale(sr2 * ch.g_ib);
    let r_mr = (&im_p * im_p.adjoint()).scale(sr2 * ch.g_im);
    let a2t = &h_a2 * &sc.t_an;
    let r_aj = (&a2t * a2t.adjoint()).scale((1.0 - cfg.beta) * cfg.p_a());
    Ok(CovarianceBundle {
        h_a1,
        h_m1,
        h_a2,
        r_ab: hermitian_part(&r_ab),
        r_mj: hermitian_part(&r_mj),
        r_br: hermitian_part(&r_br),
        r_am: hermitian_part(&r_am),
        r_aj: hermitian_part(&r_aj),
        r_mr: hermitian_part(&r_mr),
        sigma_b2: cfg.sigma_b2(),
        sigma_m2: cfg.sigma_m2(),
    })
}

impl CovarianceBundle {
    /// `R~_MJ + R_BR + sigma_B^2 I`.
    pub fn bob_interference(&self) -> CMat {
        let n = self.r_mj.nrows();
        &self.r_mj + &self.r_br + CMat::identity(n, n).scale(self.sigma_b2)
    }

    /// `R_AJ + R_MR + sigma_M^2 I`.
    pub fn mallory_interference(&self) -> CMat {
        let n = self.r_aj.nrows();
        &self.r_aj + &self.r_mr + CMat::identity(n, n).scale(self.sigma_m2)
    }

    pub fn bob_sinr(&self, v_br: &CVec) -> f64 {
        let num = quad_form(&self.r_ab, v_br);
        let den = quad_form(&(&self.r_mj + &self.r_br), v_br) + self.sigma_b2 * v_br.norm_squared();
        (num / den).max(0.0)
    }

    pub fn mallory_sinr(&self) -> Result<f64> {
        let inv = hpd_inverse(&self.mallory_interference())?;
        Ok((inv * &self.r_am).trace().re.max(0.0))
    }
}

/// Worst-case achievable rate of Bob in bits/s/Hz.
pub fn rate_bob_bar(bundle: &CovarianceBundle, beam: &BeamState) -> f64 {
    (1.0 + bundle.bob_sinr(&beam.v_br)).log2()
}

/// Worst-case achievable rate of Mallory in bits/s/Hz.
pub fn rate_mallory_bar(bundle: &CovarianceBundle) -> Result<f64> {
    Ok((1.0 + bundle.mallory_sinr()?).log2())
}

/// Relay power `tr[Psi X Psi^H]` in mW.
pub fn power_bar(sc: &Scenario, phase: &PhaseState, beam: &BeamState) -> f64 {
    let cfg = &sc.cfg;
    let ch = &sc.ch;
    let m = cfg.m;
    let aiv = &ch.ai * &beam.v;
    let x = (&aiv * aiv.adjoint()).scale(ch.g_ai * cfg.beta * cfg.p_a())
        + (&ch.mi * ch.mi.adjoint()).scale(ch.g_im * cfg.p_m())
        + CMat::identity(m, m).scale(cfg.sigma_r2());
    let psi = phase.psi();
    (0..m).map(|i| psi[i].norm_sqr() * x[(i, i)].re).sum()
}

/// `(R_B - R_M, max(0, R_B - R_M))`.
pub fn secrecy_objective(sc: &Scenario, phase: &PhaseState, beam: &BeamState) -> Result<(f64, f64)> {
    let b = assemble_covariances(sc, phase, beam)?;
    let obj = rate_bob_bar(&b, beam) - rate_mallory_bar(&b)?;
    Ok((obj, obj.max(0.0)))
}

/// Quantities making both rate bounds explicit functions of `theta` for a
/// fixed beam pair.
#[derive(Debug, Clone)]
pub struct ThetaLinearization {
    pub t_aib: CVec,
    pub l_ab: C64,
    /// `N_M x M`.
    pub p_mib: CMat,
    pub t_mb: CVec,
    /// Diagonal of `P_IB`.
    pub p_ib: CVec,
    /// `N_M x M`.
    pub p_aim: CMat,
    pub t_am: CVec,
    /// Diagonal of `P_IM`.
    pub p_im: DVector<f64>,
    /// Diagonal of `P_IMh = ||h_IM,r||^2 P_IM`.
    pub p_imh: DVector<f64>,
    pub h_im_r: CVec,
    pub r_nj: CMat,
    pub t_ai: CVec,
    pub t_mi: CVec,
    /// Diagonal of `D`.
    pub d: DVector<f64>,
    pub sigma_b2: f64,
    pub active: Vec<usize>,
}

pub fn linearize_theta(sc: &Scenario, beam: &BeamState, active: &[usize]) -> ThetaLinearization {
    let cfg = &sc.cfg;
    let ch = &sc.ch;
    let bpa = cfg.beta * cfg.p_a();
    let a = ch.ib.adjoint() * &beam.v_br;
    let b = &ch.ai * &beam.v;
    let m = cfg.m;
    let t_aib = CVec::from_fn(m, |i, _| a[i] * b[i].conj()).scale((bpa * ch.g_aib()).sqrt());
    let l_ab = beam.v_br.dotc(&(&ch.ab * &beam.v)) * (bpa * ch.g_ab).sqrt();
    let mut p_mib = ch.mi.adjoint();
    for (j, mut col) in p_mib.column_iter_mut().enumerate() {
        col *= a[j];
    }
    let p_mib = p_mib.scale((ch.g_mib() * cfg.p_m()).sqrt());
    let t_mb = (ch.mb.adjoint() * &beam.v_br).scale((ch.g_mb * cfg.p_m()).sqrt());
    let p_ib = a.scale(cfg.sigma_r2().sqrt() * ch.g_ib.sqrt());
    let mut p_aim = ch.im.clone();
    for (j, mut col) in p_aim.column_iter_mut().enumerate() {
        col *= b[j];
    }
    let p_aim = p_aim.scale((bpa * ch.g_aim()).sqrt());
    let t_am = (&ch.am * &beam.v).scale((bpa * ch.g_am).sqrt());
    let p_im = DVector::from_fn(m, |i, _| cfg.sigma_r2() * ch.g_im * ch.h_im_t[i].norm_sqr());
    let p_imh = p_im.scale(ch.h_im_r.norm_squared());
    let at = &ch.am * &sc.t_an;
    let n_m = cfg.n_m;
    let r_nj = hermitian_part(
        &((&at * at.adjoint()).scale((1.0 - cfg.beta) * cfg.p_a() * ch.g_am)
            + CMat::identity(n_m, n_m).scale(cfg.sigma_m2())),
    );
    let t_ai = b.scale((bpa * ch.g_ai).sqrt());
    let t_mi = ch.h_mi_r.scale((ch.g_im * cfg.p_m()).sqrt());
    let d = DVector::from_fn(m, |i, _| t_ai[i].norm_sqr() + t_mi[i].norm_sqr() + cfg.sigma_r2());
    ThetaLinearization {
        t_aib,
        l_ab,
        p_mib,
        t_mb,
        p_ib,
        p_aim,
        t_am,
        p_im,
        p_imh,
        h_im_r: ch.h_im_r.clone(),
        r_nj,
        t_ai,
        t_mi,
        d,
        sigma_b2: cfg.sigma_b2(),
        active: active.to_vec(),
    }
}

impl ThetaLinearization {
    fn psi_of(&self, theta: &CVec) -> CVec {
        let mut psi = CVec::zeros(theta.len());
        for &i in &self.active {
            psi[i] = theta[i];
        }
        psi
    }

    /// `t_AIB^H theta + l_AB`.
    pub fn bob_amplitude(&self, theta: &CVec) -> C64 {
        self.t_aib.dotc(theta) + self.l_ab
    }

    /// Interference plus noise at Bob after the receive beamformer.
    pub fn bob_interference(&self, theta: &CVec) -> f64 {
        let jam = self.p_mib.map(|z| z.conj()) * theta + self.t_mb.map(|z| z.conj());
        let psi = self.psi_of(theta);
        let relay: f64 = (0..psi.len()).map(|i| self.p_ib[i].norm_sqr() * psi[i].norm_sqr()).sum();
        jam.norm_squared() + relay + self.sigma_b2
    }

    pub fn rate_bob(&self, theta: &CVec) -> f64 {
        (1.0 + self.bob_amplitude(theta).norm_sqr() / self.bob_interference(theta)).log2()
    }

    /// `psi^H P_IM psi`.
    pub fn relay_noise_at_mallory(&self, theta: &CVec) -> f64 {
        self.active.iter().map(|&i| self.p_im[i] * theta[i].norm_sqr()).sum()
    }

    /// `R_MR + R_NJ` as a function of `theta`.
    pub fn mallory_interference(&self, theta: &CVec) -> CMat {
        let h = &self.h_im_r;
        &self.r_nj + (h * h.adjoint()).scale(self.relay_noise_at_mallory(theta))
    }

    pub fn mallory_signal(&self, theta: &CVec) -> CVec {
        &self.p_aim * theta + &self.t_am
    }

    pub fn rate_mallory(&self, theta: &CVec) -> Result<f64> {
        let u = self.mallory_signal(theta);
        let x = self.mallory_interference(theta);
        let inv = hpd_inverse(&x)?;
        Ok((1.0 + quad_form(&inv, &u).max(0.0)).log2())
    }

    pub fn objective(&self, theta: &CVec) -> Result<f64> {
        Ok(self.rate_bob(theta) - self.rate_mallory(theta)?)
    }

    /// `psi^H D psi`, i.e. the relay power for this beam pair.
    pub fn power(&self, theta: &CVec) -> f64 {
        self.active.iter().map(|&i| self.d[i] * theta[i].norm_sqr()).sum()
    }

    /// `D` restricted to the active set (K x K, diagonal).
    pub fn d_bar(&self) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(
            self.active.len(),
            self.active.iter().map(|&i| cr(self.d[i])),
        ))
    }
}
