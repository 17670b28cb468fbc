//! Outer alternating loops and the benchmark schemes.

use std::f64::consts::PI;
use std::time::Instant;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::audit::{audit_state, AuditReport};
use super::Scheme;
use crate::beamformers::{
    build_transmit_subproblem, matched_transmit, opt_receive, opt_transmit, restore_headroom, transmit_start,
};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::numerics::{c, CVec};
use crate::psm::{jo_psm, sop_active_step, sop_passive_step, PsmSettings};
use crate::system::{
    assemble_covariances, equivalent_channels, linearize_theta, power_bar, secrecy_objective, BeamState, PhaseState,
    Scenario,
};

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scheme: Scheme,
    pub seed: u64,
    /// `R_B - R_M` after each outer iteration, starting with the initial point.
    pub trace: Vec<f64>,
    /// `max(0, R_B - R_M)` at the final state (bits/s/Hz).
    pub sr: f64,
    pub iterations: usize,
    pub transmit_iterations: usize,
    pub capped: bool,
    pub wall_ms: f64,
    pub phase: PhaseState,
    pub beam: BeamState,
    pub audit: AuditReport,
    /// Set when a subsolver failed and the last feasible state was returned.
    pub failure: Option<String>,
}

impl RunReport {
    pub fn feasible(&self) -> bool {
        self.failure.is_none() && self.audit.passed()
    }
}

fn unit_phase(rng: &mut ChaCha8Rng) -> crate::numerics::C64 {
    let a = 2.0 * PI * rng.random::<f64>();
    c(a.cos(), a.sin())
}

/// Random passive phases, random active phases with a common amplitude that
/// uses 81% of the relay budget, and the matched transmit beam.
pub fn initial_point(sc: &Scenario, rng: &mut ChaCha8Rng) -> (PhaseState, BeamState) {
    let cfg = &sc.cfg;
    let theta = CVec::from_fn(cfg.m, |_, _| unit_phase(rng));
    let mut phase = PhaseState::new(theta, cfg.active_set.clone());
    let v0 = matched_transmit(&equivalent_channels(sc, &phase.theta).0);
    let mut beam = BeamState {
        v: v0,
        v_br: CVec::from_element(cfg.n_b, c(1.0 / (cfg.n_b as f64).sqrt(), 0.0)),
    };
    if cfg.k() > 0 {
        // two passes: the matched beam depends on the amplitudes
        for _ in 0..2 {
            let unit = power_bar(sc, &phase, &beam);
            let s = (0.81 * cfg.p_rmax() / unit).sqrt();
            let psi = phase.psi_active().scale(s);
            phase.set_psi_active(&psi);
            beam.v = matched_transmit(&equivalent_channels(sc, &phase.theta).0);
        }
    }
    (phase, beam)
}

enum PhaseUpdate {
    Sop,
    Jop,
    Passive,
    Fixed,
}

fn outer_loop(sc: &Scenario, scheme: Scheme, mut phase: PhaseState, mut beam: BeamState, update: PhaseUpdate) -> RunReport {
    let cfg = &sc.cfg;
    let start = Instant::now();
    let mut set = PsmSettings::from_config(cfg);
    let mut trace = vec![];
    let mut failure = None;
    let mut transmit_iterations = 0;
    let mut capped = true;
    let mut iterations = 0;
    match secrecy_objective(sc, &phase, &beam) {
        Ok((obj, _)) => trace.push(obj),
        Err(e) => failure = Some(e.to_string()),
    }
    if failure.is_none() {
        for it in 0..cfg.outer_cap {
            iterations = it + 1;
            set.seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(it as u64);
            let step = (|| -> Result<(PhaseState, BeamState, usize)> {
                let mut phase = phase.clone();
                let mut beam = beam.clone();
                beam.v_br = opt_receive(&assemble_covariances(sc, &phase, &beam)?)?;
                let st = match build_transmit_subproblem(sc, &phase, &beam.v_br) {
                    Ok(st) => st,
                    Err(Error::Infeasible(_)) if restore_headroom(sc, &mut phase) => {
                        build_transmit_subproblem(sc, &phase, &beam.v_br)?
                    }
                    Err(e) => return Err(e),
                };
                let v0 = transmit_start(&st, Some(&beam.v));
                let out = opt_transmit(&st, &v0, cfg.epsilon, cfg.dinkelbach_cap, cfg.solver_tol)?;
                beam.v = out.v;
                let lin = linearize_theta(sc, &beam, &phase.active);
                match update {
                    PhaseUpdate::Sop => {
                        let p = sop_passive_step(&lin, &phase.theta, &set)?;
                        let a = sop_active_step(&lin, &p.theta, &set)?;
                        phase.theta = a.theta;
                    }
                    PhaseUpdate::Passive => {
                        phase.theta = sop_passive_step(&lin, &phase.theta, &set)?.theta;
                    }
                    PhaseUpdate::Jop => {
                        phase.theta = jo_psm(&lin, &phase.theta, &set)?.theta;
                    }
                    PhaseUpdate::Fixed => {}
                }
                Ok((phase, beam, out.iterations))
            })();
            match step.and_then(|(p, b, n)| secrecy_objective(sc, &p, &b).map(|(obj, _)| (p, b, n, obj))) {
                Ok((p, b, n, obj)) => {
                    transmit_iterations += n;
                    let prev = *trace.last().unwrap();
                    if obj < prev - 1e-9 {
                        warn!("{scheme}: outer objective decreased ({prev:e} -> {obj:e}); keeping the previous state");
                        capped = false;
                        break;
                    }
                    phase = p;
                    beam = b;
                    trace.push(obj);
                    if (obj - prev) * std::f64::consts::LN_2 < cfg.epsilon {
                        capped = false;
                        break;
                    }
                }
                Err(e) => {
                    warn!("{scheme}: subsolver failure at outer iteration {iterations}: {e}");
                    failure = Some(e.to_string());
                    capped = false;
                    break;
                }
            }
        }
    }
    if capped {
        warn!("{scheme}: outer loop hit the iteration cap ({})", cfg.outer_cap);
    }
    let obj = trace.last().copied().unwrap_or(0.0);
    let audit = audit_state(sc, &phase, &beam);
    RunReport {
        scheme,
        seed: cfg.seed,
        sr: obj.max(0.0),
        trace,
        iterations,
        transmit_iterations,
        capped: capped && failure.is_none(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        phase,
        beam,
        audit,
        failure,
    }
}

pub fn run_max_sr_sop(cfg: &ScenarioConfig) -> Result<RunReport> {
    let sc = Scenario::new(cfg.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (phase, beam) = initial_point(&sc, &mut rng);
    Ok(outer_loop(&sc, Scheme::Sop, phase, beam, PhaseUpdate::Sop))
}

pub fn run_max_sr_jop(cfg: &ScenarioConfig) -> Result<RunReport> {
    let sc = Scenario::new(cfg.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (phase, beam) = initial_point(&sc, &mut rng);
    Ok(outer_loop(&sc, Scheme::Jop, phase, beam, PhaseUpdate::Jop))
}

pub fn run_benchmark(cfg: &ScenarioConfig, scheme: Scheme) -> Result<RunReport> {
    let passive_cfg = |mut c: ScenarioConfig| {
        c.active_set.clear();
        c
    };
    let (cfg, update) = match scheme {
        Scheme::Sop => return run_max_sr_sop(cfg),
        Scheme::Jop => return run_max_sr_jop(cfg),
        Scheme::None | Scheme::Random => (passive_cfg(cfg.clone()), PhaseUpdate::Fixed),
        Scheme::Passive => (passive_cfg(cfg.clone()), PhaseUpdate::Passive),
        Scheme::PassiveBoost => {
            let mut c = passive_cfg(cfg.clone());
            c.p_a_extra_mw += cfg.p_rmax();
            (c, PhaseUpdate::Passive)
        }
    };
    let sc = Scenario::new(cfg.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut phase, mut beam) = initial_point(&sc, &mut rng);
    if scheme == Scheme::None {
        phase.theta.fill(c(0.0, 0.0));
        beam.v = matched_transmit(&equivalent_channels(&sc, &phase.theta).0);
    }
    Ok(outer_loop(&sc, scheme, phase, beam, update))
}

/// Runs any scheme.
pub fn run_scheme(cfg: &ScenarioConfig, scheme: Scheme) -> Result<RunReport> {
    run_benchmark(cfg, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            m: 8,
            seed,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn zero_beta_gives_zero_rate_throughout() {
        let cfg = ScenarioConfig { beta: 0.0, ..small(1) };
        for r in [run_max_sr_sop(&cfg).unwrap(), run_max_sr_jop(&cfg).unwrap()] {
            assert!(r.trace.iter().all(|&x| x.abs() < 1e-12), "{:?}", r.trace);
            assert_eq!(r.sr, 0.0);
        }
    }

    #[test]
    fn same_seed_replays_identically() {
        for scheme in [Scheme::Sop, Scheme::Jop, Scheme::Random] {
            let a = run_scheme(&small(3), scheme).unwrap();
            let b = run_scheme(&small(3), scheme).unwrap();
            assert_eq!(a.trace, b.trace);
            assert_eq!(a.phase, b.phase);
        }
    }

    #[test]
    fn traces_are_monotone_and_states_feasible() {
        for scheme in [Scheme::Sop, Scheme::Jop] {
            let r = run_scheme(&small(2), scheme).unwrap();
            for w in r.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9);
            }
            assert!(r.feasible(), "{:?}", r.audit.failures());
            assert!(!r.capped);
            assert!(r.sr >= 0.0);
        }
    }

    #[test]
    fn no_irs_keeps_theta_zero() {
        let r = run_benchmark(&small(1), Scheme::None).unwrap();
        assert!(r.phase.theta.iter().all(|z| z.norm() == 0.0));
        assert!(r.audit.irs_off && r.feasible());
    }

    #[test]
    fn random_phases_depend_only_on_the_seed() {
        let a = run_benchmark(&small(4), Scheme::Random).unwrap();
        let b = run_benchmark(&small(4), Scheme::Random).unwrap();
        let c = run_benchmark(&small(5), Scheme::Random).unwrap();
        assert_eq!(a.phase.theta, b.phase.theta);
        assert_ne!(a.phase.theta, c.phase.theta);
        assert!(a.phase.active.is_empty());
        assert!(a.phase.unit_modulus_error() < 1e-15);
    }

    #[test]
    fn boosted_passive_adds_powers_linearly() {
        let cfg = small(1);
        let sc_boost = {
            let mut c = cfg.clone();
            c.active_set.clear();
            c.p_a_extra_mw += cfg.p_rmax();
            c
        };
        assert!((sc_boost.p_a() - 1100.0).abs() < 1e-9);
        let r = run_benchmark(&cfg, Scheme::PassiveBoost).unwrap();
        assert!(r.phase.active.is_empty());
        assert!(r.feasible());
    }

    #[test]
    fn initial_point_uses_81_percent_of_budget() {
        let sc = Scenario::new(small(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (phase, beam) = initial_point(&sc, &mut rng);
        let used = power_bar(&sc, &phase, &beam);
        // the second pass recomputes the beam after scaling
        assert!((used / sc.cfg.p_rmax() - 0.81).abs() < 0.05, "{used}");
        assert!(phase.unit_modulus_error() < 1e-15);
        let psi = phase.psi_active();
        assert!((psi[0].norm() - psi[1].norm()).abs() < 1e-12 * psi[0].norm());
    }
}
