//! Independent feasibility checks on a final state.

use crate::system::{power_bar, BeamState, PhaseState, Scenario};

pub const UNIT_TOL: f64 = 1e-9;
pub const POWER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    /// Largest `| |phi_i| - 1 |` over passive indices (0 when the IRS is off).
    pub unit_modulus_error: f64,
    /// Whether the surface is switched off (`theta = 0`).
    pub irs_off: bool,
    pub active_matches_config: bool,
    pub v_norm_error: f64,
    pub v_br_norm_error: f64,
    pub relay_power: f64,
    pub p_rmax: f64,
}

impl AuditReport {
    pub fn unit_modulus_ok(&self) -> bool {
        self.irs_off || self.unit_modulus_error <= UNIT_TOL
    }

    pub fn unit_norm_ok(&self) -> bool {
        self.v_norm_error <= UNIT_TOL && self.v_br_norm_error <= UNIT_TOL
    }

    pub fn power_ok(&self) -> bool {
        self.relay_power <= self.p_rmax + POWER_TOL
    }

    pub fn passed(&self) -> bool {
        self.unit_modulus_ok() && self.unit_norm_ok() && self.power_ok() && self.active_matches_config
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = vec![];
        if !self.unit_modulus_ok() {
            out.push(format!("unit modulus violated by {:e}", self.unit_modulus_error));
        }
        if !self.unit_norm_ok() {
            out.push(format!(
                "beamformer norms off by {:e} (v) and {:e} (v_BR)",
                self.v_norm_error, self.v_br_norm_error
            ));
        }
        if !self.power_ok() {
            out.push(format!("relay power {:e} exceeds {:e}", self.relay_power, self.p_rmax));
        }
        if !self.active_matches_config {
            out.push("active set differs from the configuration".into());
        }
        out
    }
}

/// The relay power is recomputed from the channels, independently of the
/// linearized forms used by the optimizers.
pub fn audit_state(sc: &Scenario, phase: &PhaseState, beam: &BeamState) -> AuditReport {
    let irs_off = phase.theta.iter().all(|z| z.norm() == 0.0);
    let active_matches_config = irs_off || phase.active == sc.cfg.active_set;
    AuditReport {
        unit_modulus_error: phase.unit_modulus_error(),
        irs_off,
        active_matches_config,
        v_norm_error: (beam.v.norm() - 1.0).abs(),
        v_br_norm_error: (beam.v_br.norm() - 1.0).abs(),
        relay_power: power_bar(sc, phase, beam),
        p_rmax: sc.cfg.p_rmax(),
    }
}
