//! Phase-shift designs: the separate (SO) and joint (JO) optimizers.

pub mod bounds;
pub mod dual_search;
pub mod jop;
pub mod sop;

pub use dual_search::dual_search;
pub use jop::{build_jop_surrogate, jo_psm, jop_step, JopStep, JopSurrogateState};
pub use sop::{build_active_state, build_passive_sdr, sop_active_step, sop_passive_step, ActiveLmiState, PassiveSdrState};

use crate::config::ScenarioConfig;

/// Tolerances and budgets shared by the phase-shift steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PsmSettings {
    pub eps: f64,
    pub tol: f64,
    pub trials: usize,
    pub inner_cap: usize,
    pub seed: u64,
    pub p_rmax: f64,
}

impl PsmSettings {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            eps: cfg.epsilon,
            tol: cfg.solver_tol,
            trials: cfg.trials,
            inner_cap: cfg.inner_cap,
            seed: cfg.seed,
            p_rmax: cfg.p_rmax(),
        }
    }
}

/// Result of one phase-shift step, with the true objective before and after.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub theta: nalgebra::DVector<crate::numerics::C64>,
    pub accepted: bool,
    pub objective_before: f64,
    pub objective_after: f64,
    pub surrogate_trace: Vec<f64>,
}
