//! JSON snapshot of a final state, for later auditing.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::numerics::{c, CVec};
use crate::system::{BeamState, PhaseState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedState {
    pub config_hash: String,
    pub scheme: String,
    pub seed: u64,
    /// 0-based active indices.
    pub active: Vec<usize>,
    /// `[re, im]` pairs.
    pub theta: Vec<[f64; 2]>,
    pub v: Vec<[f64; 2]>,
    pub v_br: Vec<[f64; 2]>,
    pub sr: f64,
}

fn pairs(x: &CVec) -> Vec<[f64; 2]> {
    x.iter().map(|z| [z.re, z.im]).collect()
}

fn unpairs(x: &[[f64; 2]]) -> CVec {
    CVec::from_iterator(x.len(), x.iter().map(|p| c(p[0], p[1])))
}

impl SavedState {
    pub fn new(cfg: &ScenarioConfig, scheme: &str, phase: &PhaseState, beam: &BeamState, sr: f64) -> Self {
        Self {
            config_hash: cfg.hash(),
            scheme: scheme.to_string(),
            seed: cfg.seed,
            active: phase.active.clone(),
            theta: pairs(&phase.theta),
            v: pairs(&beam.v),
            v_br: pairs(&beam.v_br),
            sr,
        }
    }

    pub fn phase(&self) -> PhaseState {
        PhaseState::new(unpairs(&self.theta), self.active.clone())
    }

    pub fn beam(&self) -> BeamState {
        BeamState {
            v: unpairs(&self.v),
            v_br: unpairs(&self.v_br),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("state file: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
