//! Outer loops, benchmark schemes, sweeps, saved states and the feasibility
//! auditor.

pub mod audit;
pub mod runner;
pub mod state;
pub mod sweep;

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

pub use audit::{audit_state, AuditReport};
pub use runner::{run_benchmark, run_max_sr_jop, run_max_sr_sop, run_scheme, RunReport};
pub use state::SavedState;
pub use sweep::{run_sweep, write_csv, SweepParam, SweepRow, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Sop,
    Jop,
    Passive,
    PassiveBoost,
    Random,
    None,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Sop,
        Scheme::Jop,
        Scheme::Passive,
        Scheme::PassiveBoost,
        Scheme::Random,
        Scheme::None,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Scheme::Sop => "sop",
            Scheme::Jop => "jop",
            Scheme::Passive => "passive",
            Scheme::PassiveBoost => "passive_boost",
            Scheme::Random => "random",
            Scheme::None => "none",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    /// Accepts both `passive_boost` and `passive-boost`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Scheme::ALL
            .into_iter()
            .find(|x| x.id() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme '{s}'")))
    }
}
