#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamformers;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiments;
pub mod numerics;
pub mod psm;
pub mod system;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
