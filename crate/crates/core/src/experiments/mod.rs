//! Reproducible scenarios built on the simulator and adapters.
//!
//! * [`toy`]: a tiny network driven to a near-saturated output rate, run with
//!   no adapter, BioDWAM or DWAM, and recorded step by step.
//! * [`classify`]: labels a recorded trace as converged, oscillating or
//!   undetermined.
//! * [`suite`]: base-versus-degraded evaluation over many seeded trials.
//! * [`compare`]: adapter-versus-adapter deltas of the HM metrics.

pub mod classify;
pub mod compare;
pub mod suite;
pub mod toy;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use classify::{classify_trace, ClassifierConfig, StabilityVerdict};
pub use compare::{compare, ComparisonRow, ComparisonTable, RowStatus};
pub use suite::{
    run_degradation_suite, AdapterSetup, ConditionSpec, SuiteConfig, SuiteOutput, SuiteReport,
};
pub use toy::{run_toy, ToyAdapter, ToyScenario, TraceLog, TraceStep};

/// Hex SHA-256 of the compact JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> crate::Result<String> {
    let bytes = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
