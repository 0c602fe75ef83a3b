//! Discrete-event network simulation around the vault entities.
//!
//! Classical links deliver after a per-link latency and may be subjected
//! to drop, delay or duplicate rules. Quantum links move a note exactly
//! once; the only adversarial action on them is loss. Every run produces a
//! JSON-lines [`Transcript`] that can be re-audited without the simulator.

mod config;
mod scenarios;
mod script;
mod sim;
mod transcript;

use thiserror::Error;

use crate::vault::VaultError;

pub use config::{
    AdversaryPolicy, ClassicalAction, ClassicalRule, LinkSpec, MessageMatch, NetworkConfig, NodeSpec, QuantumAction,
    QuantumRule,
};
pub use scenarios::{demo_config, named_scenario, SCENARIO_NAMES};
pub use script::{fuzz_script, FuzzMix, ScenarioScript, ScriptAction, ScriptOp};
pub use sim::{build_simulation, run_scenario, Simulation, DEFAULT_MAX_TICKS};
pub use transcript::{audit, AuditReport, LedgerSnapshot, Record, Summary, Transcript};

#[derive(Debug, Error)]
pub enum NetsimError {
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("invalid script: {0}")]
    Script(String),
    #[error("no {} link from {from} to {to}", if *.quantum { "quantum" } else { "classical" })]
    NoLink { quantum: bool, from: String, to: String },
    #[error("{0} does not own a live quantum state to send")]
    NotOwner(String),
    #[error("max_ticks must be at least 1")]
    ZeroBudget,
    #[error(transparent)]
    Vault(#[from] VaultError),
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}
