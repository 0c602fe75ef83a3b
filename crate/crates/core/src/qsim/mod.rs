//! Linear quantum state engine.
//!
//! Honest protocol code works with pure-state registers behind [`StateHandle`],
//! an owned token that every state-changing operation consumes. Adversary
//! channels use [`DensityMatrix`] and [`KrausChannel`]. Reading amplitudes or
//! exact outcome distributions is only possible on an [`Engine`] built in
//! omniscient mode, which test harnesses opt into explicitly.

mod bits;
mod density;
mod distribution;
mod engine;
mod handle;

pub use bits::{BitString, Basis, MAX_BITS};
pub use density::{apply_channel, DensityMatrix, KrausChannel};
pub use distribution::{shannon_entropy, OutcomeDistribution};
pub use engine::{Engine, EngineConfig};
pub use handle::{HandleId, Mode, StateHandle};

use thiserror::Error;

/// Numerical tolerances shared across the engine.
pub mod tol {
    /// Allowed deviation of a live register's squared norm from 1.
    pub const NORM: f64 = 1e-9;
    /// Allowed deviation of `sum K^dagger K` from the identity.
    pub const CHANNEL_TP: f64 = 1e-7;
    /// Smallest eigenvalue tolerated in a density matrix.
    pub const PSD: f64 = 1e-9;
    /// Allowed deviation of a density matrix's trace from 1.
    pub const TRACE: f64 = 1e-9;
    /// Allowed deviation of a distribution's total mass from 1.
    pub const PROBABILITY: f64 = 1e-9;
}

/// Default register size limit.
pub const DEFAULT_MAX_QUBITS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("register of {requested} qubits exceeds the limit of {max}")]
    TooManyQubits { requested: usize, max: usize },
    #[error("register must hold at least one qubit")]
    EmptyRegister,
    #[error("state handle {0} has been consumed")]
    Consumed(HandleId),
    #[error("qubit index {index} out of range for a {qubits}-qubit register")]
    QubitOutOfRange { index: usize, qubits: usize },
    #[error("amplitude access requires an omniscient engine")]
    NotOmniscient,
    #[error("sampled measurement branch has zero probability")]
    ZeroProbabilityBranch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("channel is not trace preserving (deviation {deviation:.3e})")]
    NotTracePreserving { deviation: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("handle {0} is still live; a second token would alias it")]
    WouldAlias(HandleId),
    #[error("unknown handle {0}")]
    UnknownHandle(HandleId),
    #[error("register is not in product form")]
    NotProduct,
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("parse error: {0}")]
    Parse(String),
}
