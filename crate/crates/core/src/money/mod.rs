//! Quantum money: Wiesner private-key notes and hidden-subspace public-key
//! notes with classical certificates of destruction.

mod auth;
mod scheme;
mod subspace;
mod wiesner;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::{QsimError, DEFAULT_MAX_QUBITS};

pub use auth::{AuthTag, Serial, TagVerifier};
pub use scheme::{
    bank_mint, bank_mint_with, cv, finalize_mint, gen, gen_cert, qv, rec_mint, AckCiphertext, BanknotePublicKey, CertVerdict,
    ClassicalBanknote, CvOutcome, DestructionCert, MembershipOracle, MintInstruction, NoteStatus, QuantumBanknote,
    SchemePublicKey, SchemeSecretKey,
};
pub use subspace::Subspace;
pub use wiesner::{wiesner_mint, wiesner_verify, WiesnerBank, WiesnerNote, WiesnerRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MoneyError {
    #[error("qubit count {0} must be even and at least 4")]
    InvalidQubitCount(usize),
    #[error("qubit count {requested} exceeds the engine limit {max}")]
    TooManyQubits { requested: usize, max: usize },
    #[error("banknote value must be positive")]
    ZeroValue,
    #[error("could not find a free serial")]
    SerialSpaceExhausted,
    #[error("malformed subspace basis: rank {rank}, expected {expected}")]
    MalformedBasis { rank: usize, expected: usize },
    #[error("authentication failed")]
    AuthenticationFailed,
    #[error("unknown serial {0}")]
    UnknownSerial(Serial),
    #[error("serial {0} is already active")]
    AlreadyActive(Serial),
    #[error("serial {0} is already destroyed")]
    AlreadyDestroyed(Serial),
    #[error("serial {0} is not active")]
    NotActive(Serial),
    #[error("public key is for {key}, note claims {note}")]
    SerialMismatch { key: Serial, note: Serial },
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

/// Security parameter: the number of qubits per banknote.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeParams {
    qubits: usize,
}

impl SchemeParams {
    pub fn new(qubits: usize) -> Result<Self, MoneyError> {
        Self::with_limit(qubits, DEFAULT_MAX_QUBITS)
    }

    /// Like [`SchemeParams::new`] against a non-default engine limit.
    pub fn with_limit(qubits: usize, max_qubits: usize) -> Result<Self, MoneyError> {
        if qubits < 4 || !qubits.is_multiple_of(2) {
            return Err(MoneyError::InvalidQubitCount(qubits));
        }
        if qubits > max_qubits {
            return Err(MoneyError::TooManyQubits {
                requested: qubits,
                max: max_qubits,
            });
        }
        Ok(Self { qubits })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }
}
