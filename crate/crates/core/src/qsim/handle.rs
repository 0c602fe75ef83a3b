use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::QsimError;

/// Identifier of one register incarnation. Every operation that returns a
/// handle issues a fresh id and retires the input's.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HandleId(pub(crate) u64);

impl fmt::Display for HandleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Live,
    Consumed,
}

/// Internal storage. Product registers keep one normalized factor per qubit
/// and are expanded to a dense vector only when an operation entangles them.
#[derive(Clone, Debug)]
pub(crate) enum Register {
    Product(Vec<[Complex64; 2]>),
    Dense(Vec<Complex64>),
    Released,
}

impl Register {
    pub(crate) fn to_dense(&self) -> Vec<Complex64> {
        match self {
            Register::Dense(v) => v.clone(),
            Register::Product(factors) => {
                let mut out = vec![Complex64::new(1.0, 0.0)];
                for f in factors {
                    let mut next = Vec::with_capacity(out.len() * 2);
                    for a in &out {
                        next.push(a * f[0]);
                        next.push(a * f[1]);
                    }
                    out = next;
                }
                out
            }
            Register::Released => Vec::new(),
        }
    }
}

/// Liveness of every handle an engine has issued.
#[derive(Debug, Default)]
pub(crate) struct HandleLedger {
    modes: Mutex<BTreeMap<HandleId, Mode>>,
}

impl HandleLedger {
    pub(crate) fn set(&self, id: HandleId, mode: Mode) {
        self.modes
            .lock()
            .expect("handle ledger poisoned")
            .insert(id, mode);
    }

    pub(crate) fn get(&self, id: HandleId) -> Option<Mode> {
        self.modes
            .lock()
            .expect("handle ledger poisoned")
            .get(&id)
            .copied()
    }

    pub(crate) fn live_count(&self) -> usize {
        self.modes
            .lock()
            .expect("handle ledger poisoned")
            .values()
            .filter(|m| **m == Mode::Live)
            .count()
    }
}

/// Owned reference to a simulated quantum register.
///
/// The type is deliberately neither `Clone` nor `Copy`. Operations take it by
/// value; those that leave a post-measurement state behind return a new
/// handle with a new id. Dropping a live handle counts as discarding the
/// physical system.
pub struct StateHandle {
    id: HandleId,
    qubits: usize,
    register: Register,
    mode: Mode,
    ledger: Arc<HandleLedger>,
}

impl StateHandle {
    pub(crate) fn issue(
        id: HandleId,
        qubits: usize,
        register: Register,
        ledger: Arc<HandleLedger>,
    ) -> Self {
        ledger.set(id, Mode::Live);
        Self {
            id,
            qubits,
            register,
            mode: Mode::Live,
            ledger,
        }
    }

    /// A token for a retired id. It carries no amplitudes; every operation on
    /// it fails with [`QsimError::Consumed`].
    pub(crate) fn stale(id: HandleId, qubits: usize, ledger: Arc<HandleLedger>) -> Self {
        Self {
            id,
            qubits,
            register: Register::Released,
            mode: Mode::Consumed,
            ledger,
        }
    }

    pub fn id(&self) -> HandleId {
        self.id
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_live(&self) -> bool {
        self.mode == Mode::Live
    }

    pub(crate) fn register(&self) -> Result<&Register, QsimError> {
        match self.mode {
            Mode::Live => Ok(&self.register),
            Mode::Consumed => Err(QsimError::Consumed(self.id)),
        }
    }

    /// Moves the register out and retires this handle.
    pub(crate) fn take_register(&mut self) -> Result<Register, QsimError> {
        if self.mode == Mode::Consumed {
            return Err(QsimError::Consumed(self.id));
        }
        self.mode = Mode::Consumed;
        self.ledger.set(self.id, Mode::Consumed);
        Ok(std::mem::replace(&mut self.register, Register::Released))
    }
}

impl Drop for StateHandle {
    fn drop(&mut self) {
        if self.mode == Mode::Live {
            self.ledger.set(self.id, Mode::Consumed);
        }
    }
}

impl fmt::Debug for StateHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Amplitudes stay out of debug output.
        f.debug_struct("StateHandle")
            .field("id", &self.id)
            .field("qubits", &self.qubits)
            .field("mode", &self.mode)
            .finish()
    }
}
