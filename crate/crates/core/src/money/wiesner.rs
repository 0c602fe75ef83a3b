use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use super::{MoneyError, Serial};
use crate::qsim::{Basis, BitString, Engine, QsimError, StateHandle};

/// Bank-side secret for one Wiesner note.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WiesnerRecord {
    pub bits: BitString,
    pub bases: Vec<Basis>,
}

/// The private-key bank. Records stay here; only serials and quantum states
/// leave.
#[derive(Debug, Default)]
pub struct WiesnerBank {
    records: BTreeMap<Serial, WiesnerRecord>,
}

impl WiesnerBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, serial: Serial) -> Option<&WiesnerRecord> {
        self.records.get(&serial)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// What the holder of a Wiesner note has: a serial and the qubits.
#[derive(Debug)]
pub struct WiesnerNote {
    pub serial: Serial,
    pub state: StateHandle,
}

/// Mints an `n`-qubit note with uniformly random bits and bases.
pub fn wiesner_mint<R: RngCore + ?Sized>(
    bank: &mut WiesnerBank,
    n: usize,
    engine: &mut Engine,
    rng: &mut R,
) -> Result<WiesnerNote, MoneyError> {
    let bits = BitString::from_bools(&(0..n).map(|_| rng.random::<bool>()).collect::<Vec<_>>())?;
    let bases: Vec<Basis> = (0..n)
        .map(|_| {
            if rng.random::<bool>() {
                Basis::Diagonal
            } else {
                Basis::Computational
            }
        })
        .collect();
    let serial = loop {
        let s = Serial(rng.random());
        if !bank.records.contains_key(&s) {
            break s;
        }
    };
    let state = engine.prepare_bb84(&bits, &bases)?;
    bank.records.insert(serial, WiesnerRecord { bits, bases });
    Ok(WiesnerNote { serial, state })
}

/// Measures each qubit in its recorded basis and compares with the recorded
/// bit. All qubits are measured even after a mismatch.
pub fn wiesner_verify(
    bank: &WiesnerBank,
    serial: Serial,
    state: StateHandle,
    engine: &mut Engine,
) -> Result<(bool, StateHandle), MoneyError> {
    let record = bank.record(serial).ok_or(MoneyError::UnknownSerial(serial))?;
    if !state.is_live() {
        return Err(QsimError::Consumed(state.id()).into());
    }
    if state.qubits() != record.bases.len() {
        return Err(QsimError::LengthMismatch {
            expected: record.bases.len(),
            got: state.qubits(),
        }
        .into());
    }
    let mut state = state;
    let mut valid = true;
    for (i, basis) in record.bases.iter().enumerate() {
        let (outcome, next) = engine.measure_qubit(state, i, *basis)?;
        valid &= outcome == record.bits.bit(i);
        state = next;
    }
    Ok((valid, state))
}
