//! Public-key quantum money with classical certificates of destruction.
//!
//! A banknote is the uniform superposition `|A>` over a secret subspace `A`
//! of dimension `n/2`. Verification projects onto `A`, applies `H^n`,
//! projects onto the dual `A⊥`, and transforms back; both projections are
//! driven by sealed membership oracles carried in the banknote's public key.
//! Destroying a note measures it in the diagonal basis, which yields a
//! uniformly random element of `A⊥` as the classical certificate.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize, Serializer};

use super::auth::{mac, mac_verify, AuthKey, AuthTag, Serial, TagVerifier, Transcript};
use super::{MoneyError, SchemeParams, Subspace};
use crate::qsim::{Basis, BitString, Engine, StateHandle};

const SERIAL_RETRIES: usize = 64;

/// Issuer-side registry status of a banknote.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoteStatus {
    Pending,
    Active,
    Destroyed,
}

/// Verification half of the scheme keys.
#[derive(Clone, Debug)]
pub struct SchemePublicKey {
    params: SchemeParams,
    key_id: String,
    verifier: TagVerifier,
}

impl SchemePublicKey {
    pub fn params(&self) -> SchemeParams {
        self.params
    }

    pub fn key_id(&self) -> &str {
        &self.key_id
    }

    /// Checks the issuer tag on a banknote public key.
    pub fn verify_banknote_key(&self, pk: &BanknotePublicKey) -> bool {
        self.verifier.verify(&pk.tag_message(), &pk.ia_tag)
    }
}

/// Issuer key: authentication key plus the serial registry.
pub struct SchemeSecretKey {
    params: SchemeParams,
    key: AuthKey,
    registry: BTreeMap<Serial, RegistryEntry>,
}

struct RegistryEntry {
    note: ClassicalBanknote,
    instruction_tag: AuthTag,
    vault_id: Option<String>,
}

/// The issuer's record of a banknote. The secret subspace is never serialized.
#[derive(Clone, Debug)]
pub struct ClassicalBanknote {
    pub serial: Serial,
    pub value: u64,
    pub status: NoteStatus,
    secret: Subspace,
    pub tag: AuthTag,
}

impl ClassicalBanknote {
    /// Issuer-side access to the hidden subspace.
    pub fn secret(&self) -> &Subspace {
        &self.secret
    }
}

impl Serialize for ClassicalBanknote {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Record<'a> {
            serial: Serial,
            value: u64,
            status: NoteStatus,
            tag: &'a AuthTag,
        }
        Record {
            serial: self.serial,
            value: self.value,
            status: self.status,
            tag: &self.tag,
        }
        .serialize(serializer)
    }
}

/// Classical minting message from the issuer to a vault. Carries the basis
/// of the hidden subspace; `rec_mint` consumes it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MintInstruction {
    pub serial: Serial,
    pub value: u64,
    pub n: usize,
    pub basis: Vec<BitString>,
    pub tag: AuthTag,
}

impl MintInstruction {
    fn tag_message(serial: Serial, value: u64, n: usize, basis: &[BitString]) -> Transcript {
        let mut t = Transcript::new("mint-instruction");
        t.push_u64(serial.0).push_u64(value).push_u64(n as u64);
        for row in basis {
            t.push_u64(row.value());
        }
        t
    }
}

/// Vault acknowledgment that the quantum note has been prepared. Its tag is
/// keyed by the instruction tag, which only the issuer and the recipient of
/// the instruction know.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AckCiphertext {
    pub serial: Serial,
    pub vault_id: String,
    pub tag: AuthTag,
}

fn ack_message(serial: Serial, vault_id: &str) -> Transcript {
    let mut t = Transcript::new("mint-ack");
    t.push_u64(serial.0).push(vault_id.as_bytes());
    t
}

/// Query-only membership predicate for a hidden subspace.
#[derive(Clone)]
pub struct MembershipOracle {
    capability: String,
    subspace: Arc<Subspace>,
}

impl MembershipOracle {
    fn new(capability: String, subspace: Subspace) -> Self {
        Self {
            capability,
            subspace: Arc::new(subspace),
        }
    }

    pub fn contains(&self, v: &BitString) -> bool {
        self.subspace.contains(v)
    }

    pub fn capability(&self) -> &str {
        &self.capability
    }
}

impl fmt::Debug for MembershipOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MembershipOracle({})", self.capability)
    }
}

impl Serialize for MembershipOracle {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.capability)
    }
}

/// Per-banknote public key: serial, value, sealed oracles for `A` and `A⊥`,
/// and the issuer's tag.
#[derive(Clone, Debug, Serialize)]
pub struct BanknotePublicKey {
    pub serial: Serial,
    pub value: u64,
    pub oracle_a: MembershipOracle,
    pub oracle_dual: MembershipOracle,
    pub ia_tag: AuthTag,
}

impl BanknotePublicKey {
    fn tag_message(&self) -> Transcript {
        let mut t = Transcript::new("banknote-pk");
        t.push_u64(self.serial.0)
            .push_u64(self.value)
            .push(self.oracle_a.capability.as_bytes())
            .push(self.oracle_dual.capability.as_bytes());
        t
    }
}

/// A quantum banknote: serial and value metadata around an owned register.
#[derive(Debug)]
pub struct QuantumBanknote {
    serial: Serial,
    value: u64,
    state: StateHandle,
}

impl QuantumBanknote {
    /// Pairs any register with a claimed serial. Nothing is checked here;
    /// that is what `qv` is for.
    pub fn new(serial: Serial, value: u64, state: StateHandle) -> Self {
        Self {
            serial,
            value,
            state,
        }
    }

    pub fn serial(&self) -> Serial {
        self.serial
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn state(&self) -> &StateHandle {
        &self.state
    }

    pub fn into_state(self) -> StateHandle {
        self.state
    }
}

/// Classical certificate that a banknote was measured away.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DestructionCert {
    pub serial: Serial,
    pub witness: BitString,
}

/// Why `cv` accepted or rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertVerdict {
    Accepted,
    UnknownSerial,
    NotActive,
    Spent,
    WrongLength,
    ZeroWitness,
    NotInDual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CvOutcome {
    pub valid: bool,
    pub reason: CertVerdict,
}

impl CvOutcome {
    fn reject(reason: CertVerdict) -> Self {
        Self {
            valid: false,
            reason,
        }
    }
}

/// Generates the scheme keys. Per-note subspaces are drawn at mint time.
pub fn gen<R: RngCore + ?Sized>(params: SchemeParams, rng: &mut R) -> (SchemePublicKey, SchemeSecretKey) {
    let key = AuthKey::generate(rng);
    let pk = SchemePublicKey {
        params,
        key_id: key.fingerprint(),
        verifier: key.verifier(),
    };
    let sk = SchemeSecretKey {
        params,
        key,
        registry: BTreeMap::new(),
    };
    (pk, sk)
}

impl SchemeSecretKey {
    pub fn params(&self) -> SchemeParams {
        self.params
    }

    pub fn key_id(&self) -> String {
        self.key.fingerprint()
    }

    pub fn status(&self, serial: Serial) -> Option<NoteStatus> {
        self.registry.get(&serial).map(|e| e.note.status)
    }

    pub fn note(&self, serial: Serial) -> Option<&ClassicalBanknote> {
        self.registry.get(&serial).map(|e| &e.note)
    }

    pub fn notes(&self) -> impl Iterator<Item = &ClassicalBanknote> {
        self.registry.values().map(|e| &e.note)
    }

    /// Sum of values over Active serials.
    pub fn total_active_value(&self) -> u64 {
        self.notes()
            .filter(|n| n.status == NoteStatus::Active)
            .map(|n| n.value)
            .sum()
    }

    /// Vault that acknowledged the mint of `serial`.
    pub fn minted_by(&self, serial: Serial) -> Option<&str> {
        self.registry.get(&serial).and_then(|e| e.vault_id.as_deref())
    }

    fn note_tag(&self, serial: Serial, value: u64) -> AuthTag {
        let mut t = Transcript::new("classical-note");
        t.push_u64(serial.0).push_u64(value);
        self.key.tag(&t)
    }

    /// Settlement step after a successful `cv`: Active becomes Destroyed.
    pub fn destroy(&mut self, serial: Serial) -> Result<u64, MoneyError> {
        let entry = self
            .registry
            .get_mut(&serial)
            .ok_or(MoneyError::UnknownSerial(serial))?;
        match entry.note.status {
            NoteStatus::Active => {
                entry.note.status = NoteStatus::Destroyed;
                Ok(entry.note.value)
            }
            NoteStatus::Pending => Err(MoneyError::NotActive(serial)),
            NoteStatus::Destroyed => Err(MoneyError::AlreadyDestroyed(serial)),
        }
    }
}

/// Issuer side of minting: fresh serial and subspace, registered as Pending.
pub fn bank_mint<R: RngCore + ?Sized>(
    sk: &mut SchemeSecretKey,
    value: u64,
    rng: &mut R,
) -> Result<(ClassicalBanknote, MintInstruction), MoneyError> {
    if value == 0 {
        return Err(MoneyError::ZeroValue);
    }
    let n = sk.params.qubits();
    let secret = Subspace::random(n, n / 2, rng);
    bank_mint_with(sk, value, secret, rng)
}

/// [`bank_mint`] with a caller-chosen hidden subspace.
pub fn bank_mint_with<R: RngCore + ?Sized>(
    sk: &mut SchemeSecretKey,
    value: u64,
    secret: Subspace,
    rng: &mut R,
) -> Result<(ClassicalBanknote, MintInstruction), MoneyError> {
    if value == 0 {
        return Err(MoneyError::ZeroValue);
    }
    let n = sk.params.qubits();
    if secret.ambient_dim() != n || secret.dim() != n / 2 {
        return Err(MoneyError::MalformedBasis {
            rank: secret.dim(),
            expected: n / 2,
        });
    }
    let serial = (0..SERIAL_RETRIES)
        .map(|_| Serial(rng.random()))
        .find(|s| !sk.registry.contains_key(s))
        .ok_or(MoneyError::SerialSpaceExhausted)?;
    let basis = secret.basis().to_vec();
    let instruction_tag = sk
        .key
        .tag(&MintInstruction::tag_message(serial, value, n, &basis));
    let note = ClassicalBanknote {
        serial,
        value,
        status: NoteStatus::Pending,
        secret,
        tag: sk.note_tag(serial, value),
    };
    sk.registry.insert(
        serial,
        RegistryEntry {
            note: note.clone(),
            instruction_tag,
            vault_id: None,
        },
    );
    let instruction = MintInstruction {
        serial,
        value,
        n,
        basis,
        tag: instruction_tag,
    };
    Ok((note, instruction))
}

/// Vault side of minting: prepares `|A>` and acknowledges.
pub fn rec_mint(
    pk: &SchemePublicKey,
    instruction: MintInstruction,
    vault_id: &str,
    engine: &mut Engine,
) -> Result<(QuantumBanknote, AckCiphertext), MoneyError> {
    let n = pk.params.qubits();
    if instruction.n != n || instruction.basis.iter().any(|r| r.len() != n) {
        return Err(MoneyError::MalformedBasis {
            rank: 0,
            expected: n / 2,
        });
    }
    let subspace = Subspace::from_generators(n, &instruction.basis);
    if subspace.dim() != n / 2 || instruction.basis.len() != n / 2 {
        return Err(MoneyError::MalformedBasis {
            rank: subspace.dim(),
            expected: n / 2,
        });
    }
    let message =
        MintInstruction::tag_message(instruction.serial, instruction.value, n, &instruction.basis);
    if !pk.verifier.verify(&message, &instruction.tag) {
        return Err(MoneyError::AuthenticationFailed);
    }
    let state = engine.prepare_uniform(n, &subspace.elements())?;
    let ack = AckCiphertext {
        serial: instruction.serial,
        vault_id: vault_id.to_owned(),
        tag: mac(
            &instruction.tag.0,
            ack_message(instruction.serial, vault_id).bytes(),
        ),
    };
    let note = QuantumBanknote::new(instruction.serial, instruction.value, state);
    // The instruction, and with it the basis of A, is dropped here.
    drop(instruction);
    Ok((note, ack))
}

/// Issuer checks the acknowledgment, activates the serial and publishes the
/// banknote public key.
pub fn finalize_mint(sk: &mut SchemeSecretKey, ack: &AckCiphertext) -> Result<BanknotePublicKey, MoneyError> {
    let entry = sk
        .registry
        .get(&ack.serial)
        .ok_or(MoneyError::UnknownSerial(ack.serial))?;
    match entry.note.status {
        NoteStatus::Pending => {}
        NoteStatus::Active => return Err(MoneyError::AlreadyActive(ack.serial)),
        NoteStatus::Destroyed => return Err(MoneyError::AlreadyDestroyed(ack.serial)),
    }
    if !mac_verify(
        &entry.instruction_tag.0,
        ack_message(ack.serial, &ack.vault_id).bytes(),
        &ack.tag,
    ) {
        return Err(MoneyError::AuthenticationFailed);
    }
    let secret = &entry.note.secret;
    let value = entry.note.value;
    let mut pk = BanknotePublicKey {
        serial: ack.serial,
        value,
        oracle_a: MembershipOracle::new(format!("oracle:{}:A", ack.serial), secret.clone()),
        oracle_dual: MembershipOracle::new(format!("oracle:{}:A-dual", ack.serial), secret.dual()),
        ia_tag: AuthTag([0; 32]),
    };
    pk.ia_tag = sk.key.tag(&pk.tag_message());
    let entry = sk.registry.get_mut(&ack.serial).expect("checked above");
    entry.note.status = NoteStatus::Active;
    entry.vault_id = Some(ack.vault_id.clone());
    Ok(pk)
}

/// Public verification. Returns the post-measurement note.
pub fn qv(
    pk: &BanknotePublicKey,
    note: QuantumBanknote,
    engine: &mut Engine,
) -> Result<(bool, QuantumBanknote), MoneyError> {
    if note.serial != pk.serial {
        return Err(MoneyError::SerialMismatch {
            key: pk.serial,
            note: note.serial,
        });
    }
    let QuantumBanknote {
        serial,
        value,
        state,
    } = note;
    let (in_a, state) = engine.project_predicate(state, |x| pk.oracle_a.contains(x))?;
    if !in_a {
        return Ok((false, QuantumBanknote::new(serial, value, state)));
    }
    let state = engine.hadamard_all(state)?;
    let (in_dual, state) = engine.project_predicate(state, |x| pk.oracle_dual.contains(x))?;
    let state = engine.hadamard_all(state)?;
    Ok((in_dual, QuantumBanknote::new(serial, value, state)))
}

/// Measures the note in the diagonal basis; the readout is the certificate.
pub fn gen_cert(
    pk: &BanknotePublicKey,
    note: QuantumBanknote,
    engine: &mut Engine,
) -> Result<DestructionCert, MoneyError> {
    if note.serial != pk.serial {
        return Err(MoneyError::SerialMismatch {
            key: pk.serial,
            note: note.serial,
        });
    }
    let serial = note.serial;
    let state = note.into_state();
    let n = state.qubits();
    let witness = engine.measure_all(state, &Basis::uniform(n, Basis::Diagonal))?;
    Ok(DestructionCert { serial, witness })
}

/// Certificate verification. Pure: the status flip is [`SchemeSecretKey::destroy`].
pub fn cv(sk: &SchemeSecretKey, cert: &DestructionCert) -> CvOutcome {
    let Some(entry) = sk.registry.get(&cert.serial) else {
        return CvOutcome::reject(CertVerdict::UnknownSerial);
    };
    match entry.note.status {
        NoteStatus::Active => {}
        NoteStatus::Pending => return CvOutcome::reject(CertVerdict::NotActive),
        NoteStatus::Destroyed => return CvOutcome::reject(CertVerdict::Spent),
    }
    if cert.witness.len() != sk.params.qubits() {
        return CvOutcome::reject(CertVerdict::WrongLength);
    }
    if cert.witness.is_zero() {
        return CvOutcome::reject(CertVerdict::ZeroWitness);
    }
    let in_dual = entry
        .note
        .secret
        .basis()
        .iter()
        .all(|a| !a.dot(&cert.witness));
    if in_dual {
        CvOutcome {
            valid: true,
            reason: CertVerdict::Accepted,
        }
    } else {
        CvOutcome::reject(CertVerdict::NotInDual)
    }
}
