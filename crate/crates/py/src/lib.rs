//! Python bindings: hidden-subspace money, counterfeiting attacks, network
//! scenarios and the acceptance suite.

use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use quantum_vault::acceptance;
use quantum_vault::attacks::{self, AttackKind};
use quantum_vault::money::{self, BanknotePublicKey, QuantumBanknote, SchemeParams, SchemeSecretKey, Serial};
use quantum_vault::netsim::{self, NetworkConfig, ScenarioScript};
use quantum_vault::qsim::{BitString, Engine, EngineConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Round-trips a serializable value through Python's `json` module.
fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_attack(name: &str) -> PyResult<AttackKind> {
    name.parse().map_err(value_err)
}

fn parse_serial(s: &str) -> PyResult<Serial> {
    u64::from_str_radix(s, 16).map(Serial).map_err(value_err)
}

/// Binary subspace of `{0,1}^n`.
#[pyclass(module = "qvault", frozen)]
struct Subspace {
    inner: money::Subspace,
}

#[pymethods]
impl Subspace {
    #[staticmethod]
    fn random(n: usize, dim: usize, seed: u64) -> PyResult<Self> {
        if dim > n || n > 64 {
            return Err(value_err(format!("need dim <= n <= 64, got dim {dim}, n {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            inner: money::Subspace::random(n, dim, &mut rng),
        })
    }

    #[staticmethod]
    fn from_generators(n: usize, generators: Vec<u64>) -> PyResult<Self> {
        let gens = generators
            .into_iter()
            .map(|g| BitString::new(g, n))
            .collect::<Result<Vec<_>, _>>()
            .map_err(value_err)?;
        Ok(Self {
            inner: money::Subspace::from_generators(n, &gens),
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.ambient_dim()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn dual(&self) -> Self {
        Self {
            inner: self.inner.dual(),
        }
    }

    fn contains(&self, x: u64) -> PyResult<bool> {
        Ok(self.inner.contains(&BitString::new(x, self.inner.ambient_dim()).map_err(value_err)?))
    }

    fn elements(&self) -> Vec<u64> {
        let mut out: Vec<u64> = self.inner.elements().iter().map(BitString::value).collect();
        out.sort_unstable();
        out
    }

    fn __len__(&self) -> usize {
        self.inner.len() as usize
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Subspace(n={}, dim={})", self.inner.ambient_dim(), self.inner.dim())
    }
}

/// A quantum banknote held inside its bank's engine. Spending it through
/// `Bank.certify` leaves this object empty.
#[pyclass(module = "qvault", unsendable)]
struct Note {
    bank: u64,
    serial: Serial,
    value: u64,
    inner: Option<QuantumBanknote>,
}

#[pymethods]
impl Note {
    #[getter]
    fn serial(&self) -> String {
        self.serial.to_string()
    }

    #[getter]
    fn value(&self) -> u64 {
        self.value
    }

    #[getter]
    fn spent(&self) -> bool {
        self.inner.is_none()
    }

    fn __repr__(&self) -> String {
        format!("Note(serial={}, value={}, spent={})", self.serial, self.value, self.inner.is_none())
    }
}

/// Classical destruction certificate.
#[pyclass(module = "qvault", frozen)]
struct Certificate {
    inner: money::DestructionCert,
}

#[pymethods]
impl Certificate {
    #[getter]
    fn serial(&self) -> String {
        self.inner.serial.to_string()
    }

    /// Diagonal-basis readout, qubit 0 first.
    #[getter]
    fn witness(&self) -> String {
        self.inner.witness.iter().map(|b| if b { '1' } else { '0' }).collect()
    }

    fn __repr__(&self) -> String {
        format!("Certificate(serial={}, witness={})", self.inner.serial, self.witness())
    }
}

static NEXT_BANK: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(1);

/// Issuer and vault in one object: mints, verifies and redeems
/// hidden-subspace notes.
#[pyclass(module = "qvault", unsendable)]
struct Bank {
    id: u64,
    sk: SchemeSecretKey,
    pk: money::SchemePublicKey,
    keys: HashMap<Serial, BanknotePublicKey>,
    engine: Engine,
    rng: ChaCha8Rng,
}

impl Bank {
    fn take<'a>(&self, note: &'a mut Note) -> PyResult<(&'a mut Option<QuantumBanknote>, &BanknotePublicKey)> {
        if note.bank != self.id {
            return Err(value_err("note belongs to a different bank"));
        }
        if note.inner.is_none() {
            return Err(value_err(format!("note {} has been spent", note.serial)));
        }
        let key = self.keys.get(&note.serial).expect("minted by this bank");
        Ok((&mut note.inner, key))
    }
}

#[pymethods]
impl Bank {
    #[new]
    #[pyo3(signature = (qubits = 8, seed = 0))]
    fn new(qubits: usize, seed: u64) -> PyResult<Self> {
        let params = SchemeParams::new(qubits).map_err(value_err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pk, sk) = money::gen(params, &mut rng);
        let engine = Engine::new(EngineConfig::new(seed ^ 0x5eed).with_max_qubits(qubits));
        Ok(Self {
            id: NEXT_BANK.fetch_add(1, std::sync::atomic::Ordering::Relaxed),
            sk,
            pk,
            keys: HashMap::new(),
            engine,
            rng,
        })
    }

    #[getter]
    fn qubits(&self) -> usize {
        self.pk.params().qubits()
    }

    #[getter]
    fn active_value(&self) -> u64 {
        self.sk.total_active_value()
    }

    #[getter]
    fn live_states(&self) -> usize {
        self.engine.live_handles()
    }

    fn mint(&mut self, value: u64) -> PyResult<Note> {
        let (_, instruction) = money::bank_mint(&mut self.sk, value, &mut self.rng).map_err(value_err)?;
        let (note, ack) = money::rec_mint(&self.pk, instruction, "vault", &mut self.engine).map_err(runtime_err)?;
        let key = money::finalize_mint(&mut self.sk, &ack).map_err(runtime_err)?;
        let serial = note.serial();
        self.keys.insert(serial, key);
        Ok(Note {
            bank: self.id,
            serial,
            value,
            inner: Some(note),
        })
    }

    /// Public verification. The note stays usable afterwards.
    fn verify(&mut self, note: &mut Note) -> PyResult<bool> {
        let id = self.id;
        let (slot, key) = {
            if note.bank != id {
                return Err(value_err("note belongs to a different bank"));
            }
            (note.inner.take(), self.keys.get(&note.serial))
        };
        let (Some(inner), Some(key)) = (slot, key) else {
            return Err(value_err(format!("note {} has been spent", note.serial)));
        };
        let (ok, after) = money::qv(key, inner, &mut self.engine).map_err(runtime_err)?;
        note.inner = Some(after);
        Ok(ok)
    }

    /// Measures the note into a destruction certificate.
    fn certify(&mut self, note: &mut Note) -> PyResult<Certificate> {
        let (slot, key) = self.take(note)?;
        let key = key.clone();
        let inner = slot.take().expect("checked by take");
        let cert = money::gen_cert(&key, inner, &mut self.engine).map_err(runtime_err)?;
        Ok(Certificate { inner: cert })
    }

    /// Checks a certificate without redeeming it. Returns `(valid, reason)`.
    fn check(&self, cert: &Certificate) -> PyResult<(bool, String)> {
        let out = money::cv(&self.sk, &cert.inner);
        let reason = serde_json::to_value(out.reason).map_err(runtime_err)?;
        Ok((out.valid, reason.as_str().unwrap_or_default().to_owned()))
    }

    /// Verifies and destroys the serial, returning its value.
    fn redeem(&mut self, cert: &Certificate) -> PyResult<u64> {
        let (valid, reason) = self.check(cert)?;
        if !valid {
            return Err(value_err(format!("certificate rejected: {reason}")));
        }
        self.sk.destroy(cert.inner.serial).map_err(runtime_err)
    }

    /// Status of a serial: "pending", "active", "destroyed" or None.
    fn status(&self, serial: &str) -> PyResult<Option<String>> {
        let serial = parse_serial(serial)?;
        Ok(self.sk.status(serial).map(|s| format!("{s:?}").to_lowercase()))
    }
}

/// Outcome of a network run.
#[pyclass(module = "qvault", frozen)]
struct Transcript {
    inner: netsim::Transcript,
}

#[pymethods]
impl Transcript {
    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: netsim::Transcript::from_jsonl(text).map_err(value_err)?,
        })
    }

    fn to_jsonl(&self) -> String {
        self.inner.to_jsonl()
    }

    fn violations(&self) -> Vec<String> {
        self.inner.violations()
    }

    fn audit<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.audit())
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.summary())
    }

    fn receipts<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.receipts())
    }

    fn messages_to(&self, node: &str) -> usize {
        self.inner.messages_to(node)
    }

    fn __len__(&self) -> usize {
        self.inner.records.len()
    }
}

/// Runs a scenario given config and script as JSON text.
#[pyfunction]
#[pyo3(signature = (config, script, seed = None))]
fn run_scenario(config: &str, script: &str, seed: Option<u64>) -> PyResult<Transcript> {
    let mut config = NetworkConfig::from_json(config).map_err(value_err)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let script = ScenarioScript::from_json(script).map_err(value_err)?;
    script.validate(&config).map_err(value_err)?;
    let inner = netsim::run_scenario(config, &script).map_err(runtime_err)?;
    Ok(Transcript { inner })
}

/// Config and script JSON of a built-in scenario.
#[pyfunction]
#[pyo3(signature = (name, seed = acceptance::DEFAULT_SEED))]
fn named_scenario(name: &str, seed: u64) -> PyResult<(String, String)> {
    let (config, script) = netsim::named_scenario(name, seed)
        .ok_or_else(|| value_err(format!("unknown scenario {name:?}; known: {:?}", netsim::SCENARIO_NAMES)))?;
    Ok((config.to_json_pretty(), script.to_json_pretty()))
}

/// Exact success probability of an attack against `qubits`-qubit notes.
#[pyfunction]
fn exact_success(attack: &str, qubits: usize) -> PyResult<f64> {
    let channel = parse_attack(attack)?.build().map_err(runtime_err)?;
    attacks::exact_success(&channel, qubits as _).map_err(runtime_err)
}

/// Runs the cloner optimizer; returns achieved value and convergence data.
#[pyfunction]
#[pyo3(signature = (iterations = attacks::DEFAULT_ITERATIONS, tolerance = attacks::DEFAULT_TOLERANCE))]
fn optimize_cloner<'py>(py: Python<'py>, iterations: usize, tolerance: f64) -> PyResult<Bound<'py, PyAny>> {
    let out = attacks::optimize_cloner(iterations, tolerance).map_err(value_err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("achieved", out.achieved)?;
    d.set_item("iterations", out.iterations)?;
    d.set_item("converged", out.converged)?;
    d.set_item("trace", out.trace)?;
    d.set_item("choi_valid", out.choi.is_valid())?;
    Ok(d.into_any())
}

/// Monte Carlo counterfeiting experiment against Wiesner notes.
#[pyfunction]
#[pyo3(signature = (attack, qubits = 1, trials = 10_000, seed = acceptance::DEFAULT_SEED))]
fn counterfeit_experiment<'py>(
    py: Python<'py>,
    attack: &str,
    qubits: usize,
    trials: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    if qubits == 0 || qubits > quantum_vault::qsim::DEFAULT_MAX_QUBITS {
        return Err(value_err(format!("qubits must be in 1..={}", quantum_vault::qsim::DEFAULT_MAX_QUBITS)));
    }
    let channel = parse_attack(attack)?.build().map_err(runtime_err)?;
    let report = py
        .detach(|| attacks::run_counterfeit_experiment(&channel, qubits, trials, seed))
        .map_err(value_err)?;
    to_py(py, &report)
}

/// Runs the acceptance suite; one dict per criterion.
#[pyfunction]
#[pyo3(signature = (seed = acceptance::DEFAULT_SEED))]
fn verify_acceptance<'py>(py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let report = py.detach(|| acceptance::run_all(seed));
    to_py(py, &report.criteria)
}

#[pymodule]
fn qvault(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Subspace>()?;
    m.add_class::<Bank>()?;
    m.add_class::<Note>()?;
    m.add_class::<Certificate>()?;
    m.add_class::<Transcript>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(named_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(exact_success, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_cloner, m)?)?;
    m.add_function(wrap_pyfunction!(counterfeit_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify_acceptance, m)?)?;
    m.add("SCENARIOS", netsim::SCENARIO_NAMES.to_vec())?;
    m.add("DEFAULT_SEED", acceptance::DEFAULT_SEED)?;
    Ok(())
}
