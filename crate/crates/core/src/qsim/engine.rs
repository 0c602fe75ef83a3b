use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::density::DensityMatrix;
use super::distribution::OutcomeDistribution;
use super::handle::{HandleLedger, Register};
use super::{tol, Basis, BitString, HandleId, Mode, QsimError, StateHandle, DEFAULT_MAX_QUBITS};

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EngineConfig {
    pub seed: u64,
    pub max_qubits: usize,
    /// Grants amplitude and exact-distribution access. Test harnesses only.
    pub omniscient: bool,
}

impl EngineConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            max_qubits: DEFAULT_MAX_QUBITS,
            omniscient: false,
        }
    }

    pub fn with_max_qubits(mut self, max_qubits: usize) -> Self {
        self.max_qubits = max_qubits;
        self
    }

    pub fn omniscient(mut self) -> Self {
        self.omniscient = true;
        self
    }
}

/// Owner of the Born-rule random stream and the handle ledger.
///
/// All sampling draws from one seeded ChaCha stream, so a fixed seed and a
/// fixed sequence of calls reproduce the same outcomes.
pub struct Engine {
    rng: ChaCha8Rng,
    config: EngineConfig,
    next_id: u64,
    ledger: Arc<HandleLedger>,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            next_id: 0,
            ledger: Arc::default(),
        }
    }

    /// Shorthand for an omniscient engine with default limits.
    pub fn omniscient(seed: u64) -> Self {
        Self::new(EngineConfig::new(seed).omniscient())
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn is_omniscient(&self) -> bool {
        self.config.omniscient
    }

    fn check_size(&self, n: usize) -> Result<(), QsimError> {
        if n == 0 {
            return Err(QsimError::EmptyRegister);
        }
        if n > self.config.max_qubits {
            return Err(QsimError::TooManyQubits {
                requested: n,
                max: self.config.max_qubits,
            });
        }
        Ok(())
    }

    fn check_omniscient(&self) -> Result<(), QsimError> {
        if self.config.omniscient {
            Ok(())
        } else {
            Err(QsimError::NotOmniscient)
        }
    }

    fn issue(&mut self, qubits: usize, register: Register) -> StateHandle {
        let id = HandleId(self.next_id);
        self.next_id += 1;
        StateHandle::issue(id, qubits, register, Arc::clone(&self.ledger))
    }

    fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    fn sample_index(&mut self, probs: &[f64]) -> usize {
        let total: f64 = probs.iter().sum();
        let target = self.uniform() * total;
        let mut acc = 0.0;
        let mut last_nonzero = 0;
        for (i, p) in probs.iter().enumerate() {
            if *p > 0.0 {
                last_nonzero = i;
                acc += p;
                if target < acc {
                    return i;
                }
            }
        }
        last_nonzero
    }

    // ---- preparation -------------------------------------------------------

    /// Product state of conjugate-coded qubits.
    pub fn prepare_bb84(&mut self, bits: &BitString, bases: &[Basis]) -> Result<StateHandle, QsimError> {
        if bits.len() != bases.len() {
            return Err(QsimError::LengthMismatch {
                expected: bits.len(),
                got: bases.len(),
            });
        }
        self.check_size(bits.len())?;
        let factors = bases
            .iter()
            .enumerate()
            .map(|(i, b)| b.encode(bits.bit(i)))
            .collect();
        Ok(self.issue(bits.len(), Register::Product(factors)))
    }

    /// Computational basis state `|x>`.
    pub fn prepare_basis_state(&mut self, x: &BitString) -> Result<StateHandle, QsimError> {
        self.prepare_bb84(x, &Basis::uniform(x.len(), Basis::Computational))
    }

    /// Equal superposition over a set of basis states.
    pub fn prepare_uniform(&mut self, n: usize, members: &[BitString]) -> Result<StateHandle, QsimError> {
        self.check_size(n)?;
        if members.is_empty() {
            return Err(QsimError::InvalidState("empty superposition".into()));
        }
        if let Some(bad) = members.iter().find(|m| m.len() != n) {
            return Err(QsimError::LengthMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        let mut sorted: Vec<u64> = members.iter().map(|m| m.value()).collect();
        sorted.sort_unstable();
        sorted.dedup();
        let amp = Complex64::new(1.0 / (sorted.len() as f64).sqrt(), 0.0);
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        for v in sorted {
            amps[v as usize] = amp;
        }
        Ok(self.issue(n, Register::Dense(amps)))
    }

    /// Arbitrary normalized state vector of length `2^n`.
    pub fn prepare_amplitudes(&mut self, amplitudes: Vec<Complex64>) -> Result<StateHandle, QsimError> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(QsimError::InvalidState(format!("{dim} amplitudes")));
        }
        let n = dim.trailing_zeros() as usize;
        self.check_size(n)?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > tol::NORM {
            return Err(QsimError::InvalidState(format!("squared norm {norm}")));
        }
        Ok(self.issue(n, Register::Dense(amplitudes)))
    }

    // ---- measurement -------------------------------------------------------

    /// Measures every qubit in its own basis. The handle is consumed.
    pub fn measure_all(&mut self, mut handle: StateHandle, bases: &[Basis]) -> Result<BitString, QsimError> {
        handle.register()?;
        let n = handle.qubits();
        if bases.len() != n {
            return Err(QsimError::LengthMismatch {
                expected: n,
                got: bases.len(),
            });
        }
        let mut out = BitString::zeros(n);
        match handle.take_register()? {
            Register::Product(factors) => {
                for (i, (f, basis)) in factors.iter().zip(bases).enumerate() {
                    let g = rotate(*f, *basis);
                    let p1 = g[1].norm_sqr() / (g[0].norm_sqr() + g[1].norm_sqr());
                    out = out.with_bit(i, self.uniform() < p1);
                }
            }
            Register::Dense(mut amps) => {
                for (i, basis) in bases.iter().enumerate() {
                    if *basis == Basis::Diagonal {
                        hadamard_on(&mut amps, n, i);
                    }
                }
                let probs: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
                let idx = self.sample_index(&probs);
                out = BitString::new(idx as u64, n)?;
            }
            Register::Released => unreachable!("live handle without a register"),
        }
        Ok(out)
    }

    /// Measures one qubit; the returned handle holds the collapsed state.
    pub fn measure_qubit(
        &mut self,
        mut handle: StateHandle,
        index: usize,
        basis: Basis,
    ) -> Result<(bool, StateHandle), QsimError> {
        handle.register()?;
        let n = handle.qubits();
        if index >= n {
            return Err(QsimError::QubitOutOfRange { index, qubits: n });
        }
        let (outcome, register) = match handle.take_register()? {
            Register::Product(mut factors) => {
                let g = rotate(factors[index], basis);
                let p1 = g[1].norm_sqr() / (g[0].norm_sqr() + g[1].norm_sqr());
                let outcome = self.uniform() < p1;
                factors[index] = basis.encode(outcome);
                (outcome, Register::Product(factors))
            }
            Register::Dense(mut amps) => {
                if basis == Basis::Diagonal {
                    hadamard_on(&mut amps, n, index);
                }
                let mask = 1usize << (n - 1 - index);
                let p1: f64 = amps
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| k & mask != 0)
                    .map(|(_, a)| a.norm_sqr())
                    .sum();
                let outcome = self.uniform() < p1;
                let kept = if outcome { p1 } else { 1.0 - p1 };
                if kept <= 0.0 {
                    return Err(QsimError::ZeroProbabilityBranch);
                }
                let scale = 1.0 / kept.sqrt();
                for (k, a) in amps.iter_mut().enumerate() {
                    if (k & mask != 0) == outcome {
                        *a *= scale;
                    } else {
                        *a = Complex64::new(0.0, 0.0);
                    }
                }
                if basis == Basis::Diagonal {
                    hadamard_on(&mut amps, n, index);
                }
                (outcome, Register::Dense(amps))
            }
            Register::Released => unreachable!("live handle without a register"),
        };
        Ok((outcome, self.issue(n, register)))
    }

    /// Applies `H` to every qubit.
    pub fn hadamard_all(&mut self, mut handle: StateHandle) -> Result<StateHandle, QsimError> {
        let n = handle.qubits();
        let register = match handle.take_register()? {
            Register::Product(factors) => Register::Product(
                factors
                    .into_iter()
                    .map(|f| rotate(f, Basis::Diagonal))
                    .collect(),
            ),
            Register::Dense(mut amps) => {
                for q in 0..n {
                    hadamard_on(&mut amps, n, q);
                }
                Register::Dense(amps)
            }
            Register::Released => unreachable!("live handle without a register"),
        };
        Ok(self.issue(n, register))
    }

    /// Two-outcome projective measurement `{P, 1 - P}` where `P` projects onto
    /// the basis states satisfying `pred`.
    pub fn project_predicate<F>(&mut self, mut handle: StateHandle, pred: F) -> Result<(bool, StateHandle), QsimError>
    where
        F: Fn(&BitString) -> bool,
    {
        let mut amps = handle.register()?.to_dense();
        let n = handle.qubits();
        self.check_size(n)?;
        handle.take_register()?;
        let inside: Vec<bool> = BitString::all(n).map(|x| pred(&x)).collect();
        let p_accept: f64 = amps
            .iter()
            .zip(&inside)
            .filter(|(_, keep)| **keep)
            .map(|(a, _)| a.norm_sqr())
            .sum();
        let accepted = self.uniform() < p_accept;
        let mut kept = 0.0;
        for (a, keep) in amps.iter_mut().zip(&inside) {
            if *keep == accepted {
                kept += a.norm_sqr();
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        if kept <= f64::MIN_POSITIVE {
            return Err(QsimError::ZeroProbabilityBranch);
        }
        let scale = 1.0 / kept.sqrt();
        amps.iter_mut().for_each(|a| *a *= scale);
        Ok((accepted, self.issue(n, Register::Dense(amps))))
    }

    /// Destroys the system without reading it.
    pub fn discard(&mut self, mut handle: StateHandle) -> Result<(), QsimError> {
        handle.take_register().map(|_| ())
    }

    /// Samples a computational readout of a mixed state measured qubit-wise in `bases`.
    pub fn measure_density(&mut self, rho: DensityMatrix, bases: &[Basis]) -> Result<BitString, QsimError> {
        let probs = rho.basis_probabilities(bases)?;
        let idx = self.sample_index(&probs);
        BitString::new(idx as u64, rho.qubits())
    }

    /// Hands the physical qubits of a product register over as single-qubit
    /// density matrices. Entangled registers are refused.
    pub fn into_qubit_states(&mut self, mut handle: StateHandle) -> Result<Vec<DensityMatrix>, QsimError> {
        if !matches!(handle.register()?, Register::Product(_)) {
            return Err(QsimError::NotProduct);
        }
        match handle.take_register()? {
            Register::Product(factors) => factors
                .iter()
                .map(|f| DensityMatrix::from_pure(f))
                .collect(),
            _ => unreachable!(),
        }
    }

    // ---- handle ledger -----------------------------------------------------

    pub fn status(&self, id: HandleId) -> Option<Mode> {
        self.ledger.get(id)
    }

    pub fn live_handles(&self) -> usize {
        self.ledger.live_count()
    }

    /// A token for an id that has already been retired. Any operation on it
    /// fails; asking for a live id is refused because it would alias.
    pub fn stale_handle(&self, id: HandleId) -> Result<StateHandle, QsimError> {
        match self.ledger.get(id) {
            None => Err(QsimError::UnknownHandle(id)),
            Some(Mode::Live) => Err(QsimError::WouldAlias(id)),
            Some(Mode::Consumed) => Ok(StateHandle::stale(id, 0, Arc::clone(&self.ledger))),
        }
    }

    // ---- omniscient access -------------------------------------------------

    /// Exact Born-rule distribution. Does not disturb the state.
    pub fn outcome_distribution(
        &self,
        handle: &StateHandle,
        bases: &[Basis],
    ) -> Result<OutcomeDistribution, QsimError> {
        self.check_omniscient()?;
        let n = handle.qubits();
        if bases.len() != n {
            return Err(QsimError::LengthMismatch {
                expected: n,
                got: bases.len(),
            });
        }
        let mut amps = handle.register()?.to_dense();
        for (i, basis) in bases.iter().enumerate() {
            if *basis == Basis::Diagonal {
                hadamard_on(&mut amps, n, i);
            }
        }
        OutcomeDistribution::over_all(n, amps.iter().map(|a| a.norm_sqr()).collect())
    }

    pub fn density_outcome_distribution(
        &self,
        rho: &DensityMatrix,
        bases: &[Basis],
    ) -> Result<OutcomeDistribution, QsimError> {
        self.check_omniscient()?;
        OutcomeDistribution::over_all(rho.qubits(), rho.basis_probabilities(bases)?)
    }

    pub fn amplitudes(&self, handle: &StateHandle) -> Result<Vec<Complex64>, QsimError> {
        self.check_omniscient()?;
        Ok(handle.register()?.to_dense())
    }
}

fn rotate(f: [Complex64; 2], basis: Basis) -> [Complex64; 2] {
    match basis {
        Basis::Computational => f,
        Basis::Diagonal => [(f[0] + f[1]) * H, (f[0] - f[1]) * H],
    }
}

fn hadamard_on(amps: &mut [Complex64], n: usize, qubit: usize) {
    let stride = 1usize << (n - 1 - qubit);
    for base in (0..amps.len()).step_by(stride * 2) {
        for k in base..base + stride {
            let a = amps[k];
            let b = amps[k + stride];
            amps[k] = (a + b) * H;
            amps[k + stride] = (a - b) * H;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn assert_amps(actual: &[Complex64], expected: &[Complex64]) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected) {
            assert!((a - e).norm() < 1e-12, "{actual:?} != {expected:?}");
        }
    }

    fn span(gens: &[&str], n: usize) -> Vec<BitString> {
        // Brute force: keep every string that is a XOR of some subset.
        let gens: Vec<BitString> = gens.iter().map(|g| bits(g)).collect();
        let mut out: Vec<BitString> = (0..1u32 << gens.len())
            .map(|mask| {
                gens.iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .fold(BitString::zeros(n), |acc, (_, g)| acc.xor(g))
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    #[test]
    fn prepare_examples() {
        let mut e = Engine::omniscient(1);
        let h = e.prepare_bb84(&bits("0"), &[Basis::Computational]).unwrap();
        assert_amps(&e.amplitudes(&h).unwrap(), &[c(1.0), c(0.0)]);
        let h = e.prepare_bb84(&bits("1"), &[Basis::Diagonal]).unwrap();
        assert_amps(&e.amplitudes(&h).unwrap(), &[c(H), c(-H)]);
        let h = e
            .prepare_bb84(&bits("01"), &[Basis::Computational, Basis::Diagonal])
            .unwrap();
        assert_amps(&e.amplitudes(&h).unwrap(), &[c(H), c(-H), c(0.0), c(0.0)]);
    }

    #[test]
    fn prepare_errors() {
        let mut e = Engine::new(EngineConfig::new(1));
        assert!(matches!(
            e.prepare_bb84(&bits("01"), &[Basis::Computational]),
            Err(QsimError::LengthMismatch { .. })
        ));
        let long = BitString::zeros(21);
        assert!(matches!(
            e.prepare_bb84(&long, &[Basis::Computational; 21]),
            Err(QsimError::TooManyQubits { requested: 21, max: 20 })
        ));
        let mut small = Engine::new(EngineConfig::new(1).with_max_qubits(4));
        assert!(small.prepare_basis_state(&BitString::zeros(5)).is_err());
    }

    #[test]
    fn measure_all_examples() {
        let mut e = Engine::new(EngineConfig::new(7));
        for _ in 0..200 {
            let plus = e.prepare_bb84(&bits("0"), &[Basis::Diagonal]).unwrap();
            assert_eq!(e.measure_all(plus, &[Basis::Diagonal]).unwrap(), bits("0"));
            let s = e
                .prepare_bb84(&bits("01"), &[Basis::Computational, Basis::Diagonal])
                .unwrap();
            assert_eq!(
                e.measure_all(s, &[Basis::Computational, Basis::Diagonal]).unwrap(),
                bits("01")
            );
        }
        let trials = 20_000;
        let ones = (0..trials)
            .filter(|_| {
                let zero = e.prepare_basis_state(&bits("0")).unwrap();
                e.measure_all(zero, &[Basis::Diagonal]).unwrap().bit(0)
            })
            .count();
        let rate = ones as f64 / trials as f64;
        let stderr = (0.25 / trials as f64).sqrt();
        assert!((rate - 0.5).abs() < 5.0 * stderr, "rate {rate}");
    }

    #[test]
    fn measure_all_dense_matches_product() {
        let mut e = Engine::new(EngineConfig::new(3));
        let s = e
            .prepare_uniform(2, &[bits("01")])
            .unwrap();
        assert_eq!(e.measure_all(s, &[Basis::Computational; 2]).unwrap(), bits("01"));
    }

    #[test]
    fn measure_qubit_examples() {
        let mut e = Engine::omniscient(11);
        let s = e
            .prepare_bb84(&bits("00"), &[Basis::Computational, Basis::Diagonal])
            .unwrap();
        let (b, s) = e.measure_qubit(s, 0, Basis::Computational).unwrap();
        assert!(!b);
        assert_amps(&e.amplitudes(&s).unwrap(), &[c(H), c(H), c(0.0), c(0.0)]);

        let mut ones = 0;
        for _ in 0..2000 {
            let plus = e.prepare_bb84(&bits("0"), &[Basis::Diagonal]).unwrap();
            let (b, s) = e.measure_qubit(plus, 0, Basis::Computational).unwrap();
            let expected = Basis::Computational.encode(b);
            assert_amps(&e.amplitudes(&s).unwrap(), &expected);
            ones += b as usize;
        }
        assert!((ones as f64 / 2000.0 - 0.5).abs() < 5.0 * (0.25f64 / 2000.0).sqrt());

        // Bell pair (|00> + |11>)/sqrt 2: measuring qubit 1 leaves |bb>.
        let mut ones = 0;
        for _ in 0..2000 {
            let bell = e.prepare_amplitudes(vec![c(H), c(0.0), c(0.0), c(H)]).unwrap();
            let (b, s) = e.measure_qubit(bell, 1, Basis::Computational).unwrap();
            let amps = e.amplitudes(&s).unwrap();
            let idx = if b { 3 } else { 0 };
            for (k, a) in amps.iter().enumerate() {
                let want = if k == idx { 1.0 } else { 0.0 };
                assert!((a.norm() - want).abs() < EPS);
            }
            ones += b as usize;
        }
        assert!((ones as f64 / 2000.0 - 0.5).abs() < 5.0 * (0.25f64 / 2000.0).sqrt());
    }

    #[test]
    fn measure_qubit_diagonal_on_dense_register() {
        let mut e = Engine::omniscient(5);
        let minus = e.prepare_amplitudes(vec![c(H), c(-H)]).unwrap();
        let (b, s) = e.measure_qubit(minus, 0, Basis::Diagonal).unwrap();
        assert!(b);
        assert_amps(&e.amplitudes(&s).unwrap(), &[c(H), c(-H)]);
    }

    #[test]
    fn measure_qubit_out_of_range() {
        let mut e = Engine::new(EngineConfig::new(1));
        let s = e.prepare_basis_state(&bits("00")).unwrap();
        assert!(matches!(
            e.measure_qubit(s, 2, Basis::Computational),
            Err(QsimError::QubitOutOfRange { index: 2, qubits: 2 })
        ));
    }

    #[test]
    fn hadamard_examples() {
        let mut e = Engine::omniscient(1);
        let zero = e.prepare_uniform(3, &[bits("000")]).unwrap();
        let plus = e.hadamard_all(zero).unwrap();
        let amp = c(1.0 / 8f64.sqrt());
        assert_amps(&e.amplitudes(&plus).unwrap(), &[amp; 8]);
        let back = e.hadamard_all(plus).unwrap();
        let mut expected = vec![c(0.0); 8];
        expected[0] = c(1.0);
        assert_amps(&e.amplitudes(&back).unwrap(), &expected);
        let one = e.prepare_basis_state(&bits("1")).unwrap();
        let out = e.hadamard_all(one).unwrap();
        assert_amps(&e.amplitudes(&out).unwrap(), &[c(H), c(-H)]);
    }

    #[test]
    fn projection_examples() {
        let mut e = Engine::omniscient(21);
        let a = span(&["1000", "0100"], 4);
        let member = |x: &BitString| a.contains(x);

        let state = e.prepare_uniform(4, &a).unwrap();
        let before = e.amplitudes(&state).unwrap();
        let (ok, state) = e.project_predicate(state, member).unwrap();
        assert!(ok);
        assert_amps(&e.amplitudes(&state).unwrap(), &before);

        let x = e.prepare_basis_state(&bits("0011")).unwrap();
        let (ok, x) = e.project_predicate(x, member).unwrap();
        assert!(!ok);
        let mut expected = vec![c(0.0); 16];
        expected[3] = c(1.0);
        assert_amps(&e.amplitudes(&x).unwrap(), &expected);

        // Acceptance of the uniform superposition: sum of |amp|^2 over A.
        let oracle: f64 = BitString::all(4)
            .filter(|x| a.contains(x))
            .map(|_| 1.0 / 16.0)
            .sum();
        assert!((oracle - 0.25).abs() < EPS);
        let trials = 8000;
        let mut accepted = 0;
        for _ in 0..trials {
            let zero = e.prepare_basis_state(&bits("0000")).unwrap();
            let all = e.hadamard_all(zero).unwrap();
            let (ok, post) = e.project_predicate(all, member).unwrap();
            if ok {
                accepted += 1;
                assert_amps(&e.amplitudes(&post).unwrap(), &before);
            }
        }
        let rate = accepted as f64 / trials as f64;
        let stderr = (oracle * (1.0 - oracle) / trials as f64).sqrt();
        assert!((rate - oracle).abs() < 5.0 * stderr, "rate {rate}");
    }

    #[test]
    fn outcome_distribution_examples() {
        let mut e = Engine::omniscient(2);
        let zero = e.prepare_basis_state(&bits("0")).unwrap();
        let d = e.outcome_distribution(&zero, &[Basis::Computational]).unwrap();
        assert_eq!(d.probs(), &[1.0, 0.0]);
        let d = e.outcome_distribution(&zero, &[Basis::Diagonal]).unwrap();
        assert!((d.probs()[0] - 0.5).abs() < EPS && (d.probs()[1] - 0.5).abs() < EPS);
        // The state is untouched by inspection.
        assert_eq!(e.measure_all(zero, &[Basis::Computational]).unwrap(), bits("0"));

        // span{01, 10} is the whole of {0,1}^2.
        let a = span(&["01", "10"], 2);
        assert_eq!(a.len(), 4);
        let s = e.prepare_uniform(2, &a).unwrap();
        let d = e.outcome_distribution(&s, &[Basis::Computational; 2]).unwrap();
        for x in &a {
            assert!((d.prob(x) - 0.25).abs() < EPS);
        }
    }

    #[test]
    fn inspection_requires_omniscience() {
        let mut e = Engine::new(EngineConfig::new(2));
        let zero = e.prepare_basis_state(&bits("0")).unwrap();
        assert_eq!(
            e.outcome_distribution(&zero, &[Basis::Computational]),
            Err(QsimError::NotOmniscient)
        );
        assert_eq!(e.amplitudes(&zero).unwrap_err(), QsimError::NotOmniscient);
        let rho = DensityMatrix::maximally_mixed(1);
        assert!(e.density_outcome_distribution(&rho, &[Basis::Computational]).is_err());
    }

    #[test]
    fn consumed_handles_refuse_every_operation() {
        let mut e = Engine::new(EngineConfig::new(2));
        let s = e.prepare_basis_state(&bits("01")).unwrap();
        let id = s.id();
        assert_eq!(e.status(id), Some(Mode::Live));
        assert!(matches!(e.stale_handle(id), Err(QsimError::WouldAlias(_))));
        e.measure_all(s, &[Basis::Computational; 2]).unwrap();
        assert_eq!(e.status(id), Some(Mode::Consumed));

        let stale = || e.stale_handle(id).unwrap();
        let stale_a = stale();
        let stale_b = stale();
        let stale_c = stale();
        let stale_d = stale();
        assert_eq!(
            e.measure_all(stale_a, &[Basis::Computational; 2]).unwrap_err(),
            QsimError::Consumed(id)
        );
        assert_eq!(e.hadamard_all(stale_b).unwrap_err(), QsimError::Consumed(id));
        assert_eq!(
            e.project_predicate(stale_c, |_| true).unwrap_err(),
            QsimError::Consumed(id)
        );
        assert!(matches!(
            e.measure_qubit(stale_d, 0, Basis::Computational),
            Err(QsimError::Consumed(_))
        ));
        assert!(matches!(
            e.stale_handle(HandleId(999)),
            Err(QsimError::UnknownHandle(_))
        ));
    }

    #[test]
    fn every_returned_handle_is_fresh_and_input_retired() {
        let mut e = Engine::new(EngineConfig::new(2));
        let s = e.prepare_basis_state(&bits("0")).unwrap();
        let first = s.id();
        let s = e.hadamard_all(s).unwrap();
        assert_ne!(s.id(), first);
        assert_eq!(e.status(first), Some(Mode::Consumed));
        let (_, s2) = e.measure_qubit(s, 0, Basis::Computational).unwrap();
        assert_eq!(e.live_handles(), 1);
        drop(s2);
        assert_eq!(e.live_handles(), 0);
    }

    #[test]
    fn density_measurement_and_factorisation() {
        let mut e = Engine::new(EngineConfig::new(9));
        let s = e
            .prepare_bb84(&bits("10"), &[Basis::Computational, Basis::Diagonal])
            .unwrap();
        let qubits = e.into_qubit_states(s).unwrap();
        assert_eq!(qubits.len(), 2);
        assert!(qubits[0].approx_eq(&DensityMatrix::from_basis_state(Basis::Computational, true), EPS));
        let rho = qubits[1].tensor(&qubits[0]);
        assert_eq!(
            e.measure_density(rho, &[Basis::Diagonal, Basis::Computational]).unwrap(),
            bits("01")
        );
        let dense = e.prepare_uniform(2, &[bits("00"), bits("11")]).unwrap();
        assert_eq!(e.into_qubit_states(dense).unwrap_err(), QsimError::NotProduct);
    }

    #[test]
    fn same_seed_same_outcomes() {
        let run = |seed| {
            let mut e = Engine::new(EngineConfig::new(seed));
            (0..64)
                .map(|_| {
                    let s = e.prepare_basis_state(&BitString::zeros(6)).unwrap();
                    e.measure_all(s, &[Basis::Diagonal; 6]).unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }
}
