//! Counterfeiting adversaries against Wiesner money.
//!
//! Every attack here is a single-qubit-to-two-qubit channel applied
//! independently to each qubit of the note; both output registers are then
//! checked against the bank's records.

mod cloner;
mod experiment;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::qsim::{apply_channel, Basis, DensityMatrix, KrausChannel, QsimError};

pub use cloner::{optimize_cloner, ChoiMatrix, CloneOptimization, DEFAULT_ITERATIONS, DEFAULT_TOLERANCE};
pub use experiment::{run_counterfeit_experiment, ExperimentReport};

type CMatrix = nalgebra::DMatrix<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("attack must map one qubit to two, got {input_dim} -> {output_dim}")]
    NotSingleQubitCloner { input_dim: usize, output_dim: usize },
    #[error("unknown attack {0:?}")]
    UnknownAttack(String),
    #[error("at least one trial is required")]
    NoTrials,
    #[error("at least one iteration is required")]
    NoIterations,
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

/// A named 1 -> 2 qubit channel.
#[derive(Clone, Debug)]
pub struct AttackChannel {
    name: String,
    channel: KrausChannel,
}

impl AttackChannel {
    pub fn new(name: impl Into<String>, channel: KrausChannel) -> Result<Self, AttackError> {
        if channel.input_dim() != 2 || channel.output_dim() != 4 {
            return Err(AttackError::NotSingleQubitCloner {
                input_dim: channel.input_dim(),
                output_dim: channel.output_dim(),
            });
        }
        Ok(Self {
            name: name.into(),
            channel,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn channel(&self) -> &KrausChannel {
        &self.channel
    }

    /// Applies the attack to one qubit.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix, AttackError> {
        Ok(apply_channel(rho, &self.channel)?)
    }
}

/// Selector used by the CLI and bindings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    Fabricate,
    RandomBasis,
    Optimal,
}

impl std::str::FromStr for AttackKind {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fabricate" | "keep-and-fabricate" => Ok(Self::Fabricate),
            "random-basis" | "measure-random-basis" => Ok(Self::RandomBasis),
            "optimal" | "optimal-cloner" => Ok(Self::Optimal),
            other => Err(AttackError::UnknownAttack(other.to_owned())),
        }
    }
}

impl AttackKind {
    /// Builds the channel. The optimal cloner runs the optimizer with
    /// default settings.
    pub fn build(self) -> Result<AttackChannel, AttackError> {
        match self {
            Self::Fabricate => Ok(attack_keep_and_fabricate()),
            Self::RandomBasis => Ok(attack_measure_random_basis()),
            Self::Optimal => Ok(optimize_cloner(cloner::DEFAULT_ITERATIONS, cloner::DEFAULT_TOLERANCE)?.attack),
        }
    }
}

/// Keeps the original qubit and fabricates a fresh `|0>` as the copy.
pub fn attack_keep_and_fabricate() -> AttackChannel {
    AttackChannel::new("keep-and-fabricate", KrausChannel::append_zero_ancilla(1))
        .expect("1 -> 2 isometry")
}

/// Measures in a uniformly chosen basis and emits two copies of the result.
pub fn attack_measure_random_basis() -> AttackChannel {
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut ops = Vec::with_capacity(4);
    for basis in [Basis::Computational, Basis::Diagonal] {
        for bit in [false, true] {
            let k = basis.encode(bit);
            let ket = CMatrix::from_column_slice(2, 1, &k);
            let out = ket.kronecker(&ket);
            ops.push(out * ket.adjoint() * Complex64::new(half, 0.0));
        }
    }
    AttackChannel::new(
        "measure-random-basis",
        KrausChannel::new(ops).expect("rank-one measure-and-prepare is CPTP"),
    )
    .expect("1 -> 2 channel")
}

pub(crate) fn bb84_states() -> [(Basis, bool, [Complex64; 2]); 4] {
    [
        (Basis::Computational, false, Basis::Computational.encode(false)),
        (Basis::Computational, true, Basis::Computational.encode(true)),
        (Basis::Diagonal, false, Basis::Diagonal.encode(false)),
        (Basis::Diagonal, true, Basis::Diagonal.encode(true)),
    ]
}

/// Average over the four BB84 inputs of the probability that both output
/// qubits pass verification.
pub fn per_qubit_success(attack: &AttackChannel) -> Result<f64, AttackError> {
    let mut total = 0.0;
    for (_, _, psi) in bb84_states() {
        let rho = DensityMatrix::from_pure(&psi)?;
        let out = attack.apply(&rho)?;
        let pair: Vec<Complex64> = (0..4).map(|k| psi[k >> 1] * psi[k & 1]).collect();
        total += out.expectation(&pair)?;
    }
    Ok(total / 4.0)
}

/// Exact counterfeiting probability against an `n`-qubit note.
pub fn exact_success(attack: &AttackChannel, n: usize) -> Result<f64, AttackError> {
    Ok(per_qubit_success(attack)?.powi(n as i32))
}
