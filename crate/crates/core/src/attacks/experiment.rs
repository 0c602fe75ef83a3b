use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{exact_success, AttackChannel, AttackError};
use crate::money::{wiesner_mint, WiesnerBank};
use crate::qsim::{Engine, EngineConfig};

const BATCH: usize = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub attack: String,
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
    pub successes: u64,
    pub estimated_rate: f64,
    pub exact_rate: f64,
    /// Binomial standard error at the exact rate.
    pub stderr: f64,
}

impl ExperimentReport {
    /// Distance between estimate and exact value in units of `stderr`.
    pub fn z_score(&self) -> f64 {
        let diff = self.estimated_rate - self.exact_rate;
        if self.stderr > 0.0 {
            diff.abs() / self.stderr
        } else if diff.abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    rng
}

fn run_batch(attack: &AttackChannel, n: usize, trials: usize, seed: u64, batch: usize) -> Result<u64, AttackError> {
    let mut rng = batch_rng(seed, batch);
    let mut engine = Engine::new(EngineConfig::new(rng.next_u64()).with_max_qubits(n.max(1)));
    let mut bank = WiesnerBank::new();
    let mut successes = 0;
    for _ in 0..trials {
        let note = wiesner_mint(&mut bank, n, &mut engine, &mut rng).map_err(|e| match e {
            crate::money::MoneyError::Qsim(q) => AttackError::Qsim(q),
            other => unreachable!("wiesner mint cannot fail with {other}"),
        })?;
        let record = bank.record(note.serial).expect("just minted").clone();
        let qubits = engine.into_qubit_states(note.state)?;
        let mut both_pass = true;
        for (i, rho) in qubits.iter().enumerate() {
            let pair = attack.apply(rho)?;
            let basis = record.bases[i];
            let readout = engine.measure_density(pair, &[basis, basis])?;
            let expected = record.bits.bit(i);
            both_pass &= readout.bit(0) == expected && readout.bit(1) == expected;
        }
        successes += both_pass as u64;
    }
    Ok(successes)
}

/// Monte Carlo counterfeiting experiment.
///
/// Trials are split into fixed-size batches, each with its own RNG stream
/// derived from `seed`, so the result does not depend on thread count.
pub fn run_counterfeit_experiment(
    attack: &AttackChannel,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<ExperimentReport, AttackError> {
    if trials == 0 {
        return Err(AttackError::NoTrials);
    }
    let trials_usize = trials as usize;
    let batches = trials_usize.div_ceil(BATCH);
    let counts: Vec<u64> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let size = BATCH.min(trials_usize - b * BATCH);
            run_batch(attack, n, size, seed, b)
        })
        .collect::<Result<_, _>>()?;
    let successes: u64 = counts.iter().sum();
    let exact_rate = exact_success(attack, n)?;
    Ok(ExperimentReport {
        attack: attack.name().to_owned(),
        n,
        trials,
        seed,
        successes,
        estimated_rate: successes as f64 / trials as f64,
        exact_rate,
        stderr: (exact_rate * (1.0 - exact_rate) / trials as f64).sqrt(),
    })
}
