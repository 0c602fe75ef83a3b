use serde::Serialize;

use super::{tol, BitString, QsimError};

/// Exact distribution of measurement outcomes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    labels: Vec<BitString>,
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(labels: Vec<BitString>, probs: Vec<f64>) -> Result<Self, QsimError> {
        if labels.len() != probs.len() {
            return Err(QsimError::LengthMismatch {
                expected: labels.len(),
                got: probs.len(),
            });
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= -tol::PROBABILITY)) {
            return Err(QsimError::InvalidState(format!("negative probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > tol::PROBABILITY {
            return Err(QsimError::InvalidState(format!(
                "probabilities sum to {total}"
            )));
        }
        let probs = probs.into_iter().map(|p| p.max(0.0)).collect();
        Ok(Self { labels, probs })
    }

    /// Distribution over all bitstrings of a given length, indexed by value.
    pub(crate) fn over_all(len: usize, probs: Vec<f64>) -> Result<Self, QsimError> {
        Self::new(BitString::all(len).collect(), probs)
    }

    pub fn labels(&self) -> &[BitString] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, label: &BitString) -> f64 {
        self.labels
            .iter()
            .zip(&self.probs)
            .filter(|(l, _)| *l == label)
            .map(|(_, p)| *p)
            .sum()
    }

    pub fn support(&self) -> impl Iterator<Item = (&BitString, f64)> {
        self.labels
            .iter()
            .zip(self.probs.iter().copied())
            .filter(|(_, p)| *p > tol::PROBABILITY)
    }
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn shannon_entropy(dist: &OutcomeDistribution) -> f64 {
    dist.probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}
