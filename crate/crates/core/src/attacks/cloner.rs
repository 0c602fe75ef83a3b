use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::{bb84_states, per_qubit_success, AttackChannel, AttackError};
use crate::qsim::KrausChannel;

type CMatrix = DMatrix<Complex64>;

pub const DEFAULT_ITERATIONS: usize = 200;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

const D_IN: usize = 2;
const D_OUT: usize = 4;
const DIM: usize = D_IN * D_OUT;
const PROJECTION_ROUNDS: usize = 10_000;
const PSD_TOL: f64 = 1e-7;
const TRACE_TOL: f64 = 1e-6;

/// Choi matrix of a 1 -> 2 qubit channel, indexed `(out * 2 + in)`.
/// Trace preservation reads `Tr_out J = I_2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    matrix: CMatrix,
}

impl ChoiMatrix {
    pub fn from_channel(channel: &AttackChannel) -> Self {
        Self {
            matrix: channel.channel().choi(),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Most negative eigenvalue, clipped at zero.
    pub fn psd_violation(&self) -> f64 {
        hermitize(&self.matrix)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, e| acc.max(-e))
    }

    /// Largest entry of `|Tr_out J - I|`.
    pub fn trace_violation(&self) -> f64 {
        let s = partial_trace_out(&self.matrix) - CMatrix::identity(D_IN, D_IN);
        s.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_valid(&self) -> bool {
        self.psd_violation() <= PSD_TOL && self.trace_violation() <= TRACE_TOL
    }

    /// Linear counterfeiting objective `Re Tr(J W)`.
    pub fn objective(&self) -> f64 {
        objective(&self.matrix, &weight())
    }
}

/// Result of [`optimize_cloner`].
#[derive(Clone, Debug)]
pub struct CloneOptimization {
    pub attack: AttackChannel,
    pub choi: ChoiMatrix,
    /// Per-qubit success of `attack`, from the exact evaluator.
    pub achieved: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective of each accepted iterate, starting with the initial point.
    pub trace: Vec<f64>,
}

#[derive(Serialize)]
struct Summary {
    achieved: f64,
    iterations: usize,
    converged: bool,
}

impl Serialize for CloneOptimization {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        Summary {
            achieved: self.achieved,
            iterations: self.iterations,
            converged: self.converged,
        }
        .serialize(serializer)
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

fn partial_trace_out(j: &CMatrix) -> CMatrix {
    let mut s = CMatrix::zeros(D_IN, D_IN);
    for o in 0..D_OUT {
        for i in 0..D_IN {
            for k in 0..D_IN {
                s[(i, k)] += j[(o * D_IN + i, o * D_IN + k)];
            }
        }
    }
    s
}

/// `W = 1/4 sum_psi |psi psi><psi psi| (x) |psi><psi|^T`, so that
/// `Re Tr(J W)` is the per-qubit double-pass probability.
fn weight() -> CMatrix {
    let mut w = CMatrix::zeros(DIM, DIM);
    for (_, _, psi) in bb84_states() {
        let ket = CMatrix::from_column_slice(2, 1, &psi);
        let pair = ket.kronecker(&ket);
        let target = &pair * pair.adjoint();
        let input = (&ket * ket.adjoint()).transpose();
        w += target.kronecker(&input);
    }
    w * c(0.25)
}

fn objective(j: &CMatrix, w: &CMatrix) -> f64 {
    (j * w).trace().re
}

fn project_psd(m: &CMatrix) -> CMatrix {
    let eig = hermitize(m).symmetric_eigen();
    let mut out = CMatrix::zeros(DIM, DIM);
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > 0.0 {
            let v = eig.eigenvectors.column(idx);
            out += v * v.adjoint() * c(lambda);
        }
    }
    out
}

fn project_affine(m: &CMatrix) -> CMatrix {
    let excess = partial_trace_out(m) - CMatrix::identity(D_IN, D_IN);
    m - CMatrix::identity(D_OUT, D_OUT).kronecker(&excess) * c(1.0 / D_OUT as f64)
}

/// Euclidean projection onto {PSD} ∩ {Tr_out J = I} by Dykstra's
/// alternating projections.
fn project_feasible(point: &CMatrix, tolerance: f64) -> CMatrix {
    let mut x = point.clone();
    let mut p = CMatrix::zeros(DIM, DIM);
    let mut q = CMatrix::zeros(DIM, DIM);
    let mut y = x.clone();
    for _ in 0..PROJECTION_ROUNDS {
        y = project_psd(&(&x + &p));
        p = &x + &p - &y;
        let next = project_affine(&(&y + &q));
        q = &y + &q - &next;
        let gap = (&next - &y).iter().map(|z| z.norm()).fold(0.0, f64::max);
        x = next;
        if gap < tolerance {
            break;
        }
    }
    y
}

/// Rescales a PSD matrix so that `Tr_out J = I` holds exactly.
fn normalize(j: &CMatrix) -> Option<CMatrix> {
    let s = hermitize(&partial_trace_out(j));
    let eig = s.symmetric_eigen();
    if eig.eigenvalues.iter().any(|e| *e <= 1e-12) {
        return None;
    }
    let mut inv_sqrt = CMatrix::zeros(D_IN, D_IN);
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(idx);
        inv_sqrt += v * v.adjoint() * c(1.0 / lambda.sqrt());
    }
    let lift = CMatrix::identity(D_OUT, D_OUT).kronecker(&inv_sqrt);
    Some(hermitize(&(&lift * j * &lift)))
}

/// Maximizes the per-qubit counterfeiting objective over all 1 -> 2 qubit
/// channels by projected gradient ascent on the Choi matrix.
///
/// Every accepted iterate is an exactly trace-preserving PSD Choi matrix,
/// and the objective never decreases between accepted iterates. The step
/// doubles after an improving step and halves after a rejected one.
pub fn optimize_cloner(iterations: usize, tolerance: f64) -> Result<CloneOptimization, AttackError> {
    if iterations == 0 {
        return Err(AttackError::NoIterations);
    }
    let w = weight();
    let projection_tol = (tolerance * 1e-2).max(1e-14);
    let mut j = CMatrix::identity(DIM, DIM) * c(1.0 / D_OUT as f64);
    let mut value = objective(&j, &w);
    let mut trace = vec![value];
    let mut step = 1.0;
    let mut converged = false;
    let mut used = 0;
    for _ in 0..iterations {
        used += 1;
        let candidate = normalize(&project_feasible(&(&j + &w * c(step)), projection_tol));
        let improved = candidate
            .map(|cand| (objective(&cand, &w), cand))
            .filter(|(v, _)| *v > value);
        match improved {
            Some((v, cand)) => {
                let gain = v - value;
                j = cand;
                value = v;
                trace.push(v);
                step = (step * 2.0).min(1e6);
                if gain < tolerance {
                    converged = true;
                    break;
                }
            }
            None => {
                step *= 0.5;
                if step < 1e-12 {
                    converged = true;
                    break;
                }
            }
        }
    }
    let channel = KrausChannel::from_choi(&j, D_IN, D_OUT)?;
    let attack = AttackChannel::new("optimal-cloner", channel)?;
    let achieved = per_qubit_success(&attack)?;
    Ok(CloneOptimization {
        choi: ChoiMatrix { matrix: j },
        attack,
        achieved,
        iterations: used,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::{attack_keep_and_fabricate, attack_measure_random_basis};

    #[test]
    fn objective_matches_evaluator_on_fixed_attacks() {
        for (a, want) in [
            (attack_keep_and_fabricate(), 0.5),
            (attack_measure_random_basis(), 0.625),
        ] {
            let choi = ChoiMatrix::from_channel(&a);
            assert!(choi.is_valid());
            assert!((choi.objective() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_projection_is_exact() {
        let m = CMatrix::from_fn(DIM, DIM, |r, k| c((r * 3 + k) as f64 * 0.1));
        let p = project_affine(&m);
        let s = partial_trace_out(&p) - CMatrix::identity(D_IN, D_IN);
        assert!(s.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn reaches_three_quarters() {
        let out = optimize_cloner(DEFAULT_ITERATIONS, DEFAULT_TOLERANCE).unwrap();
        assert!(out.achieved >= 0.7495, "{}", out.achieved);
        assert!(out.achieved <= 0.751, "{}", out.achieved);
        assert!(out.choi.is_valid());
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert!(out.trace.iter().all(|v| *v <= 0.751));
    }
}
