use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{tol, Basis, QsimError};

type CMatrix = DMatrix<Complex64>;

/// Largest entry modulus.
pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn qubits_for_dim(dim: usize) -> Result<usize, QsimError> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(QsimError::InvalidDensity(format!(
            "dimension {dim} is not a power of two"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    qubits: usize,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self, QsimError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(QsimError::InvalidDensity(format!(
                "matrix is {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let qubits = qubits_for_dim(matrix.nrows())?;
        let asym = max_abs(&(&matrix - matrix.adjoint()));
        if asym > tol::PSD {
            return Err(QsimError::InvalidDensity(format!(
                "not Hermitian (deviation {asym:.3e})"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > tol::TRACE || trace.im.abs() > tol::TRACE {
            return Err(QsimError::InvalidDensity(format!("trace is {trace}")));
        }
        let rho = Self { matrix, qubits };
        let min = rho
            .eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < -tol::PSD {
            return Err(QsimError::InvalidDensity(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(rho)
    }

    /// `|psi><psi|` for a normalized amplitude vector.
    pub fn from_pure(amplitudes: &[Complex64]) -> Result<Self, QsimError> {
        let v = DMatrix::from_column_slice(amplitudes.len(), 1, amplitudes);
        Self::new(&v * v.adjoint())
    }

    pub fn from_basis_state(basis: Basis, bit: bool) -> Self {
        Self::from_pure(&basis.encode(bit)).expect("basis states are valid")
    }

    pub fn maximally_mixed(qubits: usize) -> Self {
        let dim = 1usize << qubits;
        Self {
            matrix: CMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0),
            qubits,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            matrix: self.matrix.kronecker(&other.matrix),
            qubits: self.qubits + other.qubits,
        }
    }

    /// `<psi| rho |psi>`.
    pub fn expectation(&self, psi: &[Complex64]) -> Result<f64, QsimError> {
        if psi.len() != self.dim() {
            return Err(QsimError::DimensionMismatch {
                expected: self.dim(),
                got: psi.len(),
            });
        }
        let v = DMatrix::from_column_slice(psi.len(), 1, psi);
        Ok((v.adjoint() * &self.matrix * v)[(0, 0)].re)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect()
    }

    pub fn approx_eq(&self, other: &DensityMatrix, eps: f64) -> bool {
        self.dim() == other.dim() && max_abs(&(&self.matrix - &other.matrix)) <= eps
    }

    /// Diagonal of the matrix after rotating each qubit into its measurement basis.
    pub(crate) fn basis_probabilities(&self, bases: &[Basis]) -> Result<Vec<f64>, QsimError> {
        if bases.len() != self.qubits {
            return Err(QsimError::LengthMismatch {
                expected: self.qubits,
                got: bases.len(),
            });
        }
        let u = basis_rotation(bases);
        let rotated = &u * &self.matrix * u.adjoint();
        Ok(rotated.diagonal().iter().map(|z| z.re.max(0.0)).collect())
    }
}

/// `U` such that measuring `U rho U^dagger` in the computational basis
/// equals measuring `rho` qubit-wise in `bases`.
pub(crate) fn basis_rotation(bases: &[Basis]) -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let hadamard = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(-h, 0.0),
        ],
    );
    let identity = CMatrix::identity(2, 2);
    bases
        .iter()
        .fold(CMatrix::identity(1, 1), |acc, b| match b {
            Basis::Computational => acc.kronecker(&identity),
            Basis::Diagonal => acc.kronecker(&hadamard),
        })
}

/// Completely positive, trace-preserving map in Kraus form.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    ops: Vec<CMatrix>,
    input_dim: usize,
    output_dim: usize,
}

impl KrausChannel {
    pub fn new(ops: Vec<CMatrix>) -> Result<Self, QsimError> {
        let first = ops
            .first()
            .ok_or_else(|| QsimError::InvalidChannel("no Kraus operators".into()))?;
        let (output_dim, input_dim) = first.shape();
        qubits_for_dim(input_dim).map_err(|_| {
            QsimError::InvalidChannel(format!("input dimension {input_dim}"))
        })?;
        qubits_for_dim(output_dim).map_err(|_| {
            QsimError::InvalidChannel(format!("output dimension {output_dim}"))
        })?;
        if let Some(bad) = ops.iter().find(|k| k.shape() != (output_dim, input_dim)) {
            return Err(QsimError::InvalidChannel(format!(
                "operator shape {:?} differs from {:?}",
                bad.shape(),
                (output_dim, input_dim)
            )));
        }
        let channel = Self {
            ops,
            input_dim,
            output_dim,
        };
        let deviation = channel.tp_deviation();
        if deviation > tol::CHANNEL_TP {
            return Err(QsimError::NotTracePreserving { deviation });
        }
        Ok(channel)
    }

    pub fn identity(qubits: usize) -> Self {
        let dim = 1usize << qubits;
        Self::new(vec![CMatrix::identity(dim, dim)]).expect("identity is CPTP")
    }

    /// Single-qubit channel sending every state to `I/2`.
    pub fn fully_depolarizing_qubit() -> Self {
        let c = |re: f64, im: f64| Complex64::new(re * 0.5, im * 0.5);
        let paulis = [
            [c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)],
            [c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)],
            [c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)],
            [c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)],
        ];
        Self::new(
            paulis
                .iter()
                .map(|p| CMatrix::from_row_slice(2, 2, p))
                .collect(),
        )
        .expect("Pauli twirl is CPTP")
    }

    /// `rho -> rho (x) |0><0|` on `qubits` input qubits.
    pub fn append_zero_ancilla(qubits: usize) -> Self {
        let dim = 1usize << qubits;
        let ket0 = CMatrix::from_column_slice(2, 1, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        Self::new(vec![CMatrix::identity(dim, dim).kronecker(&ket0)]).expect("isometry is CPTP")
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Largest entry of `|sum K^dagger K - I|`.
    pub fn tp_deviation(&self) -> f64 {
        let sum = self
            .ops
            .iter()
            .fold(CMatrix::zeros(self.input_dim, self.input_dim), |acc, k| {
                acc + k.adjoint() * k
            });
        max_abs(&(sum - CMatrix::identity(self.input_dim, self.input_dim)))
    }

    /// Choi matrix `J = sum_ij Phi(|i><j|) (x) |i><j|`, indexed `(out, in)`.
    pub fn choi(&self) -> CMatrix {
        let dim = self.input_dim * self.output_dim;
        let mut j = CMatrix::zeros(dim, dim);
        for k in &self.ops {
            let v = self.vectorize(k);
            j += &v * v.adjoint();
        }
        j
    }

    fn vectorize(&self, k: &CMatrix) -> CMatrix {
        let mut v = CMatrix::zeros(self.input_dim * self.output_dim, 1);
        for o in 0..self.output_dim {
            for i in 0..self.input_dim {
                v[(o * self.input_dim + i, 0)] = k[(o, i)];
            }
        }
        v
    }

    /// Rebuilds Kraus operators from a Choi matrix laid out as in [`Self::choi`].
    pub fn from_choi(
        choi: &CMatrix,
        input_dim: usize,
        output_dim: usize,
    ) -> Result<Self, QsimError> {
        let dim = input_dim * output_dim;
        if choi.shape() != (dim, dim) {
            return Err(QsimError::DimensionMismatch {
                expected: dim,
                got: choi.nrows(),
            });
        }
        let hermitian = (choi + choi.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = hermitian.symmetric_eigen();
        let mut ops = Vec::new();
        for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda <= 1e-14 {
                continue;
            }
            let scale = Complex64::new(lambda.sqrt(), 0.0);
            let col = eig.eigenvectors.column(idx);
            let mut k = CMatrix::zeros(output_dim, input_dim);
            for o in 0..output_dim {
                for i in 0..input_dim {
                    k[(o, i)] = col[o * input_dim + i] * scale;
                }
            }
            ops.push(k);
        }
        Self::new(ops)
    }
}

/// `Phi(rho) = sum_k K rho K^dagger`.
pub fn apply_channel(rho: &DensityMatrix, channel: &KrausChannel) -> Result<DensityMatrix, QsimError> {
    if rho.dim() != channel.input_dim {
        return Err(QsimError::DimensionMismatch {
            expected: channel.input_dim,
            got: rho.dim(),
        });
    }
    let deviation = channel.tp_deviation();
    if deviation > tol::CHANNEL_TP {
        return Err(QsimError::NotTracePreserving { deviation });
    }
    let out = channel.ops.iter().fold(
        CMatrix::zeros(channel.output_dim, channel.output_dim),
        |acc, k| acc + k * &rho.matrix * k.adjoint(),
    );
    // Trace drift is bounded by the channel tolerance; renormalize so the
    // output meets the tighter density-matrix tolerance.
    let trace = out.trace().re;
    let hermitian = (&out + out.adjoint()) * Complex64::new(0.5 / trace, 0.0);
    DensityMatrix::new(hermitian)
}
