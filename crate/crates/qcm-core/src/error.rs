use thiserror::Error;

/// Errors surfaced by the core library.
///
/// Numerical edge cases inside the estimators (degenerate denominators,
/// negative radicands) are deliberately *not* errors — they set flags on the
/// returned estimates so that noisy raw data never aborts a run.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum QcmError {
    #[error("qubit count mismatch: {0} vs {1}")]
    QubitMismatch(usize, usize),
    #[error("dimension mismatch: operator on {0} qubits, state on {1}")]
    DimensionMismatch(usize, usize),
    #[error("expectation has non-negligible imaginary part {0:.3e}; operator sum is not Hermitian")]
    NotHermitian(f64),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("readout flip probability {0} outside [0, 0.5]")]
    BadFlipProbability(f64),
    #[error("density-matrix path requested for {0} qubits (cap {1})")]
    DensityCapExceeded(usize, usize),
    #[error("parameter vector has length {0}, expected {1}")]
    ParameterLength(usize, usize),
    #[error("RVB ansatz requires an even qubit count, got {0}")]
    OddQubits(usize),
    #[error("invalid edge ({0}, {1}) for {2} qubits")]
    BadEdge(usize, usize, usize),
    #[error("Pauli mask has bits set at or above qubit {0}")]
    MaskOutOfRange(usize),
    #[error("matrix dimension {0} exceeds cap {1}")]
    DimTooLarge(usize, usize),
    #[error("matrix is not Hermitian: max |M - M\u{2020}| entry = {0:.3e}")]
    NotHermitianMatrix(f64),
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("power {0} outside supported range 1..={1}")]
    BadPower(usize, usize),
    #[error("circuit depth {0} outside supported range 1..={1}")]
    BadDepth(usize, usize),
    #[error("reference energy is zero; approximation error undefined")]
    ZeroReference,
    #[error("asymptotic forms require ground energy < 0 and gap > 0 (got E0 = {0}, gap = {1})")]
    BadSpectrum(f64, f64),
    #[error("eigensolver did not converge after {0} iterations (residual {1:.3e})")]
    NoConvergence(usize, f64),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, QcmError>;
