use std::fmt;

use thiserror::Error;

/// Which projector axiom a matrix failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axiom {
    Hermitian,
    Idempotent,
    /// `P_D + P_N + P_R = I`
    Completeness,
    MutualOrthogonality,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axiom::Hermitian => "hermiticity (P = P*)",
            Axiom::Idempotent => "idempotency (P^2 = P)",
            Axiom::Completeness => "completeness (P_D + P_N + P_R = I)",
            Axiom::MutualOrthogonality => "mutual orthogonality (P_i P_j = 0)",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("projector axiom violated: {axiom} fails for {matrix} with defect {defect:.3e}")]
    ProjectorAxiomViolation {
        axiom: Axiom,
        matrix: &'static str,
        defect: f64,
    },
    #[error("lambda is not hermitian on Ran P_R (defect {defect:.3e})")]
    LambdaNotHermitian { defect: f64 },
    #[error("lambda is not invertible on Ran P_R (relative margin {margin:.3e})")]
    LambdaNotInvertibleOnRange { margin: f64 },
    #[error("edge {edge} has non-positive or non-finite length {length}")]
    InvalidLength { edge: usize, length: f64 },
    #[error("endpoint indices are not a permutation of the boundary slots: {0}")]
    InvalidSlots(String),
    #[error("boundary slot {0} is not assigned to any vertex")]
    UnassignedSlot(usize),
    #[error("boundary slot {0} is assigned to more than one vertex")]
    ConflictingAssignment(usize),
    #[error("scale parameter must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("graph must have at least one edge")]
    EmptyGraph,
}

#[derive(Debug, Error)]
pub enum SubspaceError {
    #[error("ambient dimensions differ: {0} vs {1}")]
    AmbientMismatch(usize, usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not an orthogonal projector (defect {0:.3e})")]
    NotAProjector(f64),
    #[error(
        "non-resonance equivalence violated: projected intersection has dimension {nrc_dimension} \
         but the form has nullity {n_zero}"
    )]
    EquivalenceViolation { nrc_dimension: usize, n_zero: usize },
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid window ({lo}, {hi})")]
    InvalidWindow { lo: f64, hi: f64 },
    #[error("lambda = {lambda} is not an eigenvalue (smallest singular value {sigma:.3e} above threshold {threshold:.3e})")]
    NotAnEigenvalue {
        lambda: f64,
        sigma: f64,
        threshold: f64,
    },
    #[error("invalid solver option: {0}")]
    InvalidOption(String),
}

#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("kernel of the unperturbed operator has dimension {found}, expected m0 = {expected}")]
    KernelMismatch { expected: usize, found: usize },
    #[error("invalid scale grid: {0}")]
    InvalidGrid(String),
    #[error("could not resolve {wanted} eigenvalues at epsilon = {epsilon} (found {found})")]
    WindowExhausted {
        epsilon: f64,
        wanted: usize,
        found: usize,
    },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<serde_json::Error> for ConfigError {
    fn from(e: serde_json::Error) -> Self {
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        let message = e.to_string();
        ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: message.strip_suffix(&suffix).unwrap_or(&message).to_string(),
        }
    }
}
