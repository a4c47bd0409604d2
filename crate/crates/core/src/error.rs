use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("operator is not Hermitian (anti-Hermitian residual {0:e})")]
    NotHermitian(f64),

    #[error("operator is not unitary (||U^dag U - I|| = {0:e})")]
    NotUnitary(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("eigenphase {phase} lies within {tolerance:e} of the branch cut at +-pi")]
    BranchCut { phase: f64, tolerance: f64 },

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("dimension {dim} is not divisible by bath dimension {dim_bath}")]
    NotDivisible { dim: usize, dim_bath: usize },

    #[error("qubit index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("total dimension 2^{qubits} exceeds the cap of {cap}")]
    DimensionCap { qubits: usize, cap: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("pulse product is not the identity up to a global phase (overlap {overlap})")]
    PulseProductNotIdentity { overlap: f64 },

    #[error("Magnus convergence domain violated: T*J = {tj} >= pi")]
    ConvergenceDomain { tj: f64 },

    #[error("error phase of the {m}-cycle sequence leaves the principal branch: {source}")]
    PddBranchCut { m: usize, source: Box<Error> },

    #[error("commutation condition violated: max ||[H_P, H_ctrl]|| = {0:e}")]
    CommutationViolated(f64),

    #[error("truncation bound requires hT < 1, got {0}")]
    TruncationDomain(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for the errors that signal a violated Magnus convergence domain
    /// rather than malformed input.
    pub fn is_convergence(&self) -> bool {
        matches!(
            self,
            Error::ConvergenceDomain { .. } | Error::BranchCut { .. } | Error::PddBranchCut { .. }
        )
    }
}
