use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("spectrum clash: {0}")]
    SpectrumClash(String),
    #[error("pencil is singular (det(sE - A) vanishes identically)")]
    SingularPencil,
    #[error("not stable: {0}")]
    NotStable(String),
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("index {index} exceeds one")]
    IndexTooHigh { index: usize },
    #[error("eigenvalue {re}{im:+}i on the imaginary axis is not semi-simple")]
    ImagJordanBlock { re: f64, im: f64 },
    #[error("pair (A1, B1) is not controllable: {0}")]
    NotControllable(String),
    #[error("certificate mismatch: {0}")]
    CertificateMismatch(String),
    #[error("composition has dimension {dim}, expected {expected}")]
    CompositionDefect { dim: usize, expected: usize },
    #[error("Lagrangian structure is not nonnegative: {0}")]
    NotNonnegative(String),
    #[error("degenerate Lagrangian: dimension {dim} < {expected}")]
    DegenerateLagrangian { dim: usize, expected: usize },
    #[error("structure is not dissipative (PSD defect {0:.3e})")]
    NotDissipative(f64),
    #[error("initial value is not in the system space (distance {0:.3e})")]
    X0NotInSystemSpace(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
