use alloc::string::String;

/// Errors raised by model construction, linear algebra and the checkers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),
    #[error("label `{0}` must appear on both sides with equal dimension")]
    LabelMismatch(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("operator is not Hermitian: |A - A^dag| = {0:e}")]
    NotHermitian(f64),
    #[error("operator is not positive semidefinite: min eigenvalue {0:e}")]
    NotPsd(f64),
    #[error("dense dimension {dim} exceeds cap {cap}; use the factored workflow")]
    DenseCap { dim: usize, cap: usize },
    #[error("trajectory count {count} exceeds cap {cap}")]
    TrajectoryCap { count: usize, cap: usize },
    #[error("invalid model: {0}")]
    Model(String),
    #[error("not correctable: {0}")]
    NotCorrectable(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("projection did not converge: psd residual {psd:e}, affine residual {affine:e}")]
    Projection { psd: f64, affine: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
