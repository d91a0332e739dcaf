use thiserror::Error;

/// Errors produced by the kernels and their input validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("zero variance: all points are identical")]
    ZeroVariance,
    #[error("length mismatch: {what} has {got} rows, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite input in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid too large: {cells} cells requested, cap is {cap}")]
    GridTooLarge { cells: usize, cap: usize },
    #[error("complex mask: quadrature set is not pair-symmetric")]
    ComplexMask,
    #[error("complex mask: imaginary residue {residue:e} exceeds {tolerance:e}")]
    ImaginaryResidue { residue: f64, tolerance: f64 },
    #[error("no closed form wired for dimension {0}")]
    NoClosedForm(usize),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
