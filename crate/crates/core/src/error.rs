use thiserror::Error;

/// Everything that can go wrong inside the library.
///
/// Variants fall into three buckets (see [`Error::class`]): bad input that
/// the caller could have checked, numerical situations the caller should
/// treat as "this point is singular", and I/O.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("structure tensor is not antisymmetric at c[{k}][{i}][{j}] (residual {residual:e})")]
    NotAntisymmetric { k: usize, i: usize, j: usize, residual: f64 },
    #[error("brackets span only {rank} of {d2} central directions")]
    NotStratified { rank: usize, d2: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown builtin group {0:?}")]
    UnknownName(String),
    #[error("pfaffian of odd dimension {0}")]
    OddDimension(usize),
    #[error("matrix is not skew (|M+M^T| = {0:e})")]
    NotSkew(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("pfaffian form has an eigenvalue in the rank guard band: {0:?}")]
    AmbiguousClassification(Vec<f64>),
    #[error("eta is zero")]
    ZeroEta,
    #[error("eigenvalue clusters of -J^2 are not separated (gap {gap:e}, tol {tol:e})")]
    ClusterAmbiguous { gap: f64, tol: f64 },
    #[error("no multiplicity profile repeated among {0} samples")]
    InconsistentProfiles(usize),
    #[error("eigenvalues are not strictly separated")]
    RepeatedEigenvalue,
    #[error("matrix is zero")]
    ZeroMatrix,
    #[error("vector is not a unit vector")]
    NotUnit,
    #[error("eta is singular for this group: {0}")]
    SingularEta(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("{skipped} of {total} eta grid points are singular (more than 1%)")]
    TooManySingular { skipped: usize, total: usize },
    #[error("samples do not decay at the ends of the grid ({0:e})")]
    NonDecayingSamples(f64),
    #[error("mesh too coarse to certify covering at eps = {0}")]
    MeshTooCoarse(f64),
    #[error("bad parameters: {0}")]
    BadParameters(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            NotAntisymmetric { .. } | NotStratified { .. } | Shape(_) | UnknownName(_)
            | OddDimension(_) | NotSkew(_) | DimensionMismatch(_) | ZeroEta | ZeroMatrix
            | NotUnit | BadParameters(_) | Parse(_) | GridTooCoarse(_) => ErrorClass::Validation,
            Io(_) => ErrorClass::Io,
            _ => ErrorClass::Numerical,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
