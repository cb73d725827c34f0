use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("newest-vertex assignment violates the matching condition: {0}")]
    NonMatchingMesh(String),
    #[error("invalid mesh geometry: {0}")]
    InvalidGeometry(String),
    #[error("mesh file parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },
    #[error("refinement closure did not terminate")]
    ClosureDiverged,
    #[error("level {0} is not part of the hierarchy")]
    LevelNotInHierarchy(usize),
    #[error("trace interpolation is not exact: {0}")]
    DegreeMismatch(String),
    #[error("spaces are defined on different meshes")]
    MeshMismatch,
    #[error("oscillatory quadrature did not converge on element {element} (degree cap {cap})")]
    QuadratureNonConvergent { element: usize, cap: usize },
    #[error("error quadrature did not converge up to degree {cap}")]
    ErrorQuadrature { cap: usize },
    #[error("patch Gram matrix of vertex {vertex} is not positive definite")]
    SingularPatch { vertex: usize },
    #[error("matrix is not Hermitian positive definite")]
    NotHpd,
    #[error("dense dimension {dim} exceeds the cap {cap}")]
    DimCapExceeded { dim: usize, cap: usize },
    #[error("Lanczos breakdown after {restarts} restarts")]
    Breakdown { restarts: usize },
    #[error("invalid Chebyshev interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
    #[error("per-level spaces are not nested: inclusion residual {residual:e}")]
    NonNestedSpaces { residual: f64 },
    #[error("iteration cap {iterations} reached with relative residual {residual:e}")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("Lanczos breakdown with nonzero residual {residual:e}")]
    LucklessBreakdown { residual: f64 },
    #[error("no negative harmonic Ritz value available yet")]
    NoNegativeRitzYet,
    #[error("meshes are not nested")]
    NonNestedMeshes,
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
