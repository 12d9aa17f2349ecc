use thiserror::Error;

/// Errors produced by the identification / bounding / synthesis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("rank-deficient matrix: lambda_min = {lambda_min:.6e} (tolerance {tol:.6e})")]
    RankDeficient { lambda_min: f64, tol: f64 },

    #[error("matrix not positive definite: offending eigenvalue {eigenvalue:.6e}")]
    NotPositiveDefinite { eigenvalue: f64 },

    #[error("zero-norm reference matrix in relative error")]
    ZeroNormReference,

    #[error("persistent excitation failed: sigma_min(Psi) = {sigma_min:.6e}")]
    PersistentExcitation { sigma_min: f64 },

    #[error("robust persistent excitation violated: margin = {margin:.6e}")]
    RobustPeViolated { margin: f64 },

    #[error("model not controllable: controllability rank {rank} < {order}")]
    NotControllable { rank: usize, order: usize },

    #[error("LMI solver failure: {0}")]
    SolverFailure(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("unknown preset: {0}")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("malformed data file: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
