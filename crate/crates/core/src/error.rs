use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraspError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("surface gradient is degenerate at ({x:.6}, {y:.6}, {z:.6})")]
    DegenerateNormal { x: f64, y: f64, z: f64 },

    #[error("wrench set needs {needed} affinely independent columns, found rank {found}")]
    NotEnoughWrenches { needed: usize, found: usize },

    #[error("exact epsilon enumeration supports at most {max} wrenches, got {got}")]
    TooManyWrenches { max: usize, got: usize },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("linear program is {0:?}")]
    Lp(crate::lp::LpStatus),

    #[error("quadratic program is infeasible")]
    QpInfeasible,

    #[error("could not draw well-conditioned Hessian probe directions")]
    SingularDirections,

    #[error("mesh is not watertight: {0}")]
    NonWatertightMesh(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = GraspError> = std::result::Result<T, E>;
