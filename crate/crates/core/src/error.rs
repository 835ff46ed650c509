use std::path::PathBuf;

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, ScatterError>;

#[derive(Debug, Error)]
pub enum ScatterError {
    #[error("invalid obstacle: {0}")]
    InvalidGeometry(String),

    #[error("face is not planar: travel phase varies by {spread:.3e} across its vertices")]
    NonPlanar { spread: f64 },

    #[error("ray starting at ({x0}, {y0}) strikes an edge")]
    EdgeHit { x0: f64, y0: f64 },

    #[error("reflection coefficient has a pole at lambda = {0}")]
    PoleAtLambda(Complex64),

    #[error("impedance must have a nonnegative imaginary part, got {0}")]
    InvalidImpedance(Complex64),

    #[error("point ({x}, {y}, {z}) lies inside the obstacle")]
    InsideObstacle { x: f64, y: f64, z: f64 },

    #[error("quadrature needs {required} panels but the budget is {budget}")]
    BudgetExceeded { required: usize, budget: usize },

    #[error("point is within {tol:.1e} of a zone boundary; the asymptotics are not uniform there")]
    ZoneAmbiguous { tol: f64 },

    #[error("forward lobe unresolved: cap spacing {spacing:.3e} rad, lobe width {lobe:.3e} rad")]
    LobeUnresolved { spacing: f64, lobe: f64 },

    #[error("configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ScatterError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScatterError::BudgetExceeded { .. } | ScatterError::LobeUnresolved { .. } => 3,
            ScatterError::Io { .. } | ScatterError::Json(_) => 1,
            _ => 2,
        }
    }
}
