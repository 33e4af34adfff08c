use thiserror::Error;

/// Errors raised anywhere in the wave-tank model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial order {0} outside the supported range 1..=20")]
    OrderOutOfRange(usize),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("shape mismatch: expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("water depth {depth:.3e} m below the guard {min:.3e} m at x = {x:.4}")]
    DepthGuard { x: f64, depth: f64, min: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("{method} did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("{method} diverged: residual grew for {streak} consecutive iterations")]
    Diverged { method: &'static str, streak: usize, history: Vec<f64> },

    #[error("stream-function solve failed: {0}")]
    StreamFunction(String),

    #[error("point z = {z:.4} lies above the free surface eta = {eta:.4}")]
    AboveSurface { z: f64, eta: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("step {step}, stage {stage}: {source}")]
    Step {
        step: usize,
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
