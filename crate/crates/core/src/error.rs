use thiserror::Error;

/// Errors surfaced by mesh generation, solves, and post-processing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid mesh parameters: {0}")]
    MeshParams(String),

    #[error("design field has {got} elements, mesh has {expected} design elements")]
    DesignSize { got: usize, expected: usize },

    #[error("density out of [0,1] at element {element}: {value}")]
    DensityRange { element: usize, value: f64 },

    #[error("Newton did not converge within {iters} iterations (residual {residual:.3e})")]
    NonConvergence { iters: usize, residual: f64 },

    #[error("linear system is singular or ill-conditioned")]
    SingularSystem,

    #[error("state was computed for a different design (hash mismatch)")]
    StaleState,

    #[error("{0}")]
    Postprocess(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
