use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("position {x} outside domain [{lo}, {hi}]")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("time integration became unstable at step {step} (t = {time})")]
    Instability { step: usize, time: f64 },

    #[error("at least 2 samples are required, got {n}")]
    InsufficientSamples { n: usize },

    #[error("point ({x}, {y}) is not inside the mesh")]
    PointOutsideMesh { x: f64, y: f64 },

    #[error("level {level}, sample {sample}: {source}")]
    Sample {
        level: usize,
        sample: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("mesh file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors that come from the numerics (blow-up, non-convergence)
    /// rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoConvergence { .. } | Error::Instability { .. } => true,
            Error::Sample { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
