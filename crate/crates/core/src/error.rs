use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HazeError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("particle {index} has a non-finite position")]
    NonFinitePosition { index: usize },

    #[error("density solver diverged after iteration {iteration} (mean density error {error:.3e})")]
    SolverInstability { iteration: usize, error: f64 },

    #[error("non-finite {field} on particle {index} after stage `{stage}`")]
    NonFinite {
        stage: &'static str,
        field: &'static str,
        index: usize,
    },

    #[error("conduction needs {substeps} sub-steps per step (limit {limit})")]
    StiffConduction { substeps: usize, limit: usize },

    #[error("marker lost: closest approach {distance:.3e} m exceeds tolerance {tolerance:.3e} m")]
    MarkerLost { distance: f64, tolerance: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("frame {frame}: {source}")]
    AtFrame {
        frame: usize,
        #[source]
        source: Box<HazeError>,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HazeError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        HazeError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HazeError::Io {
            path: path.into(),
            source,
        }
    }
}

impl HazeError {
    pub fn at_frame(self, frame: usize) -> Self {
        match self {
            e @ HazeError::AtFrame { .. } => e,
            e => HazeError::AtFrame {
                frame,
                source: Box::new(e),
            },
        }
    }

    /// The underlying error with any frame context stripped.
    pub fn root(&self) -> &HazeError {
        match self {
            HazeError::AtFrame { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, HazeError>;
