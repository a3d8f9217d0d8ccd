use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("reservoir matrix has numerically zero spectral radius after {attempts} draws")]
    DegenerateSpectrum { attempts: usize },

    #[error("spectral radius estimate did not converge after {iterations} matrix-vector products (last estimate {estimate})")]
    SpectralNoConvergence { iterations: usize, estimate: f64 },

    #[error("ridge system for target {target} is not positive definite at beta = {beta:e} (condition estimate {condition:e})")]
    Factorization {
        target: usize,
        beta: f64,
        condition: f64,
    },

    #[error("variable {variable} has no observations{}", if *.after_washout { " after the washout" } else { "" })]
    InsufficientObservations { variable: usize, after_washout: bool },

    #[error("{system} integration blew up at t = {time}")]
    BlowUp { system: &'static str, time: f64 },

    #[error("malformed row at line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateSpectrum { .. }
                | Error::SpectralNoConvergence { .. }
                | Error::Factorization { .. }
                | Error::BlowUp { .. }
        )
    }
}

pub(crate) fn ensure_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
