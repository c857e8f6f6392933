use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is singular to working precision")]
    Singular,

    /// The integrator produced a non-finite value. `last_finite` holds the
    /// flattened state from the last step that was still finite.
    #[error("numerical blowup at step {step}")]
    NumericalBlowup {
        step: usize,
        last_finite: Vec<num_complex::Complex64>,
    },

    #[error("norm drift {drift:.3e} at step {step} exceeds {limit:.1e}; reduce dt")]
    IntegrationQuality { step: usize, drift: f64, limit: f64 },

    #[error("solution operator ill-conditioned at step {step} (cond {cond:.3e}); shorten the horizon or reduce dt")]
    IllConditioned { step: usize, cond: f64 },

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("insufficient statistical power: {0}")]
    StatisticalPower(String),

    #[error("convention violation: imaginary residue {0:.3e}")]
    ConventionViolation(f64),

    #[error("fidelity gradient vanishes; supply mu explicitly")]
    ZeroGradient,

    #[error("non-finite cost at iteration {iteration}")]
    NonFiniteCost { iteration: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
