use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid modulus {0}: half-period must be positive")]
    InvalidModulus(f64),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("composite mapping is not injective: {0}")]
    NotInjective(String),

    #[error("configuration is not separable: {0}")]
    NotSeparable(String),

    #[error("no feasible coprime quantization with entries up to {budget}")]
    QuantizationFailed { budget: u64 },

    #[error("singular channel: equalization by a zero gain")]
    SingularChannel,

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("lookup table is empty")]
    EmptyLut,

    #[error("invalid SNR: {0}")]
    InvalidSnr(f64),

    #[error("unsupported scheme: {0}")]
    UnsupportedScheme(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {message}")]
    Format { context: String, message: String },
}

impl Error {
    /// Short machine-readable tag, used by the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::InvalidModulus(_) => "invalid_modulus",
            Error::UnsupportedGeometry(_) => "unsupported_geometry",
            Error::NotInjective(_) => "not_injective",
            Error::NotSeparable(_) => "not_separable",
            Error::QuantizationFailed { .. } => "quantization_failed",
            Error::SingularChannel => "singular_channel",
            Error::SingularMatrix(_) => "singular_matrix",
            Error::EmptyLut => "empty_lut",
            Error::InvalidSnr(_) => "invalid_snr",
            Error::UnsupportedScheme(_) => "unsupported_scheme",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
