use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("quantizer resolution out of range: {0} bits (supported 1..=8 or infinite)")]
    BitsOutOfRange(u32),

    #[error("bin index {index} out of range for {levels}-level quantizer")]
    BinOutOfRange { index: usize, levels: usize },

    #[error("training length P={p} is shorter than the RIS size M={m}")]
    TrainingTooShort { m: usize, p: usize },

    #[error("{0} has zero energy")]
    ZeroEnergy(&'static str),

    #[error("normal equations are singular (all s² + ridge vanish)")]
    SingularNormalEquations,

    #[error("solver produced a non-finite value at step {step} of iteration {iteration}")]
    NonFinite { step: &'static str, iteration: usize },

    #[error("compression map failed literal row validation at row {row}")]
    CompressionMapInvalid { row: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            got,
        }
    }
}
