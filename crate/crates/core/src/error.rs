use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid system parameters: {0}")]
    InvalidParams(String),

    #[error("fronthaul budget {rate} bit/s is below the {required} bit/s needed for O = 1")]
    FronthaulBudgetTooSmall { rate: f64, required: f64 },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("quantizer input at AP {ap} has zero power")]
    SingularConfiguration { ap: usize },

    #[error("normalized covariance entry {value} outside [-1, 1]")]
    ArcsineDomain { value: f64 },

    #[error("channel column {ue} has zero norm")]
    DegenerateChannel { ue: usize },

    #[error("channel Gram matrix is singular")]
    SingularChannel,

    #[error("estimated channel Gram matrix is singular")]
    SingularEstimate,

    #[error("matrix to invert is not positive definite")]
    NotPositiveDefinite,

    #[error("limit undefined: {0}")]
    UndefinedLimit(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
