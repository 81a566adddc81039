use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("series shorter than {required} observations: {}", .ids.join(", "))]
    ShortSeries { ids: Vec<String>, required: usize },

    #[error("duplicate series id `{0}`")]
    DuplicateId(String),

    #[error("series `{0}` contains a non-finite value")]
    NonFinite(String),

    #[error("{what}: length {len} is below the required {required}")]
    TooShort {
        what: &'static str,
        len: usize,
        required: usize,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("log transform needs nonnegative input, found {value} at index {index}")]
    NegativeLogInput { index: usize, value: f64 },

    #[error("normal equations are singular; use a positive l2 weight (ridge)")]
    SingularSystem,

    #[error("training loss became non-finite at epoch {epoch}; lower the step size")]
    NonFiniteLoss { epoch: usize },

    #[error("MASE is undefined: the in-sample seasonal naive error is zero")]
    UndefinedMase,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("forecast matrices do not line up: {0}")]
    ForecastMismatch(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
