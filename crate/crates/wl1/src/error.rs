use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("cannot parse shape spec `{spec}`: {reason}")]
    Parse { spec: String, reason: String },

    #[error("face is empty (c1 = 0)")]
    EmptyFace,

    #[error("root not bracketed on [{lo}, {hi}]")]
    RootNotBracketed { lo: f64, hi: f64 },

    #[error("bracket growth failed after {0} doublings")]
    BracketGrowth(usize),

    #[error("exponent is already nonnegative at the smallest probed delta {0}")]
    NoSignChange(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad inputs rather than by a failed computation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::InvalidShape(_) | Error::Parse { .. } | Error::EmptyFace
        )
    }
}
