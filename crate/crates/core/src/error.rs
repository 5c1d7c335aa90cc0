use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model or sampler parameter is outside its admissible range.
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid step count {steps}: {reason}")]
    InvalidSteps { steps: usize, reason: &'static str },

    #[error("scheme {0:?} is not supported by this operation")]
    UnsupportedScheme(crate::schemes::SchemeKind),

    #[error("root of the nu-bar equation is not bracketed for nu = {nu}: {detail}")]
    RootNotBracketed { nu: f64, detail: String },

    #[error("rate fit needs {0}")]
    InsufficientData(&'static str),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }
}
