use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid {kind} configuration: {reason}")]
    Config { kind: &'static str, reason: String },
    #[error("non-finite value produced by {kind}")]
    Numeric { kind: &'static str },
    #[error("composition component {component}: {reason}")]
    Composition { component: usize, reason: String },
    #[error("out of range: {0}")]
    Range(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid series: {0}")]
    Series(String),
}

impl SynthError {
    pub(crate) fn config(kind: &'static str, reason: impl Into<String>) -> Self {
        SynthError::Config { kind, reason: reason.into() }
    }
}
