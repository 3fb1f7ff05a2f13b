use thiserror::Error;

/// Errors raised by the simulation, estimation and bound routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// `block` is 1-based. `sample` is set when the failure happened inside an ensemble.
    #[error("numerical blowup at block {block} (step {step}, t = {time}){}", sample_suffix(*sample))]
    NumericalBlowup {
        block: usize,
        step: usize,
        time: f64,
        sample: Option<usize>,
    },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("unknown preset `{name}`; valid names: {}", valid.join(", "))]
    UnknownPreset { name: String, valid: Vec<String> },

    #[error("lag {lag} out of range 0..={max}")]
    LagOutOfRange { lag: usize, max: usize },

    #[error("bandwidth {bandwidth} out of range 0..={max}")]
    BandwidthOutOfRange { bandwidth: usize, max: usize },

    #[error("bound misuse: {0}")]
    Misuse(String),

    #[error("stability window violated: {0}")]
    StabilityWindow(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("i/o error: {0}")]
    Io(String),
}

fn sample_suffix(sample: Option<usize>) -> String {
    match sample {
        Some(s) => format!(" in sample {s}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Attaches an ensemble sample index to a blowup error.
    pub fn with_sample(self, index: usize) -> Self {
        match self {
            Error::NumericalBlowup {
                block, step, time, ..
            } => Error::NumericalBlowup {
                block,
                step,
                time,
                sample: Some(index),
            },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
