use std::fmt;

use serde::Serialize;

use crate::expr::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Resource limit hit while building a finite object (net, word set, grid).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityError {
    /// What overflowed, e.g. `"control words"`.
    pub what: String,
    /// Configured cap.
    pub cap: u64,
    /// Items counted before giving up.
    pub found: u64,
    /// Lower bound on the full size (equal to `found` when counting stopped early).
    pub required: u64,
}

impl fmt::Display for CapacityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} exceed cap {} (found {}, at least {} required)",
            self.what, self.cap, self.found, self.required
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("non-finite value in component {component} of the right-hand side: {message}")]
    Evaluation { component: usize, message: String },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("capacity: {0}")]
    Capacity(CapacityError),

    #[error("divergence at step {step}{}: state norm {norm}", word_suffix(.word))]
    Divergence {
        step: usize,
        word: Option<usize>,
        norm: f64,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn word_suffix(word: &Option<usize>) -> String {
    match word {
        Some(w) => format!(" of word {w}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn capacity(what: impl Into<String>, cap: u64, found: u64, required: u64) -> Self {
        Error::Capacity(CapacityError {
            what: what.into(),
            cap,
            found,
            required,
        })
    }

    /// Attach a word index to a divergence error.
    pub fn with_word(self, index: usize) -> Self {
        match self {
            Error::Divergence { step, norm, .. } => Error::Divergence {
                step,
                word: Some(index),
                norm,
            },
            other => other,
        }
    }

    /// Process exit code: 1 validation, 2 capacity, 3 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity(_) => 2,
            Error::Divergence { .. } => 3,
            _ => 1,
        }
    }

    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Evaluation { .. } => "evaluation",
            Error::Parse(_) => "parse",
            Error::Capacity(_) => "capacity",
            Error::Divergence { .. } => "divergence",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
