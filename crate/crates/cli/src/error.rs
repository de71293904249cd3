use std::fmt::Display;

use faitheval_core::qa_eval::QaError;
use faitheval_core::scorer::ScoreError;

/// Failure of a CLI run, classified by who has to fix it.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{module}: {message}")]
    Data { module: &'static str, message: String },
    #[error("{module}: scorer backend: {message}")]
    Backend { module: &'static str, message: String },
}

impl CliError {
    pub const CONFIG_EXIT: i32 = 1;
    pub const DATA_EXIT: i32 = 2;
    pub const BACKEND_EXIT: i32 = 3;

    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => Self::CONFIG_EXIT,
            CliError::Data { .. } => Self::DATA_EXIT,
            CliError::Backend { .. } => Self::BACKEND_EXIT,
        }
    }
}

/// Wraps any displayable error as a data error of `module`.
pub fn data<E: Display>(module: &'static str) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Data {
        module,
        message: e.to_string(),
    }
}

/// Scorer errors are backend failures when a live service misbehaved.
pub fn score(module: &'static str) -> impl FnOnce(ScoreError) -> CliError {
    move |e| {
        let message = e.to_string();
        if e.is_backend() {
            CliError::Backend { module, message }
        } else {
            CliError::Data { module, message }
        }
    }
}

pub fn qa(module: &'static str) -> impl FnOnce(QaError) -> CliError {
    move |e| match e {
        QaError::Score(s) => score(module)(s),
        other => data(module)(other),
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
