use std::fmt;

use sarcca_core::Error;

/// Stable process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const INPUT: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const CROSS_VALIDATION: i32 = 4;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: exit::INPUT, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Shape(_) | Error::Contract(_) | Error::UnknownDesign { .. } => exit::INPUT,
            Error::Fold { .. } => exit::CROSS_VALIDATION,
            Error::Degenerate(_)
            | Error::NotPositiveDefinite { .. }
            | Error::RankDeficient(_)
            | Error::Convergence { .. }
            | Error::Singular(_)
            | Error::ZeroAssociation(_) => exit::INFEASIBLE,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
