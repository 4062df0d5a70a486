//! Error type shared by every module in this crate.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors produced by tensor ops, blocks, the model graph and weight init.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes are incompatible with the requested operation.
    Dimension(String),
    /// A structural parameter is invalid (groups, factors, ratios, ...).
    Config(String),
    /// The weight store does not match the parameter manifest of a config.
    Manifest {
        missing: Vec<String>,
        unexpected: Vec<String>,
        mismatched: Vec<String>,
    },
    /// A numeric argument is outside its admissible domain.
    Domain(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Manifest {
                missing,
                unexpected,
                mismatched,
            } => {
                write!(f, "manifest error:")?;
                if !missing.is_empty() {
                    write!(f, " missing {missing:?}")?;
                }
                if !unexpected.is_empty() {
                    write!(f, " unexpected {unexpected:?}")?;
                }
                if !mismatched.is_empty() {
                    write!(f, " shape mismatch {mismatched:?}")?;
                }
                Ok(())
            }
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
