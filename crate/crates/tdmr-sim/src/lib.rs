//! Std companion to `tdmr-core`: file formats, the Monte Carlo experiment
//! harness, EXIT-sweep tooling, and the command-line front end.
//!
//! Everything here is plumbing around the pure signal chain: serializing
//! planes and grain images, reading key-value experiment configs, running
//! seeded block batches to a target BER, searching the maximum feasible code
//! rate, and emitting CSV/report artifacts. All randomness derives from the
//! experiment's master seed, so identical configs reproduce identical output
//! files regardless of worker count.

use std::fmt;

pub mod config;
pub mod exit_sweep;
pub mod formats;
pub mod harness;

#[derive(Debug)]
pub enum Error {
    /// Error bubbled up from the signal chain.
    Core(tdmr_core::Error),
    Io(std::io::Error),
    /// A serialized artifact does not parse.
    Format(String),
    /// An experiment configuration is invalid or infeasible.
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Core(e) => write!(f, "chain error: {e}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Core(e) => Some(e),
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<tdmr_core::Error> for Error {
    fn from(e: tdmr_core::Error) -> Self {
        Error::Core(e)
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
