//! Channel model and iterative receiver for shingled two-dimensional magnetic
//! recording over a blurred read head.
//!
//! The write side maps a block of information bits through a rate-1/4 serially
//! concatenated convolutional code, scatters the codeword onto a rectangular
//! grain image with the grain over-write effect, and corrupts the written bits
//! with a 2D intersymbol-interference mask plus white Gaussian noise. The read
//! side is a double-loop turbo receiver: a row/column BCJR equalizer exchanges
//! 16-ary block LLRs with a grain-state BCJR detector, which in turn exchanges
//! per-bit LLRs with the SCCC decoder.
//!
//! The crate is `no_std`-compatible (`alloc` required); file formats, the
//! Monte Carlo harness, and the CLI live in the companion `tdmr-sim` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod detector;
pub mod dgm;
pub mod equalizer;
pub mod exit;
pub mod isi;
mod num;
pub mod pipeline;
pub mod plane;
pub mod rng;
pub mod sccc;

use core::fmt;

/// Scalar LLRs are clamped to this magnitude inside every SISO module.
pub const LLR_CLAMP: f64 = 30.0;

/// 16-ary block LLRs are clamped to this magnitude.
pub const LLR16_CLAMP: f64 = 60.0;

/// Probability floor applied before taking logs of soft feedback.
pub const PROB_FLOOR: f64 = 1e-12;

/// Errors reported by the channel model and receiver modules.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its valid domain.
    Domain(&'static str),
    /// Two planes (or a plane and a config) disagree on dimensions.
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// An index is outside the plane it addresses.
    OutOfBounds,
    /// A configuration is internally inconsistent.
    Config(&'static str),
    /// Trellis probability calibration failed to converge.
    Infeasible(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Dimension {
                what,
                expected,
                got,
            } => write!(f, "dimension mismatch for {what}: expected {expected}, got {got}"),
            Error::OutOfBounds => write!(f, "index out of bounds"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Infeasible(msg) => write!(f, "infeasible: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
