//! File formats, pixel conversions and threading for the WaveDH engine.
//!
//! The numeric core is `no_std`; everything that touches the OS lives here:
//! PPM/PGM image IO, the WDH1 weight container, a scoped-thread executor,
//! and the conversions between 8-bit rasters and normalized tensors.

pub mod convert;
pub mod pool;
pub mod ppm;
pub mod wdh1;

use thiserror::Error;

/// Errors for the on-disk formats handled by this crate.
#[derive(Debug, Error)]
pub enum FileError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// The bytes are not the format they claim to be.
    #[error("format error: {0}")]
    Format(String),
    /// Structurally valid header, inconsistent body.
    #[error("corruption error: {0}")]
    Corruption(String),
    /// Valid file using a feature this implementation does not handle.
    #[error("unsupported: {0}")]
    Unsupported(String),
}
