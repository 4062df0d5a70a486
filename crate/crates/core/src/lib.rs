//! Self-contained inference engine for the WaveDH dehazing ConvNet.
//!
//! The crate builds the whole network from first principles: a minimal
//! rank-4 tensor kernel with a brute-force-verifiable convolution, the
//! orthonormal single-level Haar filter bank, the wavelet-guided
//! up/downsampling and refinement blocks, the U-shaped model graph, a
//! parameter/MAC profiler, deterministic seeded initialization, and the
//! PSNR/SSIM/haze-synthesis toolkit used to validate it end to end.
//!
//! Everything is `no_std` + `alloc`; file formats, threading and the CLI
//! live in the companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod blocks;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod model;
pub mod ops;
mod plan;
pub mod tensor;
pub mod wavelet;
pub mod weights;

pub use error::{Error, Result};
pub use exec::{Executor, Serial};
pub use model::{build, manifest, profile, Model, ModelConfig, Profile};
pub use tensor::{conv2d, ConvSpec, Edges, Shape, Tensor};
pub use wavelet::{dwt2, idwt2, Subbands};
pub use weights::{init_random, SplitMix64, WeightStore};
