//! Static per-layer inventory of the network graph.
//!
//! Every block can enumerate the layers it would instantiate for given
//! channel widths and input resolution. The weight manifest, the seeded
//! initializer and the complexity profiler are all derived from this single
//! enumeration so they cannot drift apart.

use alloc::string::String;

use crate::error::Result;
use crate::tensor::ConvSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum PlannedOp {
    /// Learned convolution.
    Conv(ConvSpec),
    /// Fixed Haar analysis bank over `channels`.
    Dwt { channels: usize },
    /// Fixed Haar synthesis bank over `channels` (input at sub-band size).
    Idwt { channels: usize },
    /// Sub-pixel channel-to-space permutation; no arithmetic.
    PixelShuffle { factor: usize, in_channels: usize },
}

#[derive(Clone, Debug)]
pub(crate) struct PlannedLayer {
    pub path: String,
    pub op: PlannedOp,
    pub in_h: usize,
    pub in_w: usize,
}

impl PlannedLayer {
    pub fn kind(&self) -> &'static str {
        match self.op {
            PlannedOp::Conv(_) => "conv",
            PlannedOp::Dwt { .. } => "dwt",
            PlannedOp::Idwt { .. } => "idwt",
            PlannedOp::PixelShuffle { .. } => "pixel_shuffle",
        }
    }

    pub fn params(&self) -> u64 {
        match self.op {
            PlannedOp::Conv(spec) => spec.param_count(),
            _ => 0,
        }
    }

    /// Multiply-accumulate count. The fixed wavelet banks count as the
    /// strided convolutions they are (4 MACs per produced coefficient or
    /// reconstructed pixel); pixel shuffle moves data without arithmetic.
    pub fn macs(&self) -> Result<u64> {
        let (h, w) = (self.in_h as u64, self.in_w as u64);
        Ok(match self.op {
            PlannedOp::Conv(spec) => spec.macs(self.in_h, self.in_w)?,
            PlannedOp::Dwt { channels } => 4 * channels as u64 * h * w,
            PlannedOp::Idwt { channels } => 16 * channels as u64 * h * w,
            PlannedOp::PixelShuffle { .. } => 0,
        })
    }

    /// (channels, height, width) of this layer's output.
    pub fn out_dims(&self) -> Result<(usize, usize, usize)> {
        Ok(match self.op {
            PlannedOp::Conv(spec) => {
                let (oh, ow) = spec.out_dims(self.in_h, self.in_w)?;
                (spec.out_channels, oh, ow)
            }
            PlannedOp::Dwt { channels } => (4 * channels, self.in_h / 2, self.in_w / 2),
            PlannedOp::Idwt { channels } => (channels, self.in_h * 2, self.in_w * 2),
            PlannedOp::PixelShuffle { factor, in_channels } => (
                in_channels / (factor * factor),
                self.in_h * factor,
                self.in_w * factor,
            ),
        })
    }
}

/// Shorthand used by the per-block plan functions.
pub(crate) fn push_conv(
    out: &mut alloc::vec::Vec<PlannedLayer>,
    path: String,
    spec: ConvSpec,
    in_h: usize,
    in_w: usize,
) -> Result<()> {
    spec.validate()?;
    spec.out_dims(in_h, in_w)?;
    out.push(PlannedLayer {
        path,
        op: PlannedOp::Conv(spec),
        in_h,
        in_w,
    });
    Ok(())
}
