//! The network's building blocks.
//!
//! Each block is a bundle of convolution layers plus a pure forward
//! function. Construction pulls named tensors out of a [`WeightStore`]
//! through a [`ParamReader`]; the parameter paths a block reads are exactly
//! the ones its `plan` function enumerates for the profiler and initializer.
//!
//! Downsampling (`WaveDown`) squeezes the four Haar sub-bands through a
//! pointwise conv and re-weights the result with a sigmoid attention map
//! built from the ll/lh/hl bands (hh is dropped as noise). Upsampling
//! (`WaveUp`) runs a pixel-shuffle branch and an inverse-wavelet branch in
//! parallel and fuses them with channel co-attention. `WaveBlock` refines
//! the ll band with feature-mixing blocks at half resolution, reconstructs,
//! and distills fine detail through `Esdb`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::ops::{
    add, channel_shuffle, concat_channels, hadamard, per_channel_stats, sigmoid, silu,
    split_channels, split_half,
};
use crate::plan::{push_conv, PlannedLayer, PlannedOp};
use crate::tensor::{conv2d, ConvSpec, Shape, Tensor};
use crate::wavelet::{dwt2, idwt2, Subbands};
use crate::weights::WeightStore;

/// Flavor of the 3x3 expansion convolution inside [`FmbConv`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvKind {
    Standard,
    Group,
    Depthwise,
}

/// Group count used by the `Group` kind.
pub const FMBCONV_GROUPS: usize = 4;

/// Width of the FmbConv expansion stage: `round(channels * r_conv)` for the
/// standard and grouped kinds; the depthwise kind keeps the input width.
pub fn expansion_width(channels: usize, kind: ConvKind, r_conv: f32) -> usize {
    match kind {
        ConvKind::Depthwise => channels,
        _ => libm::roundf(channels as f32 * r_conv) as usize,
    }
}

/// Hidden width of one channel-projection MLP: `round(channels/2 * r_mlp)`.
pub fn projection_width(channels: usize, r_mlp: f32) -> usize {
    libm::roundf((channels / 2) as f32 * r_mlp) as usize
}

fn cca_hidden(channels: usize) -> usize {
    (channels / 4).max(4)
}

/// Resolves parameter paths against a weight store.
pub struct ParamReader<'a> {
    store: &'a WeightStore,
}

impl<'a> ParamReader<'a> {
    pub fn new(store: &'a WeightStore) -> Self {
        ParamReader { store }
    }

    fn tensor(&self, path: &str, expect: Shape) -> Result<Tensor> {
        let t = self.store.get(path).ok_or_else(|| Error::Manifest {
            missing: alloc::vec![String::from(path)],
            unexpected: Vec::new(),
            mismatched: Vec::new(),
        })?;
        if t.shape() != expect {
            return Err(Error::Manifest {
                missing: Vec::new(),
                unexpected: Vec::new(),
                mismatched: alloc::vec![format!("{path}: have {} want {expect}", t.shape())],
            });
        }
        Ok(t.clone())
    }

    /// Fetches `{path}.weight` (and `{path}.bias` when the spec has one).
    pub fn conv(&self, path: &str, spec: ConvSpec) -> Result<ConvLayer> {
        spec.validate()?;
        let weight = self.tensor(&format!("{path}.weight"), spec.weight_shape())?;
        let bias = if spec.has_bias {
            let b = self.tensor(
                &format!("{path}.bias"),
                Shape::new(1, spec.out_channels, 1, 1),
            )?;
            Some(b.into_data())
        } else {
            None
        };
        Ok(ConvLayer { spec, weight, bias })
    }
}

/// One learned convolution.
#[derive(Clone, Debug)]
pub struct ConvLayer {
    spec: ConvSpec,
    weight: Tensor,
    bias: Option<Vec<f32>>,
}

impl ConvLayer {
    pub fn new(spec: ConvSpec, weight: Tensor, bias: Option<Vec<f32>>) -> Result<Self> {
        spec.validate()?;
        if weight.shape() != spec.weight_shape() {
            return Err(Error::Dimension(format!(
                "weight shape {} does not match spec {}",
                weight.shape(),
                spec.weight_shape()
            )));
        }
        if spec.has_bias != bias.is_some() {
            return Err(Error::Config("bias presence disagrees with spec".into()));
        }
        Ok(ConvLayer { spec, weight, bias })
    }

    pub fn spec(&self) -> ConvSpec {
        self.spec
    }

    pub fn forward(&self, x: &Tensor, exec: &dyn Executor) -> Result<Tensor> {
        conv2d(x, &self.weight, self.bias.as_deref(), self.spec, exec)
    }
}

/// Sigmoid attention map over the squeezed sub-bands:
/// `M = sigmoid(Wp2(Wd1(ll + lh) + Wd2(ll + hl)))`. The hh band is excluded.
pub struct WaveAttention {
    dw1: ConvLayer,
    dw2: ConvLayer,
    expand: ConvLayer,
}

impl WaveAttention {
    pub fn new(reader: &ParamReader, prefix: &str, channels: usize) -> Result<Self> {
        Ok(WaveAttention {
            dw1: reader.conv(&format!("{prefix}.dw1"), ConvSpec::depthwise(channels, 3, 1, 1))?,
            dw2: reader.conv(&format!("{prefix}.dw2"), ConvSpec::depthwise(channels, 3, 1, 1))?,
            expand: reader.conv(
                &format!("{prefix}.expand"),
                ConvSpec::pointwise(channels, 2 * channels),
            )?,
        })
    }

    pub(crate) fn plan(
        out: &mut Vec<PlannedLayer>,
        prefix: &str,
        channels: usize,
        h: usize,
        w: usize,
    ) -> Result<()> {
        push_conv(out, format!("{prefix}.dw1"), ConvSpec::depthwise(channels, 3, 1, 1), h, w)?;
        push_conv(out, format!("{prefix}.dw2"), ConvSpec::depthwise(channels, 3, 1, 1), h, w)?;
        push_conv(
            out,
            format!("{prefix}.expand"),
            ConvSpec::pointwise(channels, 2 * channels),
            h,
            w,
        )
    }

    /// Returns the attention map with `2 * channels` channels, entries in (0, 1).
    pub fn forward(&self, bands: &Subbands, exec: &dyn Executor) -> Result<Tensor> {
        let low = self.dw1.forward(&add(&bands.ll, &bands.lh)?, exec)?;
        let high = self.dw2.forward(&add(&bands.ll, &bands.hl)?, exec)?;
        Ok(sigmoid(&self.expand.forward(&add(&low, &high)?, exec)?))
    }
}

/// Wavelet-guided downsampling: `D @ HxW -> (2D @ H/2xW/2, 3D @ H/2xW/2)`.
pub struct WaveDown {
    squeeze: ConvLayer,
    attn: WaveAttention,
}

impl WaveDown {
    pub fn new(reader: &ParamReader, prefix: &str, channels: usize) -> Result<Self> {
        Ok(WaveDown {
            squeeze: reader.conv(
                &format!("{prefix}.squeeze"),
                ConvSpec::pointwise(4 * channels, 2 * channels),
            )?,
            attn: WaveAttention::new(reader, &format!("{prefix}.attn"), channels)?,
        })
    }

    pub(crate) fn plan(
        out: &mut Vec<PlannedLayer>,
        prefix: &str,
        channels: usize,
        h: usize,
        w: usize,
    ) -> Result<()> {
        out.push(PlannedLayer {
            path: format!("{prefix}.dwt"),
            op: PlannedOp::Dwt { channels },
            in_h: h,
            in_w: w,
        });
        push_conv(
            out,
            format!("{prefix}.squeeze"),
            ConvSpec::pointwise(4 * channels, 2 * channels),
            h / 2,
            w / 2,
        )?;
        WaveAttention::plan(out, &format!("{prefix}.attn"), channels, h / 2, w / 2)
    }

    /// Returns `(downsampled features, stacked lh/hl/hh bands)`.
    pub fn forward(&self, x: &Tensor, exec: &dyn Executor) -> Result<(Tensor, Tensor)> {
        let bands = dwt2(x)?;
        let stacked = concat_channels(&[&bands.ll, &bands.lh, &bands.hl, &bands.hh])?;
        let squeezed = self.squeeze.forward(&stacked, exec)?;
        let attention = self.attn.forward(&bands, exec)?;
        let y = add(&hadamard(&squeezed, &attention)?, &squeezed)?;
        let highs = concat_channels(&[&bands.lh, &bands.hl, &bands.hh])?;
        Ok((y, highs))
    }
}

/// Contrast-aware channel attention. The per-channel descriptor is
/// `mean + std`; two pointwise convs with reduction 4 (hidden floor 4) and a
/// sigmoid produce the channel weights.
pub struct Cca {
    fc1: ConvLayer,
    fc2: ConvLayer,
}

impl Cca {
    pub fn new(reader: &ParamReader, prefix: &str, channels: usize) -> Result<Self> {
        let hidden = cca_hidden(channels);
        Ok(Cca {
            fc1: reader.conv(&format!("{prefix}.fc1"), ConvSpec::pointwise(channels, hidden))?,
            fc2: reader.conv(&format!("{prefix}.fc2"), ConvSpec::pointwise(hidden, channels))?,
        })
    }

    pub(crate) fn plan(out: &mut Vec<PlannedLayer>, prefix: &str, channels: usize) -> Result<()> {
        let hidden = cca_hidden(channels);
        push_conv(out, format!("{prefix}.fc1"), ConvSpec::pointwise(channels, hidden), 1, 1)?;
        push_conv(out, format!("{prefix}.fc2"), ConvSpec::pointwise(hidden, channels), 1, 1)
    }

    pub fn forward(&self, x: &Tensor, exec: &dyn Executor) -> Result<Tensor> {
        let s = x.shape();
        let (means, stds) = per_channel_stats(x);
        let descriptor: Vec<f32> = means.iter().zip(&stds).map(|(m, d)| m + d).collect();
        let d = Tensor::new(Shape::new(s.n, s.c, 1, 1), descriptor)?;
        let a = sigmoid(&self.fc2.forward(&silu(&self.fc1.forward(&d, exec)?), exec)?);
        // broadcast the channel weights over the spatial dims
        let mut out = x.clone();
        let plane = s.h * s.w;
        let od = out.data_mut();
        for n in 0..s.n {
            for c in 0..s.c {
                let f = a.at(n, c, 0, 0);
                for v in &mut od[(n * s.c + c) * plane..(n * s.c + c + 1) * plane] {
                    *v *= f;
                }
            }
        }
        Ok(out)
    }
}

/// Modified fused-MBConv: 3x3 expansion (standard, grouped or depthwise),
/// SiLU, 1x1 projection, residual.
pub struct FmbConv {
    expand: ConvLayer,
    project: ConvLayer,
}

impl FmbConv {
    fn specs(channels: usize, kind: ConvKind, r_conv: f32) -> Result<(ConvSpec, ConvSpec)> {
        let width = expansion_width(channels, kind, r_conv);
        if width == 0 {
            return Err(Error::Config(format!(
                "expansion ratio {r_conv} collapses {channels} channels to zero"
            )));
        }
        let expand = match kind {
            ConvKind::Standard => ConvSpec::standard(channels, width, 3, 1),
            ConvKind::Group => {
                if channels % FMBCONV_GROUPS != 0 || width % FMBCONV_GROUPS != 0 {
                    return Err(Error::Config(format!(
                        "group conv needs widths divisible by {FMBCONV_GROUPS}, got {channels} -> {width}"
                    )));
                }
                ConvSpec::standard(channels, width, 3, 1).with_groups(FMBCONV_GROUPS)
            }
            ConvKind::Depthwise => ConvSpec::depthwise(channels, 3, 1, 1),
        };
        Ok((expand, ConvSpec::pointwise(width, channels)))
    }

    pub fn new(
        reader: &ParamReader,
        prefix: &str,
        channels: usize,
        kind: ConvKind,
        r_conv: f32,
    ) -> Result<Self> {
        let (expand, project) = Self::specs(channels, kind, r_conv)?;
        Ok(FmbConv {
            expand: reader.conv(&format!("{prefix}.expand"), expand)?,
            project: reader.conv(&format!("{prefix}.project"), project)?,
        })
    }

    pub(crate) fn plan(
        out: &mut Vec<PlannedLayer>,
        prefix: &str,
        channels: usize,
        kind: ConvKind,
        r_conv: f32,
        h: usize,
        w: usize,
    ) -> Result<()> {
        let (expand, project) = Self::specs(channels, kind, r_conv)?;
        push_conv(out, format!("{prefix}.expand"), expand, h, w)?;
        push_conv(out, format!("{prefix}.project"), project, h, w)
    }

    pub fn forward(&self, x: &Tensor, exec: &dyn Executor) -> Result<Tensor> {
        let expanded = silu(&self.expand.forward(x, exec)?);
        add(x, &self.project.forward(&expanded, exec)?)
    }
}

/// Fuses the two upsampling branches: co-attention over the concatenation,
/// channel-weighted summation of the halves, FmbConv refinement.
pub struct Fusion {
    cca: Cca,
    refine: FmbConv,
}

impl Fusion {
    /// `channels` is the width of the concatenated input (both branch widths
    /// summed); the fused output has `channels / 2`.
    pub fn new(
        reader: &ParamReader,
        prefix: &str,
        channels: usize,
        kind: ConvKind,
        r_conv: f32,
    ) -> Result<Self> {
        if channels % 2 != 0 {
            return Err(Error::Config(format!(
                "fusion width {channels} must be even"
            )));
        }
        Ok(Fusion {
            cca: Cca::new(reader, &format!("{prefix}.cca"), channels)?,
            refine: FmbConv::new(reader, &format!("{prefix}.conv"), channels / 2, kind, r_conv)?,
        })
    }

    pub(crate) fn plan(
        out: &mut Vec<PlannedLayer>,
        prefix: &str,
        channels: usize,
        kind: ConvKind,
        r_conv: f32,
        h: usize,
        w: usize,
    ) -> Result<()> {
        Cca::plan(out, &format!("{prefix}.cca"), channels)?;
        FmbConv::plan(out, &format!("{prefix}.conv"), channels / 2, kind, r_conv, h, w)
    }

    pub fn forward(&self, f1: &Tensor, f2: &Tensor, exec: &dyn Executor) -> Result<Tensor> {
        if f1.shape() != f2.shape() {
            return Err(Error::Dimension(format!(
                "fusion inputs differ: {} vs {}",
                f1.shape(),
                f2.shape()
            )));
        }
        let recalibrated = self.cca.forward(&concat_channels(&[f1, f2])?, exec)?;
        let (a, b) = split_half(&recalibrated)?;
        self.refine.forward(&add(&a, &b)?, exec)
    }
}

/// Dual upsampling: `D @ HxW -> D/2 @ 2Hx2W`. One half of the input feeds a
/// pointwise-expand + pixel-shuffle branch, the other becomes the ll band of
/// an inverse wavelet transform together with the encoder's stored highs.
pub struct WaveUp {
    expand: ConvLayer,
    fusion: Fusion,
    channels: usize,
}

impl WaveUp {
    pub fn new(
        reader: &ParamReader,
        prefix: &str,
        channels: usize,
        kind: ConvKind,
        r_conv: f32,
    ) -> Result<Self> {
        if channels % 2 != 0 {
            return Err(Error::Config(format!(
                "upsampling width {channels} must be even"
            )));
        }
        Ok(WaveUp {
            expand: reader.conv(
                &format!("{prefix}.expand"),
                ConvSpec::pointwise(channels / 2, 2 * channels),
            )?,
            fusion: Fusion::new(reader, &format!("{prefix}.fusion"), channels, kind, r_conv)?,
            channels,
        })
    }

    pub(crate) fn plan(
        out: &mut Vec<PlannedLayer>,
        prefix: &str,
        channels: usize,
        kind: ConvKind,
        r_conv: f32,
        h: usize,
        w: usize,
    ) -> Result<()> {
        push_conv(
            out,
            format!("{prefix}.expand"),
            ConvSpec::pointwise(channels / 2, 2 * channels),
            h,
            w,
        )?;
        out.push(PlannedLayer {
            path: format!("{prefix}.shuffle"),
            op: PlannedOp::PixelShuffle {
                factor: 2,
                in_channels: 2 * channels,
            },
            in_h: h,
            in_w: w,
        });
        out.push(PlannedLayer {
            path: format!("{prefix}.idwt"),
            op: PlannedOp::Idwt {
                channels: channels / 2,
            },
            in_h: h,
            in_w: w,
        });
        Fusion::plan(out, &format!("{prefix}.fusion"), channels, kind, r_conv, 2 * h, 2 * w)
    }

    /// `highs` carries the matching encoder level's lh/hl/hh bands and must
    /// have `3 * channels/2` channels at the same resolution as `x`.
    pub fn forward(&self, x: &Tensor, highs: &Tensor, exec: &dyn Executor) -> Result<Tensor> {
        let s = x.shape();
        let hs = highs.shape();
        let half = self.channels / 2;
        if s.c != self.channels {
            return Err(Error::Dimension(format!(
                "expected {} input channels, got {}",
                self.channels, s.c
            )));
        }
        if hs.c != 3 * half || hs.h != s.h || hs.w != s.w || hs.n != s.n {
            return Err(Error::Dimension(format!(
                "high-frequency input {} incompatible with {} ({} channels expected)",
                hs,
                s,
                3 * half
            )));
        }
        let (f1, f2) = split_half(x)?;
        let shuffled = crate::tensor::pixel_shuffle(&self.expand.forward(&f1, exec)?, 2)?;
        let parts = split_channels(highs, &[half, half, half])?;
        let bands = Subbands::new(
            f2,
            parts[0].clone(),
            parts[1].clone(),
            parts[2].clone(),
        )?;
        let reconstructed = idwt2(&bands)?;
        self.fusion.forward(&shuffled, &reconstructed, exec)
    }
}

/// Split-MLP channel projection with a groups-2 shuffle; one half of the
/// channels runs through a pointwise bottleneck, then the halves are
/// interleaved.
pub struct ChannelProjection {
    fc1: ConvLayer,
    fc2: ConvLayer,
}

impl ChannelProjection {
    fn specs(channels: usize, r_mlp: f32) -> Result<(ConvSpec, ConvSpec)> {
        if channels % 2 != 0 {
            return Err(Error::Config(format!(
                "projection width {channels} must be even"
            )));
        }
        let hidden = projection_width(channels, r_mlp);
        if hidden == 0 {
            return Err(Error::Config(format!(
                "mlp ratio {r_mlp} collapses {channels} channels to zero"
            )));
        }
        Ok((
            ConvSpec::pointwise(channels / 2, hidden),
            ConvSpec::pointwise(hidden, channels / 2),
        ))
    }

    pub fn new(reader: &ParamReader, prefix: &str, channels: usize, r_mlp: f32) -> Result<Self> {
        let (s1, s2) = Self::specs(channels, r_mlp)?;
        Ok(ChannelProjection {
            fc1: reader.conv(&format!("{prefix}.fc1"), s1)?,
            fc2: reader.conv(&format!("{prefix}.fc2"), s2)?,
        })
    }

    pub(crate) fn plan(
        out: &mut Vec<PlannedLayer>,
        prefix: &str,
        channels: usize,
        r_mlp: f32,
        h: usize,
        w: usize,
    ) -> Result<()> {
        let (s1, s2) = Self::specs(channels, r_mlp)?;
        push_conv(out, format!("{prefix}.fc1"), s1, h, w)?;
        push_conv(out, format!("{prefix}.fc2"), s2, h, w)
    }

    pub fn forward(&self, u: &Tensor, exec: &dyn Executor) -> Result<Tensor> {
        let (u1, u2) = split_half(u)?;
        let v = self.fc2.forward(&silu(&self.fc1.forward(&u1, exec)?), exec)?;
        channel_shuffle(&concat_channels(&[&v, &u2])?, 2)
    }
}

/// Feature mixing block: large-kernel depthwise conv and two channel
/// projections form a delta that is added back onto the input, so the block
/// is the identity at all-zero parameters.
pub struct Fmb {
    dw: ConvLayer,
    proj0: ChannelProjection,
    proj1: ChannelProjection,
}

impl Fmb {
    pub fn new(reader: &ParamReader, prefix: &str, channels: usize, r_mlp: f32) -> Result<Self> {
        if channels % 2 != 0 {
            return Err(Error::Config(format!("fmb width {channels} must be even")));
        }
        Ok(Fmb {
            dw: reader.conv(&format!("{prefix}.dw"), ConvSpec::depthwise(channels, 7, 3, 1))?,
            proj0: ChannelProjection::new(reader, &format!("{prefix}.proj0"), channels, r_mlp)?,
            proj1: ChannelProjection::new(reader, &format!("{prefix}.proj1"), channels, r_mlp)?,
        })
    }

    pub(crate) fn plan(
        out: &mut Vec<PlannedLayer>,
        prefix: &str,
        channels: usize,
        r_mlp: f32,
        h: usize,
        w: usize,
    ) -> Result<()> {
        push_conv(out, format!("{prefix}.dw"), ConvSpec::depthwise(channels, 7, 3, 1), h, w)?;
        ChannelProjection::plan(out, &format!("{prefix}.proj0"), channels, r_mlp, h, w)?;
        ChannelProjection::plan(out, &format!("{prefix}.proj1"), channels, r_mlp, h, w)
    }

    pub fn forward(&self, x: &Tensor, exec: &dyn Executor) -> Result<Tensor> {
        let mixed = self.dw.forward(x, exec)?;
        let projected = self.proj1.forward(&self.proj0.forward(&mixed, exec)?, exec)?;
        add(x, &projected)
    }
}

/// Large kernel attention: depthwise 5x5, dilated depthwise 7x7 (dilation 3),
/// pointwise; the result gates the input multiplicatively.
pub struct Lka {
    dw: ConvLayer,
    dwd: ConvLayer,
    pw: ConvLayer,
}

impl Lka {
    pub fn new(reader: &ParamReader, prefix: &str, channels: usize) -> Result<Self> {
        Ok(Lka {
            dw: reader.conv(&format!("{prefix}.dw"), ConvSpec::depthwise(channels, 5, 2, 1))?,
            dwd: reader.conv(&format!("{prefix}.dwd"), ConvSpec::depthwise(channels, 7, 9, 3))?,
            pw: reader.conv(&format!("{prefix}.pw"), ConvSpec::pointwise(channels, channels))?,
        })
    }

    pub(crate) fn plan(
        out: &mut Vec<PlannedLayer>,
        prefix: &str,
        channels: usize,
        h: usize,
        w: usize,
    ) -> Result<()> {
        push_conv(out, format!("{prefix}.dw"), ConvSpec::depthwise(channels, 5, 2, 1), h, w)?;
        push_conv(out, format!("{prefix}.dwd"), ConvSpec::depthwise(channels, 7, 9, 3), h, w)?;
        push_conv(out, format!("{prefix}.pw"), ConvSpec::pointwise(channels, channels), h, w)
    }

    pub fn forward(&self, x: &Tensor, exec: &dyn Executor) -> Result<Tensor> {
        let a = self
            .pw
            .forward(&self.dwd.forward(&self.dw.forward(x, exec)?, exec)?, exec)?;
        hadamard(x, &a)
    }
}

/// Blueprint shallow residual block: pointwise then depthwise 3x3, residual.
pub struct Bsrb {
    pw: ConvLayer,
    dw: ConvLayer,
}

impl Bsrb {
    pub fn new(reader: &ParamReader, prefix: &str, channels: usize) -> Result<Self> {
        Ok(Bsrb {
            pw: reader.conv(&format!("{prefix}.pw"), ConvSpec::pointwise(channels, channels))?,
            dw: reader.conv(&format!("{prefix}.dw"), ConvSpec::depthwise(channels, 3, 1, 1))?,
        })
    }

    pub(crate) fn plan(
        out: &mut Vec<PlannedLayer>,
        prefix: &str,
        channels: usize,
        h: usize,
        w: usize,
    ) -> Result<()> {
        push_conv(out, format!("{prefix}.pw"), ConvSpec::pointwise(channels, channels), h, w)?;
        push_conv(out, format!("{prefix}.dw"), ConvSpec::depthwise(channels, 3, 1, 1), h, w)
    }

    pub fn forward(&self, x: &Tensor, exec: &dyn Executor) -> Result<Tensor> {
        add(x, &self.dw.forward(&self.pw.forward(x, exec)?, exec)?)
    }
}

/// Efficient separable distillation block. Three BSRB stages with four
/// half-width distillation taps, a 2D -> D fuse conv and large kernel
/// attention. No outer residual; the caller owns residual learning.
pub struct Esdb {
    distill: [ConvLayer; 4],
    bsrbs: [Bsrb; 3],
    fuse: ConvLayer,
    lka: Lka,
}

impl Esdb {
    pub fn new(reader: &ParamReader, prefix: &str, channels: usize) -> Result<Self> {
        if channels % 2 != 0 {
            return Err(Error::Config(format!("esdb width {channels} must be even")));
        }
        let half = channels / 2;
        let tap = |i: usize| -> Result<ConvLayer> {
            reader.conv(
                &format!("{prefix}.distill{i}"),
                ConvSpec::pointwise(channels, half),
            )
        };
        Ok(Esdb {
            distill: [tap(1)?, tap(2)?, tap(3)?, tap(4)?],
            bsrbs: [
                Bsrb::new(reader, &format!("{prefix}.bsrb1"), channels)?,
                Bsrb::new(reader, &format!("{prefix}.bsrb2"), channels)?,
                Bsrb::new(reader, &format!("{prefix}.bsrb3"), channels)?,
            ],
            fuse: reader.conv(
                &format!("{prefix}.fuse"),
                ConvSpec::pointwise(2 * channels, channels),
            )?,
            lka: Lka::new(reader, &format!("{prefix}.lka"), channels)?,
        })
    }

    pub(crate) fn plan(
        out: &mut Vec<PlannedLayer>,
        prefix: &str,
        channels: usize,
        h: usize,
        w: usize,
    ) -> Result<()> {
        if channels % 2 != 0 {
            return Err(Error::Config(format!("esdb width {channels} must be even")));
        }
        let half = channels / 2;
        for i in 1..=3 {
            push_conv(
                out,
                format!("{prefix}.distill{i}"),
                ConvSpec::pointwise(channels, half),
                h,
                w,
            )?;
            Bsrb::plan(out, &format!("{prefix}.bsrb{i}"), channels, h, w)?;
        }
        push_conv(
            out,
            format!("{prefix}.distill4"),
            ConvSpec::pointwise(channels, half),
            h,
            w,
        )?;
        push_conv(
            out,
            format!("{prefix}.fuse"),
            ConvSpec::pointwise(2 * channels, channels),
            h,
            w,
        )?;
        Lka::plan(out, &format!("{prefix}.lka"), channels, h, w)
    }

    pub fn forward(&self, x: &Tensor, exec: &dyn Executor) -> Result<Tensor> {
        let d1 = self.distill[0].forward(x, exec)?;
        let cur = self.bsrbs[0].forward(x, exec)?;
        let d2 = self.distill[1].forward(&cur, exec)?;
        let cur = self.bsrbs[1].forward(&cur, exec)?;
        let d3 = self.distill[2].forward(&cur, exec)?;
        let cur = self.bsrbs[2].forward(&cur, exec)?;
        let d4 = self.distill[3].forward(&cur, exec)?;
        let fused = self.fuse.forward(&concat_channels(&[&d1, &d2, &d3, &d4])?, exec)?;
        self.lka.forward(&fused, exec)
    }
}

/// Frequency-aware refinement: FMBs on the ll band at half resolution,
/// reconstruction with the untouched high bands, ESDB distillation, and an
/// outer residual.
pub struct WaveBlock {
    fmbs: Vec<Fmb>,
    esdb: Esdb,
}

impl WaveBlock {
    pub fn new(
        reader: &ParamReader,
        prefix: &str,
        channels: usize,
        n_fmb: usize,
        r_mlp: f32,
    ) -> Result<Self> {
        let fmbs = (0..n_fmb)
            .map(|i| Fmb::new(reader, &format!("{prefix}.fmb{i}"), channels, r_mlp))
            .collect::<Result<Vec<_>>>()?;
        Ok(WaveBlock {
            fmbs,
            esdb: Esdb::new(reader, &format!("{prefix}.esdb"), channels)?,
        })
    }

    pub(crate) fn plan(
        out: &mut Vec<PlannedLayer>,
        prefix: &str,
        channels: usize,
        n_fmb: usize,
        r_mlp: f32,
        h: usize,
        w: usize,
    ) -> Result<()> {
        out.push(PlannedLayer {
            path: format!("{prefix}.dwt"),
            op: PlannedOp::Dwt { channels },
            in_h: h,
            in_w: w,
        });
        for i in 0..n_fmb {
            Fmb::plan(out, &format!("{prefix}.fmb{i}"), channels, r_mlp, h / 2, w / 2)?;
        }
        out.push(PlannedLayer {
            path: format!("{prefix}.idwt"),
            op: PlannedOp::Idwt { channels },
            in_h: h / 2,
            in_w: w / 2,
        });
        Esdb::plan(out, &format!("{prefix}.esdb"), channels, h, w)
    }

    pub fn forward(&self, x: &Tensor, exec: &dyn Executor) -> Result<Tensor> {
        let bands = dwt2(x)?;
        let mut ll = bands.ll.clone();
        for fmb in &self.fmbs {
            ll = fmb.forward(&ll, exec)?;
        }
        let rebuilt = idwt2(&Subbands::new(
            ll,
            bands.lh,
            bands.hl,
            bands.hh,
        )?)?;
        add(x, &self.esdb.forward(&rebuilt, exec)?)
    }
}
