//! Full network assembly, forward pass and complexity profiling.
//!
//! The graph is a symmetric U-shape. A 3x3 head lifts the image to `d1`
//! channels, two encoder stages alternate refinement blocks with wavelet
//! downsampling, refinement blocks sit at the bottleneck, and two
//! upsampling stages mirror the encoder. Skip connections add the
//! pre-downsampling encoder features onto the matching decoder outputs, and
//! each upsampler consumes the high-frequency bands stored by the encoder
//! level that produces the same resolution. A 3x3 tail maps back to RGB as
//! a residual: `output = input + tail(...)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::blocks::{ConvKind, ConvLayer, ParamReader, WaveBlock, WaveDown, WaveUp};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::ops::add;
use crate::plan::{push_conv, PlannedLayer};
use crate::tensor::{crop, reflect_pad, ConvSpec, Edges, Tensor};
use crate::weights::{ParamSpec, WeightStore};

/// Refinement depth: feature-mixing blocks chained inside every WaveBlock.
pub const FMBS_PER_WAVEBLOCK: usize = 7;

/// Spatial granularity the graph needs (three halvings).
pub const SIZE_MULTIPLE: usize = 8;

/// Architecture knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    /// WaveBlocks per stage: encoder 1, encoder 2, bottleneck.
    pub blocks: [usize; 3],
    /// Channel widths: d1, d2, d3 (bottleneck), d4, d5.
    pub dims: [usize; 5],
    pub conv_kind: ConvKind,
    pub r_conv: f32,
    pub r_mlp: f32,
    pub in_channels: usize,
}

impl ModelConfig {
    /// Full-size preset: blocks [1, 2, 3], dims [32, 64, 128, 64, 32],
    /// grouped FmbConv.
    pub fn wavedh() -> Self {
        ModelConfig {
            blocks: [1, 2, 3],
            dims: [32, 64, 128, 64, 32],
            conv_kind: ConvKind::Group,
            r_conv: 1.5,
            r_mlp: 1.25,
            in_channels: 3,
        }
    }

    /// Compact preset: blocks [1, 2, 2], dims [24, 48, 96, 48, 24],
    /// depthwise FmbConv.
    pub fn tiny() -> Self {
        ModelConfig {
            blocks: [1, 2, 2],
            dims: [24, 48, 96, 48, 24],
            conv_kind: ConvKind::Depthwise,
            r_conv: 1.5,
            r_mlp: 1.25,
            in_channels: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [d1, d2, d3, d4, d5] = self.dims;
        if d2 != 2 * d1 || d3 != 2 * d2 || d4 != d2 || d5 != d1 {
            return Err(Error::Config(format!(
                "dims {:?} must satisfy d2 = 2*d1, d3 = 2*d2, d4 = d2, d5 = d1",
                self.dims
            )));
        }
        if d1 == 0 || d1 % 2 != 0 {
            return Err(Error::Config(format!("base width {d1} must be even")));
        }
        if self.blocks.iter().any(|&b| b == 0) {
            return Err(Error::Config("every stage needs at least one block".into()));
        }
        if self.in_channels == 0 {
            return Err(Error::Config("in_channels must be >= 1".into()));
        }
        if !(self.r_conv > 0.0) || !(self.r_mlp > 0.0) {
            return Err(Error::Config("expansion ratios must be positive".into()));
        }
        Ok(())
    }
}

fn check_plan_size(h: usize, w: usize) -> Result<()> {
    if h == 0 || w == 0 || h % SIZE_MULTIPLE != 0 || w % SIZE_MULTIPLE != 0 {
        return Err(Error::Dimension(format!(
            "size {h}x{w} must be a positive multiple of {SIZE_MULTIPLE}"
        )));
    }
    Ok(())
}

/// Enumerates every layer of the graph for an input of (h, w). Order matches
/// the forward pass.
fn walk(config: &ModelConfig, h: usize, w: usize) -> Result<Vec<PlannedLayer>> {
    config.validate()?;
    check_plan_size(h, w)?;
    let [d1, d2, d3, d4, d5] = config.dims;
    let (kind, r_conv, r_mlp) = (config.conv_kind, config.r_conv, config.r_mlp);
    let mut out = Vec::new();

    push_conv(
        &mut out,
        "head".into(),
        ConvSpec::standard(config.in_channels, d1, 3, 1),
        h,
        w,
    )?;

    // encoder stages
    let mut res = (h, w);
    for (stage, &(dim, count)) in [(d1, config.blocks[0]), (d2, config.blocks[1])]
        .iter()
        .enumerate()
    {
        for b in 0..count {
            WaveBlock::plan(
                &mut out,
                &format!("enc{stage}.block{b}"),
                dim,
                FMBS_PER_WAVEBLOCK,
                r_mlp,
                res.0,
                res.1,
            )?;
        }
        WaveDown::plan(&mut out, &format!("enc{stage}.down"), dim, res.0, res.1)?;
        res = (res.0 / 2, res.1 / 2);
    }

    for b in 0..config.blocks[2] {
        WaveBlock::plan(
            &mut out,
            &format!("bottleneck.block{b}"),
            d3,
            FMBS_PER_WAVEBLOCK,
            r_mlp,
            res.0,
            res.1,
        )?;
    }

    // decoder stages; widths halve, resolution doubles
    for (stage, dim) in [(0usize, d3), (1usize, d4)] {
        WaveUp::plan(
            &mut out,
            &format!("dec{stage}.up"),
            dim,
            kind,
            r_conv,
            res.0,
            res.1,
        )?;
        res = (res.0 * 2, res.1 * 2);
    }

    push_conv(
        &mut out,
        "tail".into(),
        ConvSpec::standard(d5, config.in_channels, 3, 1),
        res.0,
        res.1,
    )?;
    debug_assert_eq!(res, (h, w));
    Ok(out)
}

/// Every learned parameter the config demands, keyed by path.
pub fn manifest(config: &ModelConfig) -> Result<BTreeMap<String, ParamSpec>> {
    let layers = walk(config, SIZE_MULTIPLE, SIZE_MULTIPLE)?;
    let mut out = BTreeMap::new();
    for layer in &layers {
        if let crate::plan::PlannedOp::Conv(spec) = layer.op {
            let prev = out.insert(
                format!("{}.weight", layer.path),
                ParamSpec::weight(spec.weight_shape(), spec.fan_in()),
            );
            if prev.is_some() {
                return Err(Error::Config(format!(
                    "duplicate parameter path {}",
                    layer.path
                )));
            }
            if spec.has_bias {
                out.insert(format!("{}.bias", layer.path), ParamSpec::bias(spec.out_channels));
            }
        }
    }
    Ok(out)
}

/// One row of the complexity breakdown.
#[derive(Clone, Debug)]
pub struct LayerProfile {
    pub path: String,
    pub kind: &'static str,
    pub params: u64,
    pub macs: u64,
    pub out_channels: usize,
    pub out_h: usize,
    pub out_w: usize,
}

/// Parameter and multiply-accumulate totals with a per-layer breakdown.
#[derive(Clone, Debug)]
pub struct Profile {
    pub param_count: u64,
    pub mac_count: u64,
    pub layers: Vec<LayerProfile>,
}

/// Counts parameters and MACs for one forward pass at (h, w). Element-wise
/// ops are excluded; the fixed wavelet banks are counted as the strided
/// convolutions they are.
pub fn profile(config: &ModelConfig, h: usize, w: usize) -> Result<Profile> {
    let layers = walk(config, h, w)?;
    let mut rows = Vec::with_capacity(layers.len());
    let mut param_count = 0u64;
    let mut mac_count = 0u64;
    for layer in &layers {
        let params = layer.params();
        let macs = layer.macs()?;
        let (oc, oh, ow) = layer.out_dims()?;
        param_count += params;
        mac_count += macs;
        rows.push(LayerProfile {
            path: layer.path.clone(),
            kind: layer.kind(),
            params,
            macs,
            out_channels: oc,
            out_h: oh,
            out_w: ow,
        });
    }
    Ok(Profile {
        param_count,
        mac_count,
        layers: rows,
    })
}

struct EncoderStage {
    blocks: Vec<WaveBlock>,
    down: WaveDown,
}

/// A built network. Immutable; concurrent forward calls are safe.
pub struct Model {
    config: ModelConfig,
    head: ConvLayer,
    encoders: Vec<EncoderStage>,
    bottleneck: Vec<WaveBlock>,
    decoders: Vec<WaveUp>,
    tail: ConvLayer,
}

/// Validates the store against the config's manifest and assembles the graph.
pub fn build(config: &ModelConfig, weights: &WeightStore) -> Result<Model> {
    let mani = manifest(config)?;
    let mut missing = Vec::new();
    let mut mismatched = Vec::new();
    for (path, spec) in &mani {
        match weights.get(path) {
            None => missing.push(path.clone()),
            Some(t) if t.shape() != spec.shape => {
                mismatched.push(format!("{path}: have {} want {}", t.shape(), spec.shape));
            }
            Some(_) => {}
        }
    }
    let unexpected: Vec<String> = weights
        .paths()
        .filter(|p| !mani.contains_key(*p))
        .cloned()
        .collect();
    if !missing.is_empty() || !unexpected.is_empty() || !mismatched.is_empty() {
        return Err(Error::Manifest {
            missing,
            unexpected,
            mismatched,
        });
    }

    let reader = ParamReader::new(weights);
    let [d1, d2, d3, d4, d5] = config.dims;
    let (kind, r_conv, r_mlp) = (config.conv_kind, config.r_conv, config.r_mlp);

    let head = reader.conv("head", ConvSpec::standard(config.in_channels, d1, 3, 1))?;
    let mut encoders = Vec::new();
    for (stage, &(dim, count)) in [(d1, config.blocks[0]), (d2, config.blocks[1])]
        .iter()
        .enumerate()
    {
        let blocks = (0..count)
            .map(|b| {
                WaveBlock::new(
                    &reader,
                    &format!("enc{stage}.block{b}"),
                    dim,
                    FMBS_PER_WAVEBLOCK,
                    r_mlp,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let down = WaveDown::new(&reader, &format!("enc{stage}.down"), dim)?;
        encoders.push(EncoderStage { blocks, down });
    }
    let bottleneck = (0..config.blocks[2])
        .map(|b| {
            WaveBlock::new(
                &reader,
                &format!("bottleneck.block{b}"),
                d3,
                FMBS_PER_WAVEBLOCK,
                r_mlp,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let decoders = [(0usize, d3), (1usize, d4)]
        .iter()
        .map(|&(stage, dim)| WaveUp::new(&reader, &format!("dec{stage}.up"), dim, kind, r_conv))
        .collect::<Result<Vec<_>>>()?;
    let tail = reader.conv("tail", ConvSpec::standard(d5, config.in_channels, 3, 1))?;

    Ok(Model {
        config: *config,
        head,
        encoders,
        bottleneck,
        decoders,
        tail,
    })
}

impl Model {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Runs the network. Inputs whose spatial dims are not multiples of 8
    /// are reflect-padded on the bottom/right and cropped back afterwards,
    /// so the output always matches the input shape.
    pub fn forward(&self, image: &Tensor, exec: &dyn Executor) -> Result<Tensor> {
        let s = image.shape();
        if s.c != self.config.in_channels {
            return Err(Error::Dimension(format!(
                "expected {} input channels, got {}",
                self.config.in_channels, s.c
            )));
        }
        let pad_h = (SIZE_MULTIPLE - s.h % SIZE_MULTIPLE) % SIZE_MULTIPLE;
        let pad_w = (SIZE_MULTIPLE - s.w % SIZE_MULTIPLE) % SIZE_MULTIPLE;
        let edges = Edges::new(0, pad_h, 0, pad_w);
        let padded;
        let input = if edges.is_zero() {
            image
        } else {
            padded = reflect_pad(image, edges)?;
            &padded
        };

        let mut x = self.head.forward(input, exec)?;
        let mut skips = Vec::new();
        let mut highs = Vec::new();
        for stage in &self.encoders {
            for block in &stage.blocks {
                x = block.forward(&x, exec)?;
            }
            skips.push(x.clone());
            let (down, high) = stage.down.forward(&x, exec)?;
            x = down;
            highs.push(high);
        }
        for block in &self.bottleneck {
            x = block.forward(&x, exec)?;
        }
        for (i, up) in self.decoders.iter().enumerate() {
            let level = self.encoders.len() - 1 - i;
            x = up.forward(&x, &highs[level], exec)?;
            x = add(&x, &skips[level])?;
        }
        let residual = self.tail.forward(&x, exec)?;
        let restored = add(input, &residual)?;
        if edges.is_zero() {
            Ok(restored)
        } else {
            crop(&restored, edges)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Serial;
    use crate::tensor::Shape;
    use crate::weights::init_random;

    fn micro() -> ModelConfig {
        ModelConfig {
            blocks: [1, 1, 1],
            dims: [8, 16, 32, 16, 8],
            conv_kind: ConvKind::Group,
            r_conv: 1.5,
            r_mlp: 1.25,
            in_channels: 3,
        }
    }

    fn unit_input(h: usize, w: usize, seed: u64) -> Tensor {
        let mut rng = crate::weights::SplitMix64::new(seed);
        let data = (0..3 * h * w).map(|_| rng.next_unit_f32()).collect();
        Tensor::new(Shape::new(1, 3, h, w), data).unwrap()
    }

    #[test]
    fn presets_match_expected_dims() {
        let full = ModelConfig::wavedh();
        assert_eq!(full.dims[2], 128);
        assert_eq!(full.blocks, [1, 2, 3]);
        let tiny = ModelConfig::tiny();
        assert_eq!(tiny.dims[2], 96);
        assert_eq!(tiny.blocks, [1, 2, 2]);
        full.validate().unwrap();
        tiny.validate().unwrap();
    }

    #[test]
    fn asymmetric_dims_rejected() {
        let mut cfg = micro();
        cfg.dims = [8, 16, 32, 16, 12];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn build_rejects_missing_and_extra_paths() {
        let cfg = micro();
        let store = init_random(&cfg, 9).unwrap();
        let mut broken = store.clone();
        broken.insert("bogus.weight", Tensor::zeros(Shape::new(1, 1, 1, 1)));
        match build(&cfg, &broken).map(|_| ()) {
            Err(Error::Manifest { unexpected, .. }) => {
                assert_eq!(unexpected, alloc::vec!["bogus.weight".to_string()]);
            }
            other => panic!("expected manifest error, got {other:?}"),
        }

        let keep: Vec<String> = store.paths().cloned().skip(1).collect();
        let partial: WeightStore = keep
            .iter()
            .map(|p| (p.clone(), store.get(p).unwrap().clone()))
            .collect();
        match build(&cfg, &partial).map(|_| ()) {
            Err(Error::Manifest { missing, .. }) => assert_eq!(missing.len(), 1),
            other => panic!("expected manifest error, got {other:?}"),
        }
    }

    #[test]
    fn zero_tail_gives_residual_identity() {
        let cfg = micro();
        let mut store = init_random(&cfg, 3).unwrap();
        let tail_w = store.get("tail.weight").unwrap().shape();
        store.insert("tail.weight", Tensor::zeros(tail_w));
        store.insert("tail.bias", Tensor::zeros(Shape::new(1, 3, 1, 1)));
        let model = build(&cfg, &store).unwrap();
        let x = unit_input(16, 24, 7);
        let y = model.forward(&x, &Serial).unwrap();
        assert_eq!(x.data(), y.data());
    }

    #[test]
    fn forward_pads_and_crops_odd_sizes() {
        let cfg = micro();
        let model = build(&cfg, &init_random(&cfg, 5).unwrap()).unwrap();
        for (h, w) in [(8, 8), (9, 15), (10, 8), (13, 29), (16, 17)] {
            let x = unit_input(h, w, 11);
            let y = model.forward(&x, &Serial).unwrap();
            assert_eq!(y.shape(), x.shape(), "shape mismatch at {h}x{w}");
            assert!(y.all_finite());
        }
    }

    #[test]
    fn profile_params_match_manifest_and_scale() {
        let cfg = ModelConfig::wavedh();
        let p = profile(&cfg, 256, 256).unwrap();
        let store_elems: u64 = manifest(&cfg)
            .unwrap()
            .values()
            .map(|s| s.shape.elems() as u64)
            .sum();
        assert_eq!(p.param_count, store_elems);
        let sum: u64 = p.layers.iter().map(|l| l.params).sum();
        assert_eq!(sum, p.param_count);
        let macs: u64 = p.layers.iter().map(|l| l.macs).sum();
        assert_eq!(macs, p.mac_count);

        // Doubling the input multiplies every per-pixel cost by 4; only the
        // channel-attention descriptor convs (1x1 spatial output) stay
        // constant per image.
        let double = profile(&cfg, 512, 512).unwrap();
        assert_eq!(double.param_count, p.param_count);
        let cca_macs: u64 = p
            .layers
            .iter()
            .filter(|l| l.path.contains(".cca."))
            .map(|l| l.macs)
            .sum();
        assert_eq!(4 * p.mac_count - double.mac_count, 3 * cca_macs);
        assert!((cca_macs as f64) / (p.mac_count as f64) < 1e-5);
    }

    #[test]
    fn profile_rejects_unaligned_sizes() {
        assert!(profile(&ModelConfig::wavedh(), 100, 256).is_err());
    }
}
