//! Dense rank-4 tensors in (n, c, h, w) layout and the convolution kernel.
//!
//! Everything in the network is expressed over [`Tensor`]: a contiguous,
//! row-major `f32` buffer plus its shape. Tensors are immutable once
//! constructed; ops are pure functions returning fresh tensors.
//!
//! `conv2d` accumulates every output element in a fixed (kernel-row,
//! kernel-col, input-channel) order. Parallel schedules only redistribute
//! whole output rows, so results are bit-identical across thread counts.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;

/// Shape of a rank-4 tensor: batch, channels, height, width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub fn elems(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    fn check(&self) -> Result<()> {
        if self.n == 0 || self.c == 0 || self.h == 0 || self.w == 0 {
            return Err(Error::Dimension(format!(
                "all dimensions must be >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

impl core::fmt::Display for Shape {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Dense rank-4 float tensor, row-major in (n, c, h, w) order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f32>,
}

impl Tensor {
    /// Wraps an existing buffer. Fails when the length does not match the
    /// shape or any dimension is zero.
    pub fn new(shape: Shape, data: Vec<f32>) -> Result<Self> {
        shape.check()?;
        if data.len() != shape.elems() {
            return Err(Error::Dimension(format!(
                "data length {} does not match shape {shape} ({} elements)",
                data.len(),
                shape.elems()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f32) -> Self {
        assert!(shape.elems() > 0, "zero-sized shape {shape}");
        Tensor {
            shape,
            data: vec![value; shape.elems()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Element accessor; mostly for tests and small descriptors.
    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[((n * self.shape.c + c) * self.shape.h + y) * self.shape.w + x]
    }

    /// One spatial row of one channel as a slice.
    #[inline]
    pub fn row(&self, n: usize, c: usize, y: usize) -> &[f32] {
        let start = ((n * self.shape.c + c) * self.shape.h + y) * self.shape.w;
        &self.data[start..start + self.shape.w]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }
}

/// Geometry of a 2-D convolution. Weight layout is
/// `(out_channels, in_channels / groups, kernel_h, kernel_w)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
    pub groups: usize,
    pub has_bias: bool,
}

impl ConvSpec {
    /// Square-kernel convolution with bias, stride 1, no dilation.
    pub fn standard(in_channels: usize, out_channels: usize, kernel: usize, padding: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel_h: kernel,
            kernel_w: kernel,
            stride: 1,
            padding,
            dilation: 1,
            groups: 1,
            has_bias: true,
        }
    }

    /// 1x1 convolution with bias.
    pub fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        ConvSpec::standard(in_channels, out_channels, 1, 0)
    }

    /// Depthwise convolution (one filter per channel) with bias.
    pub fn depthwise(channels: usize, kernel: usize, padding: usize, dilation: usize) -> Self {
        ConvSpec {
            in_channels: channels,
            out_channels: channels,
            kernel_h: kernel,
            kernel_w: kernel,
            stride: 1,
            padding,
            dilation,
            groups: channels,
            has_bias: true,
        }
    }

    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn without_bias(mut self) -> Self {
        self.has_bias = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride < 1 || self.dilation < 1 {
            return Err(Error::Config(format!(
                "stride and dilation must be >= 1, got stride {} dilation {}",
                self.stride, self.dilation
            )));
        }
        if self.groups == 0
            || self.in_channels % self.groups != 0
            || self.out_channels % self.groups != 0
        {
            return Err(Error::Config(format!(
                "groups {} must divide in_channels {} and out_channels {}",
                self.groups, self.in_channels, self.out_channels
            )));
        }
        if self.kernel_h == 0 || self.kernel_w == 0 {
            return Err(Error::Config("kernel dims must be >= 1".into()));
        }
        Ok(())
    }

    /// Shape of the weight tensor this spec demands.
    pub fn weight_shape(&self) -> Shape {
        Shape::new(
            self.out_channels,
            self.in_channels / self.groups,
            self.kernel_h,
            self.kernel_w,
        )
    }

    /// Receptive-field size feeding one output element.
    pub fn fan_in(&self) -> usize {
        self.kernel_h * self.kernel_w * (self.in_channels / self.groups)
    }

    /// Output spatial dims for an input of (h, w).
    pub fn out_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let span_h = self.dilation * (self.kernel_h - 1) + 1;
        let span_w = self.dilation * (self.kernel_w - 1) + 1;
        let full_h = h + 2 * self.padding;
        let full_w = w + 2 * self.padding;
        if full_h < span_h || full_w < span_w {
            return Err(Error::Dimension(format!(
                "input {h}x{w} too small for kernel span {span_h}x{span_w}"
            )));
        }
        Ok((
            (full_h - span_h) / self.stride + 1,
            (full_w - span_w) / self.stride + 1,
        ))
    }

    /// Multiply-accumulate count for an input of (h, w).
    pub fn macs(&self, h: usize, w: usize) -> Result<u64> {
        let (oh, ow) = self.out_dims(h, w)?;
        Ok(self.fan_in() as u64 * self.out_channels as u64 * oh as u64 * ow as u64)
    }

    /// Learned element count (weight plus bias).
    pub fn param_count(&self) -> u64 {
        let bias = if self.has_bias { self.out_channels } else { 0 };
        (self.weight_shape().elems() + bias) as u64
    }
}

/// 2-D convolution with zero padding.
///
/// Each output element is the multiply-accumulate sum over its receptive
/// field, accumulated in (kernel-row, kernel-col, input-channel) order with
/// the bias added last. The executor only distributes whole output rows.
pub fn conv2d(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&[f32]>,
    spec: ConvSpec,
    exec: &dyn Executor,
) -> Result<Tensor> {
    spec.validate()?;
    let ishape = input.shape();
    if ishape.c != spec.in_channels {
        return Err(Error::Dimension(format!(
            "input has {} channels, spec expects {}",
            ishape.c, spec.in_channels
        )));
    }
    if weight.shape() != spec.weight_shape() {
        return Err(Error::Dimension(format!(
            "weight shape {} does not match spec {}",
            weight.shape(),
            spec.weight_shape()
        )));
    }
    if let Some(b) = bias {
        if b.len() != spec.out_channels {
            return Err(Error::Dimension(format!(
                "bias length {} does not match out_channels {}",
                b.len(),
                spec.out_channels
            )));
        }
    }
    let (out_h, out_w) = spec.out_dims(ishape.h, ishape.w)?;
    let mut out = Tensor::zeros(Shape::new(ishape.n, spec.out_channels, out_h, out_w));

    let cin_per_group = spec.in_channels / spec.groups;
    let cout_per_group = spec.out_channels / spec.groups;
    let (stride, pad, dil) = (spec.stride, spec.padding, spec.dilation);
    let (in_h, in_w) = (ishape.h, ishape.w);
    let wdata = weight.data();

    exec.run(out.data_mut(), out_w, &|row_idx, out_row| {
        // row_idx decodes as (batch, out-channel, out-row)
        let oy = row_idx % out_h;
        let oc = (row_idx / out_h) % spec.out_channels;
        let b = row_idx / (out_h * spec.out_channels);
        let group = oc / cout_per_group;
        let ic0 = group * cin_per_group;

        for ky in 0..spec.kernel_h {
            let iy = (oy * stride + ky * dil) as isize - pad as isize;
            if iy < 0 || iy >= in_h as isize {
                continue;
            }
            let iy = iy as usize;
            for kx in 0..spec.kernel_w {
                // valid output columns: 0 <= ox*stride + kx*dil - pad < in_w
                let off = kx * dil;
                let ox_lo = if pad > off {
                    (pad - off + stride - 1) / stride
                } else {
                    0
                };
                if ox_lo >= out_w {
                    continue;
                }
                let ix_lo = ox_lo * stride + off - pad;
                if ix_lo >= in_w {
                    continue;
                }
                let count = ((in_w - 1 - ix_lo) / stride + 1).min(out_w - ox_lo);
                for ic in 0..cin_per_group {
                    let wv = wdata
                        [((oc * cin_per_group + ic) * spec.kernel_h + ky) * spec.kernel_w + kx];
                    let in_row = input.row(b, ic0 + ic, iy);
                    let dst = &mut out_row[ox_lo..ox_lo + count];
                    let src = in_row[ix_lo..].iter().step_by(stride);
                    for (o, &v) in dst.iter_mut().zip(src) {
                        *o += wv * v;
                    }
                }
            }
        }
        if let Some(b) = bias {
            let bv = b[oc];
            for o in out_row.iter_mut() {
                *o += bv;
            }
        }
    });

    Ok(out)
}

/// Sub-pixel rearrangement: `(n, c, h, w) -> (n, c/f^2, h*f, w*f)` with
/// `out[n][c][h*f+i][w*f+j] = in[n][c*f^2 + i*f + j][h][w]`.
pub fn pixel_shuffle(input: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::Config("pixel_shuffle factor must be >= 1".into()));
    }
    let s = input.shape();
    let f2 = factor * factor;
    if s.c % f2 != 0 {
        return Err(Error::Config(format!(
            "channels {} not divisible by factor^2 = {f2}",
            s.c
        )));
    }
    let out_shape = Shape::new(s.n, s.c / f2, s.h * factor, s.w * factor);
    let mut out = Tensor::zeros(out_shape);
    let od = out.data_mut();
    for n in 0..s.n {
        for c in 0..out_shape.c {
            for y in 0..s.h {
                for x in 0..s.w {
                    for i in 0..factor {
                        for j in 0..factor {
                            let v = input.at(n, c * f2 + i * factor + j, y, x);
                            let oy = y * factor + i;
                            let ox = x * factor + j;
                            od[((n * out_shape.c + c) * out_shape.h + oy) * out_shape.w + ox] = v;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exact inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle(input: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::Config("pixel_unshuffle factor must be >= 1".into()));
    }
    let s = input.shape();
    if s.h % factor != 0 || s.w % factor != 0 {
        return Err(Error::Dimension(format!(
            "spatial dims {}x{} not divisible by factor {factor}",
            s.h, s.w
        )));
    }
    let f2 = factor * factor;
    let out_shape = Shape::new(s.n, s.c * f2, s.h / factor, s.w / factor);
    let mut out = Tensor::zeros(out_shape);
    let od = out.data_mut();
    for n in 0..s.n {
        for c in 0..s.c {
            for oy in 0..out_shape.h {
                for ox in 0..out_shape.w {
                    for i in 0..factor {
                        for j in 0..factor {
                            let v = input.at(n, c, oy * factor + i, ox * factor + j);
                            let oc = c * f2 + i * factor + j;
                            od[((n * out_shape.c + oc) * out_shape.h + oy) * out_shape.w + ox] = v;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Padding amounts per spatial edge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Edges {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Edges {
    pub fn new(top: usize, bottom: usize, left: usize, right: usize) -> Self {
        Edges {
            top,
            bottom,
            left,
            right,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.top == 0 && self.bottom == 0 && self.left == 0 && self.right == 0
    }
}

/// Reflection padding, edge pixel not repeated. A pad amount must be at most
/// `dim - 1` for the reflection to stay inside the input.
pub fn reflect_pad(input: &Tensor, edges: Edges) -> Result<Tensor> {
    let s = input.shape();
    let max_v = edges.top.max(edges.bottom);
    let max_h = edges.left.max(edges.right);
    if max_v >= s.h || max_h >= s.w {
        return Err(Error::Dimension(format!(
            "reflect pad {edges:?} too large for input {}x{}",
            s.h, s.w
        )));
    }
    let out_shape = Shape::new(s.n, s.c, s.h + edges.top + edges.bottom, s.w + edges.left + edges.right);
    let mut out = Tensor::zeros(out_shape);
    let od = out.data_mut();
    let reflect = |i: isize, len: usize| -> usize {
        let last = (len - 1) as isize;
        let i = if i < 0 { -i } else { i };
        let i = if i > last { 2 * last - i } else { i };
        i as usize
    };
    for n in 0..s.n {
        for c in 0..s.c {
            for oy in 0..out_shape.h {
                let iy = reflect(oy as isize - edges.top as isize, s.h);
                let src = input.row(n, c, iy);
                let base = ((n * s.c + c) * out_shape.h + oy) * out_shape.w;
                for ox in 0..out_shape.w {
                    let ix = reflect(ox as isize - edges.left as isize, s.w);
                    od[base + ox] = src[ix];
                }
            }
        }
    }
    Ok(out)
}

/// Removes `edges` from the spatial borders.
pub fn crop(input: &Tensor, edges: Edges) -> Result<Tensor> {
    let s = input.shape();
    if edges.top + edges.bottom >= s.h || edges.left + edges.right >= s.w {
        return Err(Error::Dimension(format!(
            "crop {edges:?} leaves no pixels of {}x{}",
            s.h, s.w
        )));
    }
    let out_shape = Shape::new(
        s.n,
        s.c,
        s.h - edges.top - edges.bottom,
        s.w - edges.left - edges.right,
    );
    let mut out = Tensor::zeros(out_shape);
    let od = out.data_mut();
    for n in 0..s.n {
        for c in 0..s.c {
            for oy in 0..out_shape.h {
                let src = input.row(n, c, oy + edges.top);
                let base = ((n * s.c + c) * out_shape.h + oy) * out_shape.w;
                od[base..base + out_shape.w]
                    .copy_from_slice(&src[edges.left..edges.left + out_shape.w]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Serial;

    #[test]
    fn conv_ones_sums_window() {
        let x = Tensor::filled(Shape::new(1, 1, 3, 3), 1.0);
        let w = Tensor::filled(Shape::new(1, 1, 3, 3), 1.0);
        let spec = ConvSpec::standard(1, 1, 3, 0).without_bias();
        let y = conv2d(&x, &w, None, spec, &Serial).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 1, 1, 1));
        assert_eq!(y.data()[0], 9.0);
    }

    #[test]
    fn conv_identity_kernel() {
        let data: Vec<f32> = (0..2 * 3 * 4 * 5).map(|i| i as f32 * 0.37 - 8.0).collect();
        let x = Tensor::new(Shape::new(2, 3, 4, 5), data).unwrap();
        // per-channel 1x1 identity: depthwise with weight 1.0
        let w = Tensor::filled(Shape::new(3, 1, 1, 1), 1.0);
        let spec = ConvSpec::depthwise(3, 1, 0, 1).without_bias();
        let y = conv2d(&x, &w, None, spec, &Serial).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv_rejects_bad_shapes() {
        let x = Tensor::filled(Shape::new(1, 2, 4, 4), 1.0);
        let w = Tensor::filled(Shape::new(1, 1, 3, 3), 1.0);
        let spec = ConvSpec::standard(2, 1, 3, 0);
        assert!(matches!(
            conv2d(&x, &w, None, spec, &Serial),
            Err(Error::Dimension(_))
        ));
        let spec = ConvSpec::standard(2, 3, 3, 1).with_groups(2);
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn pixel_shuffle_layout() {
        let x = Tensor::new(Shape::new(1, 4, 1, 1), alloc::vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = pixel_shuffle(&x, 2).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 1, 2, 2));
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn pixel_shuffle_factor_one_is_identity() {
        let data: Vec<f32> = (0..24).map(|i| i as f32).collect();
        let x = Tensor::new(Shape::new(1, 2, 3, 4), data).unwrap();
        let y = pixel_shuffle(&x, 1).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn pixel_shuffle_rejects_indivisible_channels() {
        let x = Tensor::filled(Shape::new(1, 6, 2, 2), 0.0);
        assert!(matches!(pixel_shuffle(&x, 2), Err(Error::Config(_))));
    }

    #[test]
    fn reflect_pad_known_values() {
        // row [0, 1, 2] padded by 2 on the right -> [0, 1, 2, 1, 0]
        let x = Tensor::new(Shape::new(1, 1, 1, 3), alloc::vec![0.0, 1.0, 2.0]).unwrap();
        let y = reflect_pad(&x, Edges::new(0, 0, 0, 2)).unwrap();
        assert_eq!(y.data(), &[0.0, 1.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn crop_undoes_pad() {
        let data: Vec<f32> = (0..30).map(|i| i as f32 * 0.5).collect();
        let x = Tensor::new(Shape::new(1, 2, 3, 5), data).unwrap();
        let e = Edges::new(1, 2, 2, 1);
        let padded = reflect_pad(&x, e).unwrap();
        let back = crop(&padded, e).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn pad_too_large_errors() {
        let x = Tensor::filled(Shape::new(1, 1, 4, 4), 1.0);
        assert!(reflect_pad(&x, Edges::new(0, 4, 0, 0)).is_err());
    }
}
