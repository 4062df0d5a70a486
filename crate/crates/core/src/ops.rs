//! Element-wise and channel-wise primitives.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "shape mismatch: {} vs {}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape(a, b)?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| x + y)
        .collect::<Vec<_>>();
    Tensor::new(a.shape(), data)
}

/// Element-wise product.
pub fn hadamard(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape(a, b)?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| x * y)
        .collect::<Vec<_>>();
    Tensor::new(a.shape(), data)
}

#[inline]
pub fn sigmoid_scalar(x: f32) -> f32 {
    1.0 / (1.0 + libm::expf(-x))
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    map(x, sigmoid_scalar)
}

/// x * sigmoid(x).
pub fn silu(x: &Tensor) -> Tensor {
    map(x, |v| v * sigmoid_scalar(v))
}

fn map(x: &Tensor, f: impl Fn(f32) -> f32) -> Tensor {
    let data = x.data().iter().map(|&v| f(v)).collect::<Vec<_>>();
    Tensor::new(x.shape(), data).expect("same shape")
}

/// Concatenates along the channel axis. All inputs must agree on n, h, w.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Dimension("concat of zero tensors".into()))?;
    let s = first.shape();
    let mut c_total = 0;
    for p in parts {
        let ps = p.shape();
        if (ps.n, ps.h, ps.w) != (s.n, s.h, s.w) {
            return Err(Error::Dimension(format!(
                "concat operand {} incompatible with {}",
                ps, s
            )));
        }
        c_total += ps.c;
    }
    let out_shape = Shape::new(s.n, c_total, s.h, s.w);
    let plane = s.h * s.w;
    let mut data = Vec::with_capacity(out_shape.elems());
    for n in 0..s.n {
        for p in parts {
            let pc = p.shape().c;
            let start = n * pc * plane;
            data.extend_from_slice(&p.data()[start..start + pc * plane]);
        }
    }
    Tensor::new(out_shape, data)
}

/// Splits along the channel axis into pieces of the given widths.
pub fn split_channels(x: &Tensor, parts: &[usize]) -> Result<Vec<Tensor>> {
    let s = x.shape();
    let total: usize = parts.iter().sum();
    if total != s.c || parts.iter().any(|&p| p == 0) {
        return Err(Error::Dimension(format!(
            "split widths {parts:?} must be positive and sum to {}",
            s.c
        )));
    }
    let plane = s.h * s.w;
    let mut out = Vec::with_capacity(parts.len());
    let mut c_off = 0;
    for &pc in parts {
        let mut data = Vec::with_capacity(s.n * pc * plane);
        for n in 0..s.n {
            let start = (n * s.c + c_off) * plane;
            data.extend_from_slice(&x.data()[start..start + pc * plane]);
        }
        out.push(Tensor::new(Shape::new(s.n, pc, s.h, s.w), data)?);
        c_off += pc;
    }
    Ok(out)
}

/// Splits into two equal halves along the channel axis.
pub fn split_half(x: &Tensor) -> Result<(Tensor, Tensor)> {
    let c = x.shape().c;
    if c % 2 != 0 {
        return Err(Error::Config(format!("channel count {c} must be even")));
    }
    let mut halves = split_channels(x, &[c / 2, c / 2])?;
    let second = halves.pop().expect("two halves");
    let first = halves.pop().expect("two halves");
    Ok((first, second))
}

/// Interleaves channel groups: viewing channels as `(groups, c/groups)`,
/// output channel `b*groups + a` reads input channel `a*(c/groups) + b`.
pub fn channel_shuffle(x: &Tensor, groups: usize) -> Result<Tensor> {
    let s = x.shape();
    if groups == 0 || s.c % groups != 0 {
        return Err(Error::Config(format!(
            "groups {groups} must divide channel count {}",
            s.c
        )));
    }
    let per = s.c / groups;
    let plane = s.h * s.w;
    let mut out = Tensor::zeros(s);
    let od = out.data_mut();
    for n in 0..s.n {
        for a in 0..groups {
            for b in 0..per {
                let src = (n * s.c + a * per + b) * plane;
                let dst = (n * s.c + b * groups + a) * plane;
                od[dst..dst + plane].copy_from_slice(&x.data()[src..src + plane]);
            }
        }
    }
    Ok(out)
}

/// Per-(batch, channel) mean and standard deviation over the spatial dims.
/// Std uses population variance with epsilon 1e-5 added before the square
/// root. Both vectors have length `n * c`.
pub fn per_channel_stats(x: &Tensor) -> (Vec<f32>, Vec<f32>) {
    const EPS: f64 = 1e-5;
    let s = x.shape();
    let plane = (s.h * s.w) as f64;
    let mut means = Vec::with_capacity(s.n * s.c);
    let mut stds = Vec::with_capacity(s.n * s.c);
    for n in 0..s.n {
        for c in 0..s.c {
            let mut sum = 0.0f64;
            for y in 0..s.h {
                for &v in x.row(n, c, y) {
                    sum += v as f64;
                }
            }
            let mean = sum / plane;
            let mut var = 0.0f64;
            for y in 0..s.h {
                for &v in x.row(n, c, y) {
                    let d = v as f64 - mean;
                    var += d * d;
                }
            }
            var /= plane;
            means.push(mean as f32);
            stds.push(libm::sqrt(var + EPS) as f32);
        }
    }
    (means, stds)
}
