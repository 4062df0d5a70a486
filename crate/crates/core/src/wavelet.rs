//! Single-level orthonormal 2-D Haar transform as stride-2 filter banks.
//!
//! Analysis correlates each channel with four fixed 2x2 kernels at stride 2:
//!
//! ```text
//! k_ll = 1/2 [[ 1,  1], [ 1,  1]]    k_lh = 1/2 [[-1, -1], [ 1,  1]]
//! k_hl = 1/2 [[-1,  1], [-1,  1]]    k_hh = 1/2 [[ 1, -1], [-1,  1]]
//! ```
//!
//! The kernels form an orthonormal basis of the 2x2 block, so the synthesis
//! bank is the plain transpose and reconstruction is exact. `lh` responds to
//! horizontal edges, `hl` to vertical ones.

use alloc::format;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// The four wavelet coefficient tensors at half resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct Subbands {
    pub ll: Tensor,
    pub lh: Tensor,
    pub hl: Tensor,
    pub hh: Tensor,
}

impl Subbands {
    pub fn new(ll: Tensor, lh: Tensor, hl: Tensor, hh: Tensor) -> Result<Self> {
        let s = ll.shape();
        if lh.shape() != s || hl.shape() != s || hh.shape() != s {
            return Err(Error::Dimension(format!(
                "sub-band shapes differ: ll {} lh {} hl {} hh {}",
                s,
                lh.shape(),
                hl.shape(),
                hh.shape()
            )));
        }
        Ok(Subbands { ll, lh, hl, hh })
    }

    pub fn shape(&self) -> Shape {
        self.ll.shape()
    }
}

/// Forward transform. Spatial dims must be even; callers pad first.
pub fn dwt2(x: &Tensor) -> Result<Subbands> {
    let s = x.shape();
    if s.h % 2 != 0 || s.w % 2 != 0 {
        return Err(Error::Dimension(format!(
            "dwt2 requires even spatial dims, got {}x{}",
            s.h, s.w
        )));
    }
    let half = Shape::new(s.n, s.c, s.h / 2, s.w / 2);
    let elems = half.elems();
    let mut ll = alloc::vec![0.0f32; elems];
    let mut lh = alloc::vec![0.0f32; elems];
    let mut hl = alloc::vec![0.0f32; elems];
    let mut hh = alloc::vec![0.0f32; elems];
    let mut idx = 0usize;
    for n in 0..s.n {
        for c in 0..s.c {
            for oy in 0..half.h {
                let top = x.row(n, c, 2 * oy);
                let bot = x.row(n, c, 2 * oy + 1);
                for ox in 0..half.w {
                    let a = top[2 * ox];
                    let b = top[2 * ox + 1];
                    let cc = bot[2 * ox];
                    let d = bot[2 * ox + 1];
                    ll[idx] = 0.5 * (a + b + cc + d);
                    lh[idx] = 0.5 * (-a - b + cc + d);
                    hl[idx] = 0.5 * (-a + b - cc + d);
                    hh[idx] = 0.5 * (a - b - cc + d);
                    idx += 1;
                }
            }
        }
    }
    Subbands::new(
        Tensor::new(half, ll)?,
        Tensor::new(half, lh)?,
        Tensor::new(half, hl)?,
        Tensor::new(half, hh)?,
    )
}

/// Inverse transform: the adjoint of the analysis bank. Output has shape
/// `(n, c, 2h, 2w)`.
pub fn idwt2(s: &Subbands) -> Result<Tensor> {
    let half = s.shape();
    let full = Shape::new(half.n, half.c, half.h * 2, half.w * 2);
    let mut out = Tensor::zeros(full);
    let od = out.data_mut();
    for n in 0..half.n {
        for c in 0..half.c {
            for oy in 0..half.h {
                let ll = s.ll.row(n, c, oy);
                let lh = s.lh.row(n, c, oy);
                let hl = s.hl.row(n, c, oy);
                let hh = s.hh.row(n, c, oy);
                let top = ((n * full.c + c) * full.h + 2 * oy) * full.w;
                let bot = top + full.w;
                for ox in 0..half.w {
                    let (a, b, cc, d) = (ll[ox], lh[ox], hl[ox], hh[ox]);
                    od[top + 2 * ox] = 0.5 * (a - b - cc + d);
                    od[top + 2 * ox + 1] = 0.5 * (a - b + cc - d);
                    od[bot + 2 * ox] = 0.5 * (a + b - cc - d);
                    od[bot + 2 * ox + 1] = 0.5 * (a + b + cc + d);
                }
            }
        }
    }
    Ok(out)
}
