//! Image quality metrics and the atmospheric-scattering haze synthesizer.
//!
//! Both metrics expect tensors with values in [0, 1] (dynamic range L = 1)
//! and accumulate in f64.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

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

/// Peak signal-to-noise ratio in decibels: `10 * log10(1 / MSE)`. Identical
/// inputs give `f64::INFINITY`.
pub fn psnr(a: &Tensor, b: &Tensor) -> Result<f64> {
    same_shape(a, b)?;
    let mut sum = 0.0f64;
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = (*x as f64) - (*y as f64);
        sum += d * d;
    }
    let mse = sum / a.shape().elems() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * libm::log10(mse))
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0f64; SSIM_WINDOW];
    let center = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - center;
        *v = libm::exp(-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Valid-mode separable filter: horizontal then vertical pass.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0f64; h * ow];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * plane[y * w + x + t];
            }
            horiz[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0f64; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * horiz[(y + t) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Windowed structural similarity: 11x11 Gaussian window with sigma 1.5,
/// K1 = 0.01, K2 = 0.03, dynamic range 1. Computed per channel in valid
/// mode, averaged over channels, positions and batch.
pub fn ssim(a: &Tensor, b: &Tensor) -> Result<f64> {
    same_shape(a, b)?;
    let s = a.shape();
    if s.h < SSIM_WINDOW || s.w < SSIM_WINDOW {
        return Err(Error::Dimension(format!(
            "image {}x{} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window",
            s.h, s.w
        )));
    }
    let k = gaussian_window();
    let c1 = (SSIM_K1 * SSIM_K1) as f64;
    let c2 = (SSIM_K2 * SSIM_K2) as f64;
    let plane = s.h * s.w;
    let mut total = 0.0f64;
    let mut count = 0u64;
    let mut pa = vec![0.0f64; plane];
    let mut pb = vec![0.0f64; plane];
    let mut paa = vec![0.0f64; plane];
    let mut pbb = vec![0.0f64; plane];
    let mut pab = vec![0.0f64; plane];
    for n in 0..s.n {
        for c in 0..s.c {
            let base = (n * s.c + c) * plane;
            for i in 0..plane {
                let va = a.data()[base + i] as f64;
                let vb = b.data()[base + i] as f64;
                pa[i] = va;
                pb[i] = vb;
                paa[i] = va * va;
                pbb[i] = vb * vb;
                pab[i] = va * vb;
            }
            let mu_a = filter_valid(&pa, s.h, s.w, &k);
            let mu_b = filter_valid(&pb, s.h, s.w, &k);
            let m_aa = filter_valid(&paa, s.h, s.w, &k);
            let m_bb = filter_valid(&pbb, s.h, s.w, &k);
            let m_ab = filter_valid(&pab, s.h, s.w, &k);
            for i in 0..mu_a.len() {
                let (ma, mb) = (mu_a[i], mu_b[i]);
                let var_a = m_aa[i] - ma * ma;
                let var_b = m_bb[i] - mb * mb;
                let cov = m_ab[i] - ma * mb;
                let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
                let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
                total += num / den;
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

/// Scattering parameters: global airlight per RGB channel, scattering
/// coefficient and a single-channel depth map matching the image layout.
#[derive(Clone, Debug)]
pub struct HazeParams {
    pub airlight: [f32; 3],
    pub beta: f32,
    pub depth: Tensor,
}

impl HazeParams {
    pub fn new(airlight: [f32; 3], beta: f32, depth: Tensor) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::Domain(format!(
                "scattering coefficient must be >= 0, got {beta}"
            )));
        }
        if airlight.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Domain(format!(
                "airlight {airlight:?} must lie in [0, 1]"
            )));
        }
        if depth.shape().c != 1 {
            return Err(Error::Dimension(format!(
                "depth map must have one channel, got {}",
                depth.shape()
            )));
        }
        if depth.data().iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::Domain("depth values must be finite and >= 0".into()));
        }
        Ok(HazeParams {
            airlight,
            beta,
            depth,
        })
    }

    fn check_image(&self, image: &Tensor) -> Result<()> {
        let s = image.shape();
        let d = self.depth.shape();
        if s.c != 3 {
            return Err(Error::Dimension(format!(
                "expected an RGB tensor, got {} channels",
                s.c
            )));
        }
        if (d.n, d.h, d.w) != (s.n, s.h, s.w) {
            return Err(Error::Dimension(format!(
                "depth map {} does not match image {}",
                d, s
            )));
        }
        Ok(())
    }

    /// Per-pixel transmission `t = exp(-beta * d)`, always in (0, 1].
    pub fn transmission(&self) -> Tensor {
        let data: Vec<f32> = self
            .depth
            .data()
            .iter()
            .map(|&d| libm::expf(-self.beta * d))
            .collect();
        Tensor::new(self.depth.shape(), data).expect("same shape")
    }
}

/// Applies the scattering model: `hazy = clear * t + airlight * (1 - t)`.
pub fn synthesize_haze(clear: &Tensor, params: &HazeParams) -> Result<Tensor> {
    params.check_image(clear)?;
    let s = clear.shape();
    let t = params.transmission();
    let plane = s.h * s.w;
    let mut data = Vec::with_capacity(s.elems());
    for n in 0..s.n {
        for c in 0..3 {
            let airlight = params.airlight[c];
            let base = (n * 3 + c) * plane;
            let tbase = n * plane;
            for i in 0..plane {
                let tr = t.data()[tbase + i];
                data.push(clear.data()[base + i] * tr + airlight * (1.0 - tr));
            }
        }
    }
    Tensor::new(s, data)
}

/// Algebraic inversion of the scattering model with the true parameters:
/// `clear = (hazy - airlight * (1 - t)) / t`. Exact where the transmission
/// is not vanishingly small; `t` is floored at 1e-6 to keep outputs finite.
pub fn invert_haze(hazy: &Tensor, params: &HazeParams) -> Result<Tensor> {
    params.check_image(hazy)?;
    let s = hazy.shape();
    let t = params.transmission();
    let plane = s.h * s.w;
    let mut data = Vec::with_capacity(s.elems());
    for n in 0..s.n {
        for c in 0..3 {
            let airlight = params.airlight[c];
            let base = (n * 3 + c) * plane;
            let tbase = n * plane;
            for i in 0..plane {
                let tr = t.data()[tbase + i].max(1e-6);
                data.push((hazy.data()[base + i] - airlight * (1.0 - tr)) / tr);
            }
        }
    }
    Tensor::new(s, data)
}
