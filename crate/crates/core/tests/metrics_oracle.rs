//! Metric implementations against independent double-precision references.

use proptest::prelude::*;
use wavedh_core::metrics::{invert_haze, psnr, ssim, synthesize_haze, HazeParams};
use wavedh_core::{Shape, SplitMix64, Tensor};

fn random_image(shape: Shape, seed: u64) -> Tensor {
    let mut rng = SplitMix64::new(seed);
    let data = (0..shape.elems()).map(|_| rng.next_unit_f32()).collect();
    Tensor::new(shape, data).unwrap()
}

/// Direct windowed SSIM: non-separable 121-tap windows, all in f64.
fn ssim_reference(a: &Tensor, b: &Tensor) -> f64 {
    const WIN: usize = 11;
    const SIGMA: f64 = 1.5;
    let mut window = [[0.0f64; WIN]; WIN];
    let mut wsum = 0.0;
    for (dy, row) in window.iter_mut().enumerate() {
        for (dx, v) in row.iter_mut().enumerate() {
            let (py, px) = (dy as f64 - 5.0, dx as f64 - 5.0);
            *v = (-(py * py + px * px) / (2.0 * SIGMA * SIGMA)).exp();
            wsum += *v;
        }
    }
    for row in window.iter_mut() {
        for v in row.iter_mut() {
            *v /= wsum;
        }
    }
    let c1 = 0.01f64 * 0.01;
    let c2 = 0.03f64 * 0.03;
    let s = a.shape();
    let mut total = 0.0;
    let mut count = 0u64;
    for n in 0..s.n {
        for c in 0..s.c {
            for oy in 0..=(s.h - WIN) {
                for ox in 0..=(s.w - WIN) {
                    let (mut ma, mut mb) = (0.0f64, 0.0f64);
                    let (mut saa, mut sbb, mut sab) = (0.0f64, 0.0f64, 0.0f64);
                    for dy in 0..WIN {
                        for dx in 0..WIN {
                            let wv = window[dy][dx];
                            let va = a.at(n, c, oy + dy, ox + dx) as f64;
                            let vb = b.at(n, c, oy + dy, ox + dx) as f64;
                            ma += wv * va;
                            mb += wv * vb;
                            saa += wv * va * va;
                            sbb += wv * vb * vb;
                            sab += wv * va * vb;
                        }
                    }
                    let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                        / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                    count += 1;
                }
            }
        }
    }
    total / count as f64
}

#[test]
fn ssim_matches_double_precision_reference() {
    for seed in 0..8u64 {
        let shape = Shape::new(1, 3, 16 + (seed as usize % 3) * 5, 18);
        let a = random_image(shape, 2 * seed + 1);
        let b = random_image(shape, 2 * seed + 2);
        let got = ssim(&a, &b).unwrap();
        let want = ssim_reference(&a, &b);
        assert!(
            (got - want).abs() <= 1e-6,
            "seed {seed}: {got} vs {want}"
        );
    }
}

#[test]
fn ssim_symmetry() {
    let a = random_image(Shape::new(1, 3, 16, 16), 50);
    let b = random_image(Shape::new(1, 3, 16, 16), 51);
    let fwd = ssim(&a, &b).unwrap();
    let rev = ssim(&b, &a).unwrap();
    assert!((fwd - rev).abs() <= 1e-9);
}

#[test]
fn psnr_matches_elementwise_loop() {
    let a = random_image(Shape::new(2, 3, 9, 11), 60);
    let b = random_image(Shape::new(2, 3, 9, 11), 61);
    let got = psnr(&a, &b).unwrap();
    // independent route: accumulate per channel, then combine
    let s = a.shape();
    let mut per_channel = vec![0.0f64; s.n * s.c];
    for n in 0..s.n {
        for c in 0..s.c {
            for y in 0..s.h {
                for x in 0..s.w {
                    let d = a.at(n, c, y, x) as f64 - b.at(n, c, y, x) as f64;
                    per_channel[n * s.c + c] += d * d;
                }
            }
        }
    }
    let mse = per_channel.iter().sum::<f64>() / s.elems() as f64;
    let want = 10.0 * (1.0 / mse).log10();
    assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
}

#[test]
fn haze_inversion_recovers_clear_image() {
    let shape = Shape::new(1, 3, 24, 24);
    let clear = random_image(shape, 70);
    let mut rng = SplitMix64::new(71);
    let depth = Tensor::new(
        Shape::new(1, 1, 24, 24),
        (0..24 * 24).map(|_| rng.next_unit_f32() * 3.0).collect(),
    )
    .unwrap();
    let params = HazeParams::new([0.92, 0.88, 0.95], 1.2, depth).unwrap();
    let hazy = synthesize_haze(&clear, &params).unwrap();
    let recovered = invert_haze(&hazy, &params).unwrap();
    let t = params.transmission();
    let plane = 24 * 24;
    for c in 0..3 {
        for i in 0..plane {
            if t.data()[i] >= 0.05 {
                let err = (recovered.data()[c * plane + i] - clear.data()[c * plane + i]).abs();
                assert!(err <= 1e-6, "channel {c} pixel {i}: err {err}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prop_psnr_symmetric_and_positive(seed in 0u64..500) {
        let a = random_image(Shape::new(1, 3, 8, 8), seed);
        let b = random_image(Shape::new(1, 3, 8, 8), seed + 1000);
        let fwd = psnr(&a, &b).unwrap();
        let rev = psnr(&b, &a).unwrap();
        prop_assert_eq!(fwd, rev);
        prop_assert!(fwd > 0.0);
    }

    #[test]
    fn prop_beta_zero_haze_is_identity(seed in 0u64..500) {
        let clear = random_image(Shape::new(1, 3, 8, 8), seed);
        let depth = random_image(Shape::new(1, 1, 8, 8), seed + 2000);
        let p = HazeParams::new([0.8, 0.85, 0.9], 0.0, depth).unwrap();
        let hazy = synthesize_haze(&clear, &p).unwrap();
        prop_assert_eq!(hazy.data(), clear.data());
    }
}
