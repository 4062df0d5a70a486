//! Bit-identical results regardless of how work is scheduled, plus the
//! model-level shape contract across awkward input sizes.

use std::sync::atomic::{AtomicUsize, Ordering};

use wavedh_core::blocks::ConvKind;
use wavedh_core::{
    build, conv2d, init_random, ConvSpec, Executor, ModelConfig, Serial, Shape, SplitMix64, Tensor,
};

/// Scoped-thread executor that hands chunks out through an atomic counter,
/// so the schedule differs from run to run while outputs stay disjoint.
struct RacyPool {
    threads: usize,
}

impl Executor for RacyPool {
    fn run(&self, out: &mut [f32], chunk_len: usize, task: &(dyn Fn(usize, &mut [f32]) + Sync)) {
        let mut chunks: Vec<(usize, &mut [f32])> = out.chunks_mut(chunk_len).enumerate().collect();
        let slots: Vec<std::sync::Mutex<Option<(usize, &mut [f32])>>> = chunks
            .drain(..)
            .map(|c| std::sync::Mutex::new(Some(c)))
            .collect();
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..self.threads {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= slots.len() {
                        break;
                    }
                    let (index, chunk) = slots[i].lock().unwrap().take().unwrap();
                    task(index, chunk);
                });
            }
        });
    }
}

fn rand_tensor(shape: Shape, seed: u64) -> Tensor {
    let mut rng = SplitMix64::new(seed);
    let data = (0..shape.elems())
        .map(|_| rng.next_symmetric_f32(1.0))
        .collect();
    Tensor::new(shape, data).unwrap()
}

#[test]
fn conv_is_bit_identical_across_thread_counts() {
    let spec = ConvSpec::standard(8, 16, 3, 1).with_groups(2);
    let x = rand_tensor(Shape::new(2, 8, 17, 13), 1);
    let w = rand_tensor(spec.weight_shape(), 2);
    let bias: Vec<f32> = (0..16).map(|i| i as f32 * 0.01).collect();
    let base = conv2d(&x, &w, Some(&bias), spec, &Serial).unwrap();
    for threads in [1, 2, 3, 8] {
        let pool = RacyPool { threads };
        for round in 0..3 {
            let y = conv2d(&x, &w, Some(&bias), spec, &pool).unwrap();
            assert_eq!(
                base.data(),
                y.data(),
                "threads {threads} round {round} diverged"
            );
        }
    }
}

#[test]
fn model_forward_is_bit_identical_across_executors() {
    let cfg = ModelConfig {
        blocks: [1, 1, 1],
        dims: [8, 16, 32, 16, 8],
        conv_kind: ConvKind::Group,
        r_conv: 1.5,
        r_mlp: 1.25,
        in_channels: 3,
    };
    let model = build(&cfg, &init_random(&cfg, 99).unwrap()).unwrap();
    let mut rng = SplitMix64::new(5);
    let x = Tensor::new(
        Shape::new(1, 3, 24, 16),
        (0..3 * 24 * 16).map(|_| rng.next_unit_f32()).collect(),
    )
    .unwrap();
    let serial = model.forward(&x, &Serial).unwrap();
    for threads in [2, 5] {
        let pooled = model.forward(&x, &RacyPool { threads }).unwrap();
        assert_eq!(serial.data(), pooled.data());
    }
}

#[test]
fn forward_preserves_shape_across_size_sweep() {
    let cfg = ModelConfig {
        blocks: [1, 1, 1],
        dims: [8, 16, 32, 16, 8],
        conv_kind: ConvKind::Group,
        r_conv: 1.5,
        r_mlp: 1.25,
        in_channels: 3,
    };
    let model = build(&cfg, &init_random(&cfg, 17).unwrap()).unwrap();
    let mut rng = SplitMix64::new(23);
    for (h, w) in [
        (8, 8),
        (8, 257),
        (9, 9),
        (15, 33),
        (16, 16),
        (17, 31),
        (63, 64),
        (100, 10),
        (127, 65),
        (128, 128),
        (255, 8),
        (257, 12),
    ] {
        let x = Tensor::new(
            Shape::new(1, 3, h, w),
            (0..3 * h * w).map(|_| rng.next_unit_f32()).collect(),
        )
        .unwrap();
        let y = model.forward(&x, &Serial).unwrap();
        assert_eq!(y.shape(), x.shape(), "at {h}x{w}");
        assert!(y.all_finite(), "non-finite output at {h}x{w}");
    }
}

#[test]
fn forward_rejects_wrong_channel_count() {
    let cfg = ModelConfig {
        blocks: [1, 1, 1],
        dims: [8, 16, 32, 16, 8],
        conv_kind: ConvKind::Group,
        r_conv: 1.5,
        r_mlp: 1.25,
        in_channels: 3,
    };
    let model = build(&cfg, &init_random(&cfg, 1).unwrap()).unwrap();
    let x = Tensor::filled(Shape::new(1, 4, 16, 16), 0.5);
    assert!(model.forward(&x, &Serial).is_err());
}
