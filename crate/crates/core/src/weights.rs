//! Named parameter storage and deterministic random initialization.
//!
//! A [`WeightStore`] is an ordered map from parameter path (for example
//! `"enc0.down.squeeze.weight"`) to tensor. Iteration order is always
//! lexicographic, which the on-disk format and the seeded initializer both
//! rely on.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Result;
use crate::model::{manifest, ModelConfig};
use crate::tensor::{Shape, Tensor};

/// On-disk format version implied by the `WDH1` magic.
pub const FORMAT_VERSION: u32 = 1;

/// Ordered map from parameter path to tensor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore {
    tensors: BTreeMap<String, Tensor>,
}

impl WeightStore {
    pub fn new() -> Self {
        WeightStore {
            tensors: BTreeMap::new(),
        }
    }

    /// Inserts or replaces the tensor at `path`.
    pub fn insert(&mut self, path: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(path.into(), tensor);
    }

    pub fn get(&self, path: &str) -> Option<&Tensor> {
        self.tensors.get(path)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.tensors.contains_key(path)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Entries in lexicographic path order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn paths(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    /// Total number of stored f32 elements.
    pub fn total_elements(&self) -> u64 {
        self.tensors.values().map(|t| t.shape().elems() as u64).sum()
    }

    /// Stable hex digest over paths and shapes (FNV-1a, 64-bit). Identifies
    /// which architecture a store belongs to without pinning its values.
    pub fn fingerprint(&self) -> String {
        let mut hash: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x100000001b3);
            }
        };
        for (path, tensor) in &self.tensors {
            eat(path.as_bytes());
            let s = tensor.shape();
            for d in [s.n, s.c, s.h, s.w] {
                eat(&(d as u64).to_le_bytes());
            }
        }
        alloc::format!("{hash:016x}")
    }
}

impl FromIterator<(String, Tensor)> for WeightStore {
    fn from_iter<I: IntoIterator<Item = (String, Tensor)>>(iter: I) -> Self {
        WeightStore {
            tensors: iter.into_iter().collect(),
        }
    }
}

/// SplitMix64 pseudo-random stream.
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 24 bits of resolution.
    pub fn next_unit_f32(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 / (1u64 << 24) as f32
    }

    /// Uniform in [-bound, bound].
    pub fn next_symmetric_f32(&mut self, bound: f32) -> f32 {
        (2.0 * self.next_unit_f32() - 1.0) * bound
    }
}

/// Fan-in-scaled uniform initialization: weights drawn from
/// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases zero. The bound makes every
/// convolution contractive, which keeps the network's unnormalized
/// multiplicative attention chains finite under random weights. The single
/// SplitMix64 stream is consumed in sorted-path order, so the result is a
/// pure function of `(config, seed)`.
pub fn init_random(config: &ModelConfig, seed: u64) -> Result<WeightStore> {
    let specs = manifest(config)?;
    let mut rng = SplitMix64::new(seed);
    let mut store = WeightStore::new();
    for (path, spec) in &specs {
        let tensor = if spec.is_bias {
            Tensor::zeros(spec.shape)
        } else {
            let bound = 1.0 / libm::sqrtf(spec.fan_in as f32);
            let data: Vec<f32> = (0..spec.shape.elems())
                .map(|_| rng.next_symmetric_f32(bound))
                .collect();
            Tensor::new(spec.shape, data)?
        };
        store.insert(path.clone(), tensor);
    }
    Ok(store)
}

/// Shape and provenance of one manifest entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub shape: Shape,
    /// Receptive-field size of the owning convolution; drives the init bound.
    pub fan_in: usize,
    pub is_bias: bool,
}

impl ParamSpec {
    pub fn weight(shape: Shape, fan_in: usize) -> Self {
        ParamSpec {
            shape,
            fan_in,
            is_bias: false,
        }
    }

    pub fn bias(out_channels: usize) -> Self {
        ParamSpec {
            shape: Shape::new(1, out_channels, 1, 1),
            fan_in: 0,
            is_bias: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // first outputs for seed 0 of the standard SplitMix64 recurrence
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220A8397B1DCDAF);
        assert_eq!(rng.next_u64(), 0x6E789E6AA1B965F4);
        assert_eq!(rng.next_u64(), 0x06C45D188009454F);
    }

    #[test]
    fn unit_samples_in_range() {
        let mut rng = SplitMix64::new(1234);
        for _ in 0..1000 {
            let v = rng.next_unit_f32();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn fingerprint_tracks_structure_not_values() {
        let mut a = WeightStore::new();
        a.insert("x.weight", Tensor::filled(Shape::new(1, 2, 3, 3), 1.0));
        let mut b = WeightStore::new();
        b.insert("x.weight", Tensor::filled(Shape::new(1, 2, 3, 3), -4.0));
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut c = WeightStore::new();
        c.insert("y.weight", Tensor::filled(Shape::new(1, 2, 3, 3), 1.0));
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
