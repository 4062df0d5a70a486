//! Execution strategy for data-parallel kernels.
//!
//! Heavy ops split their output buffer into disjoint chunks and hand each
//! chunk to an [`Executor`]. Every chunk is an independent unit of work, and
//! each output element accumulates in a fixed order inside its chunk, so the
//! numeric result is bit-identical no matter how chunks are scheduled. A
//! multi-threaded executor lives in the companion crate; this one only ships
//! the sequential baseline so the crate stays free of OS dependencies.

/// Runs `task(index, chunk)` for every consecutive `chunk_len`-sized piece of
/// `out`, in any order and possibly concurrently. `out.len()` is always a
/// multiple of `chunk_len`.
pub trait Executor: Sync {
    fn run(&self, out: &mut [f32], chunk_len: usize, task: &(dyn Fn(usize, &mut [f32]) + Sync));
}

/// In-order, single-threaded execution.
pub struct Serial;

impl Executor for Serial {
    fn run(&self, out: &mut [f32], chunk_len: usize, task: &(dyn Fn(usize, &mut [f32]) + Sync)) {
        for (index, chunk) in out.chunks_mut(chunk_len).enumerate() {
            task(index, chunk);
        }
    }
}
