//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the heavy kernels fan out over
//! rayon; without it, or after `set_parallel(false)`, the same closures run
//! sequentially. Reductions always sum fixed-size blocks in index order, so
//! results are bitwise identical for any thread count.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Runtime switch between the rayon path and the sequential path.
/// A no-op when the crate is built without the `parallel` feature.
pub fn set_parallel(on: bool) {
    PARALLEL.store(on, Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && PARALLEL.load(Ordering::Relaxed)
}

/// Configure the global thread pool. Call once, before any parallel work.
/// With `threads == 1` everything runs on the calling thread.
#[cfg(feature = "parallel")]
pub fn configure_threads(threads: usize) {
    if threads == 1 {
        set_parallel(false);
    } else {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_threads: usize) {}

/// Apply `f` to each chunk of `len` consecutive elements, with the chunk index.
pub fn for_each_chunk_mut<F>(data: &mut [f64], len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    debug_assert!(len > 0 && data.len() % len == 0);
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        data.par_chunks_mut(len)
            .enumerate()
            .for_each(|(i, chunk)| f(i, chunk));
        return;
    }
    for (i, chunk) in data.chunks_mut(len).enumerate() {
        f(i, chunk);
    }
}

/// Run `f(i)` for each `i` in `0..n`.
pub fn for_each_index<F>(n: usize, f: F)
where
    F: Fn(usize) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        (0..n).into_par_iter().for_each(f);
        return;
    }
    for i in 0..n {
        f(i);
    }
}

const SUM_BLOCK: usize = 1024;

fn block_sums_seq(data: &[f64]) -> Vec<f64> {
    data.chunks(SUM_BLOCK).map(|b| b.iter().sum()).collect()
}

/// Deterministic sum: fixed 1024-element blocks are summed independently
/// (possibly in parallel), then combined in index order.
pub fn det_sum(data: &[f64]) -> f64 {
    if data.len() <= SUM_BLOCK {
        return data.iter().sum();
    }
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        let blocks: Vec<f64> = data
            .par_chunks(SUM_BLOCK)
            .map(|b| b.iter().sum())
            .collect();
        return blocks.iter().sum();
    }
    block_sums_seq(data).iter().sum()
}

/// Deterministic dot product over equal-length slices.
pub fn det_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let dot = |(x, y): (&[f64], &[f64])| -> f64 { x.iter().zip(y).map(|(u, v)| u * v).sum() };
    if a.len() <= SUM_BLOCK {
        return dot((a, b));
    }
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        let blocks: Vec<f64> = a
            .par_chunks(SUM_BLOCK)
            .zip(b.par_chunks(SUM_BLOCK))
            .map(dot)
            .collect();
        return blocks.iter().sum();
    }
    a.chunks(SUM_BLOCK)
        .zip(b.chunks(SUM_BLOCK))
        .map(dot)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_sum_matches_sequential_bitwise() {
        let data: Vec<f64> = (0..10_000).map(|i| (i as f64).sin() * 1e-3).collect();
        set_parallel(true);
        let a = det_sum(&data);
        set_parallel(false);
        let b = det_sum(&data);
        set_parallel(true);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn chunk_map_matches_sequential_bitwise() {
        let mut a = vec![0.0; 4096];
        let mut b = vec![0.0; 4096];
        let work = |i: usize, chunk: &mut [f64]| {
            for (j, v) in chunk.iter_mut().enumerate() {
                *v = ((i * 31 + j) as f64).cos();
            }
        };
        set_parallel(true);
        for_each_chunk_mut(&mut a, 64, work);
        set_parallel(false);
        for_each_chunk_mut(&mut b, 64, work);
        set_parallel(true);
        assert_eq!(a, b);
    }
}
