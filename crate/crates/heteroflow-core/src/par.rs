//! Data-parallel map helpers with a sequential fallback.
//!
//! All batch loops in this crate (record generation, per-graph gradients,
//! kernel-matrix rows, simulation sweeps) go through [`map_indexed`] or
//! [`map_slice`]. With the `parallel` feature enabled the work is distributed
//! over the rayon pool; without it, or with [`force_sequential`] set, it runs
//! as a plain loop. Outputs are collected in index order, so downstream
//! reductions are deterministic regardless of scheduling.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Route all subsequent `map_*` calls through the sequential path.
///
/// Used by the benchmark suite to compare both execution modes within one
/// process, and by callers that want single-threaded runs without rebuilding.
pub fn force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::SeqCst);
}

/// True when the parallel path is compiled in and not overridden.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::SeqCst)
}

/// Map `f` over `0..n`, returning results in index order.
pub fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel_enabled() {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Map `f` over a slice, returning results in element order.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel_enabled() {
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Sequential variants, always available; benchmark baselines.
pub fn map_indexed_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

pub fn map_slice_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}
