//! Data-parallel execution helpers.
//!
//! With the `parallel` feature (default) the indexed map runs on the ambient
//! rayon pool; without it the same call is a plain sequential loop. Results
//! are collected in index order either way, so callers observe identical
//! output regardless of thread count — parallelism is safe only because every
//! closure used here is pure in its index (any randomness is derived from the
//! index, never shared).

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting results in index order.
///
/// Runs on the current rayon pool when the `parallel` feature is enabled,
/// sequentially otherwise.
pub fn map_n<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential twin of [`map_n`], available in every build.
///
/// Used by benchmarks to compare the fallback path against the parallel one,
/// and by callers that must not touch the rayon pool.
pub fn map_n_seq<T, F>(n: usize, mut f: F) -> Vec<T>
where
    F: FnMut(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Runs `f` on a rayon pool capped at `threads` workers (`parallel` builds),
/// or directly when the feature is off or the pool cannot be built.
pub fn with_thread_cap<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                return pool.install(f);
            }
        }
        f()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
