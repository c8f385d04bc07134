//! Data-parallel execution helpers.
//!
//! Shot-level work is split into fixed-size blocks with independent RNG
//! streams, so results are bit-identical whether blocks run on a rayon
//! pool (the default `parallel` feature) or sequentially (feature
//! disabled).  The pool size honours the `FLOQUETFORGE_THREADS`
//! environment variable; unset or zero falls back to one thread per core.

/// Thread count requested through `FLOQUETFORGE_THREADS` (0 = automatic).
pub fn configured_threads() -> usize {
    std::env::var("FLOQUETFORGE_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

/// Splits `total` items into `(start, len)` blocks of at most `block`.
pub fn block_ranges(total: usize, block: usize) -> Vec<(usize, usize)> {
    assert!(block > 0, "block size must be positive");
    (0..total.div_ceil(block))
        .map(|b| (b * block, block.min(total - b * block)))
        .collect()
}

#[cfg(feature = "parallel")]
fn pool() -> &'static rayon::ThreadPool {
    use std::sync::OnceLock;
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(configured_threads())
            .build()
            .expect("failed to build worker pool")
    })
}

/// Applies `f` to every block index, returning results in block order.
#[cfg(feature = "parallel")]
pub fn map_blocks<T, F>(n_blocks: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    pool().install(|| (0..n_blocks).into_par_iter().map(f).collect())
}

/// Applies `f` to every block index, returning results in block order.
#[cfg(not(feature = "parallel"))]
pub fn map_blocks<T, F>(n_blocks: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n_blocks).map(f).collect()
}
