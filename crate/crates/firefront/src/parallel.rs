//! Thin switch between rayon data parallelism and a sequential fallback.
//!
//! The `parallel` feature (on by default) routes the map-style helpers
//! through rayon; without it the same code runs sequentially. Results are
//! identical either way: work is split into fixed shards independent of
//! the thread count, and shard outputs are merged in order.

use std::sync::OnceLock;

/// Thread cap from `FIREFRONT_THREADS`; 0 or unset means rayon's default.
pub fn thread_cap() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("FIREFRONT_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .unwrap_or(0)
    })
}

#[cfg(feature = "parallel")]
fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        let cap = thread_cap();
        if cap > 0 {
            builder = builder.num_threads(cap);
        }
        builder.build().expect("thread pool")
    })
}

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    pool().install(|| (0..n).into_par_iter().map(f).collect())
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Map `f` over items, collecting results in input order.
#[cfg(feature = "parallel")]
pub fn map_slice<I: Sync, T: Send>(items: &[I], f: impl Fn(&I) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    pool().install(|| items.par_iter().map(f).collect())
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<I, T>(items: &[I], f: impl Fn(&I) -> T + Sync) -> Vec<T> {
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_preserves_order() {
        let out = map_indexed(1000, |i| i * i);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(*v, i * i);
        }
    }

    #[test]
    fn map_slice_preserves_order() {
        let items: Vec<i64> = (0..500).collect();
        let out = map_slice(&items, |x| x + 1);
        assert_eq!(out, (1..501).collect::<Vec<i64>>());
    }
}
