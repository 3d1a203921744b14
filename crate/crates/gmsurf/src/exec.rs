//! Parallel-or-sequential execution helpers. With the `parallel` feature the
//! maps fan out over rayon; without it they run sequentially with identical
//! results (all reductions are ordered).

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Ordered map over a slice.
#[cfg(feature = "parallel")]
pub fn par_map<T: Sync, U: Send, F: Fn(&T) -> U + Sync + Send>(items: &[T], f: F) -> Vec<U> {
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, U, F: Fn(&T) -> U>(items: &[T], f: F) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Run `body` on a pool with `workers` threads (0 = library default).
/// Without the `parallel` feature the worker count is ignored.
#[cfg(feature = "parallel")]
pub fn with_workers<R: Send>(workers: usize, body: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return body();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("failed to build thread pool");
    pool.install(body)
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<R>(_workers: usize, body: impl FnOnce() -> R) -> R {
    body()
}
