//! Deterministic parallel maps.
//!
//! Every scan in the crate evaluates independent grid points and merges the
//! results in input order, so outputs do not depend on the thread count.

use rayon::prelude::*;

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "GAUSSHARDY_THREADS";

/// Worker count: explicit request, then the environment override, then
/// rayon's default.
pub fn thread_count(requested: Option<usize>) -> usize {
    requested
        .or_else(|| {
            std::env::var(THREADS_ENV)
                .ok()
                .and_then(|v| v.trim().parse::<usize>().ok())
        })
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Order-preserving parallel map.
pub fn ordered_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Runs `op` inside a dedicated pool with `threads` workers.
pub fn with_threads<R: Send, F: FnOnce() -> R + Send>(threads: usize, op: F) -> R {
    match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
    {
        Ok(pool) => pool.install(op),
        Err(_) => op(),
    }
}
