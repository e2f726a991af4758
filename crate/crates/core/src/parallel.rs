//! Worker-count control. `KLKIT_THREADS` caps rayon parallelism.

pub const THREADS_ENV: &str = "KLKIT_THREADS";

/// Parsed `KLKIT_THREADS`; unset, empty, zero or garbage means no cap.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
}

/// Runs `f` on a pool sized by [`thread_cap`], or on the global pool when unset.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match thread_cap().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}
