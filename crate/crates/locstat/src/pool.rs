//! Replication-parallel execution on a dedicated rayon pool.

use rayon::prelude::*;

use locstat_core::Replicate;

/// Environment variable that overrides the configured worker count.
pub const THREADS_ENV: &str = "LOCSTAT_THREADS";

/// Worker pool; results come back in replication order whatever the worker count.
pub struct Pool {
    pool: rayon::ThreadPool,
    threads: usize,
}

impl Pool {
    /// `threads = 0` means one worker per available core.
    pub fn new(threads: usize) -> Self {
        let threads = if threads == 0 { std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1) } else { threads };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        Pool { pool, threads }
    }

    /// [`Pool::new`] after applying the `LOCSTAT_THREADS` override.
    pub fn from_env(configured: usize) -> Self {
        Pool::new(resolve_threads(configured, std::env::var(THREADS_ENV).ok().as_deref()))
    }

    pub fn threads(&self) -> usize {
        self.threads
    }
}

pub fn resolve_threads(configured: usize, env: Option<&str>) -> usize {
    env.and_then(|v| v.trim().parse().ok()).unwrap_or(configured)
}

impl Replicate for Pool {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        if self.threads == 1 {
            return (0..n as u64).map(f).collect();
        }
        self.pool.install(|| (0..n as u64).into_par_iter().map(f).collect())
    }
}
