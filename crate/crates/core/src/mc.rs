//! Replication drivers. Results are always returned in replication order, so any
//! reduction over them is independent of how the work was scheduled.

use alloc::vec::Vec;

use crate::error::Result;

pub trait Replicate: Sync {
    /// `[f(0), f(1), ..., f(n - 1)]`.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;

    /// Like [`Replicate::map`] but stops at the lowest-indexed error.
    fn try_map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }
}

/// Runs replications one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Replicate for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        (0..n as u64).map(f).collect()
    }
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = crate::math::mean(values);
    let n = values.len();
    if n < 2 {
        return (m, f64::NAN);
    }
    (m, crate::math::sqrt(crate::math::variance(values) / n as f64))
}
