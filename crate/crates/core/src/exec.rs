//! Execution policy for the data-parallel loops.
//!
//! Every parallel code path in the crate goes through [`Exec`]. Results never
//! depend on the policy: work items are indexed, collected in index order, and
//! reduced sequentially after the join point.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Sequential or worker-pool execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// `jobs = None` uses the global rayon pool (available parallelism).
    #[default]
    Parallel,
    Jobs(usize),
}

impl Exec {
    pub fn with_jobs(jobs: Option<usize>) -> Self {
        match jobs {
            None => Exec::Parallel,
            Some(0) | Some(1) => Exec::Sequential,
            Some(j) => Exec::Jobs(j),
        }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Exec::Sequential)
    }

    /// Evaluates `f(i)` for `i in 0..len` and returns the results in index order.
    pub fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            match *self {
                Exec::Sequential => (0..len).map(f).collect(),
                Exec::Parallel => (0..len).into_par_iter().map(f).collect(),
                Exec::Jobs(j) => match rayon::ThreadPoolBuilder::new().num_threads(j).build() {
                    Ok(pool) => pool.install(|| (0..len).into_par_iter().map(&f).collect()),
                    Err(_) => (0..len).map(f).collect(),
                },
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..len).map(f).collect()
        }
    }

    /// Like [`Exec::map`] but for fallible work; the first error in index
    /// order is returned.
    pub fn try_map<T, F>(&self, len: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        self.map(len, f).into_iter().collect()
    }

    /// Sum of `f(i)` over `0..len`, computed in fixed-size chunks whose
    /// partial sums are added in chunk order, so the rounding is identical
    /// for every policy.
    pub fn sum<F>(&self, len: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        const CHUNK: usize = 256;
        let chunks = len.div_ceil(CHUNK);
        self.map(chunks, |c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            (lo..hi).map(&f).sum::<f64>()
        })
        .into_iter()
        .sum()
    }
}

/// Cooperative cancellation flag for long-running evaluations.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Relaxed)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.is_cancelled() {
            Err(Error::Cancelled)
        } else {
            Ok(())
        }
    }
}
