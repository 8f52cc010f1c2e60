//! Index-ordered parallel evaluation.
//!
//! Work is split by trial index and collected back in index order, so any
//! reduction done afterwards sees the same sequence whatever the number of
//! workers.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::SimResult;

pub struct Runner {
    pool: ThreadPool,
}

impl Runner {
    /// A runner with `jobs` workers; 0 means one per available core.
    pub fn new(jobs: usize) -> SimResult<Self> {
        let jobs = if jobs == 0 {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        } else {
            jobs
        };
        Ok(Self {
            pool: ThreadPoolBuilder::new().num_threads(jobs).build()?,
        })
    }

    pub fn jobs(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// `f(i)` for `i` in `range`, in order.
    pub fn map<T, F>(&self, range: std::ops::Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| range.into_par_iter().map(f).collect())
    }

    /// Like [`Runner::map`], stopping at the first error by index.
    pub fn try_map<T, E, F>(&self, range: std::ops::Range<u64>, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(u64) -> Result<T, E> + Sync + Send,
    {
        self.map(range, f).into_iter().collect()
    }
}
