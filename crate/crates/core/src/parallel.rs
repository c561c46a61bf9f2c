//! Order-preserving parallel evaluation over contiguous index chunks.
//!
//! Work is split into chunks whose boundaries depend only on the range and
//! the chunk size, never on the worker count. Results come back in chunk
//! order, so any merge performed left to right is deterministic.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exactseq::RangeSpec;

pub const DEFAULT_CHUNK: u64 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Parallelism {
    workers: usize,
    chunk: u64,
}

impl Default for Parallelism {
    fn default() -> Self {
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
        Parallelism { workers, chunk: DEFAULT_CHUNK }
    }
}

impl Parallelism {
    pub fn new(workers: usize, chunk: u64) -> Result<Self> {
        if workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if chunk == 0 {
            return Err(Error::Config("chunk size must be at least 1".into()));
        }
        Ok(Parallelism { workers, chunk })
    }

    pub fn sequential() -> Self {
        Parallelism { workers: 1, chunk: DEFAULT_CHUNK }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn chunk(&self) -> u64 {
        self.chunk
    }

    /// Applies `f` to every chunk `[a, b]` of `[lo, hi]` and returns the
    /// results in chunk order.
    pub fn map_chunks<T, F>(&self, lo: u64, hi: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64, u64) -> T + Sync + Send,
    {
        if lo > hi {
            return Vec::new();
        }
        let range = RangeSpec { lo, hi, chunk: self.chunk };
        let chunks: Vec<(u64, u64)> = range.chunks().collect();
        self.map_items(&chunks, |&(a, b)| f(a, b))
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map_items<I, T, F>(&self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        if self.workers == 1 || items.len() <= 1 {
            return items.iter().map(f).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.workers).build() {
            Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            Err(_) => items.iter().map(f).collect(),
        }
    }
}
